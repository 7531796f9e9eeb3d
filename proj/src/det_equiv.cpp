#include "simmimo/det_equiv.hpp"

#include <cmath>

#include "simmimo/linalg.hpp"

namespace simmimo {

EffectiveCorrelations effective_correlations(const CMat& p, const CMat& d,
                                             const ChannelStatistics& stats) {
  if (stats.r_t.rows() != p.rows()) {
    throw InvalidInputError(
        "effective_correlations: P rows must match r_t dimension");
  }
  if (stats.r_r.rows() != d.cols()) {
    throw InvalidInputError(
        "effective_correlations: D cols must match r_r dimension");
  }
  if (stats.beta <= 0.0) {
    throw InvalidInputError("effective_correlations: beta must be > 0");
  }
  EffectiveCorrelations eff;
  eff.rbar_t = hermitianize(p.adjoint() * stats.r_t * p);
  eff.rbar_r = hermitianize(d * stats.r_r * d.adjoint());
  eff.m = static_cast<int>(stats.r_t.rows());
  eff.n = static_cast<int>(stats.r_r.rows());
  eff.beta = stats.beta;
  return eff;
}

namespace {

void check_solver_inputs(const EffectiveCorrelations& eff, double rho, int n_t,
                         int n_r, double tol) {
  if (rho < 0.0) throw InvalidInputError("solve_fixed_point: rho must be >= 0");
  if (tol <= 0.0) throw InvalidInputError("solve_fixed_point: tol must be > 0");
  if (eff.rbar_t.rows() != n_t || eff.rbar_t.cols() != n_t) {
    throw InvalidInputError("solve_fixed_point: rbar_t must be n_t x n_t");
  }
  if (eff.rbar_r.rows() != n_r || eff.rbar_r.cols() != n_r) {
    throw InvalidInputError("solve_fixed_point: rbar_r must be n_r x n_r");
  }
  if (eff.m < 1 || eff.beta <= 0.0) {
    throw InvalidInputError("solve_fixed_point: need m >= 1 and beta > 0");
  }
}

}  // namespace

DetEquilibrium solve_fixed_point(const EffectiveCorrelations& eff, double rho,
                                 int n_t, int n_r, double tol, int max_iter,
                                 double e0, double delta0) {
  check_solver_inputs(eff, rho, n_t, n_r, tol);

  DetEquilibrium eq;
  if (rho == 0.0) {
    eq.s_tilde = CMat::Identity(n_t, n_t);
    eq.s = CMat::Identity(n_r, n_r);
    eq.q_t = eq.s_tilde;
    eq.q_r = eq.s;
    return eq;
  }

  const double a = rho * eff.beta;
  const double m = static_cast<double>(eff.m);
  const CMat it = CMat::Identity(n_t, n_t);
  const CMat ir = CMat::Identity(n_r, n_r);

  // Internal variables: x = delta, y = (n_r/n_t) * e.
  double x = delta0;
  double y = (static_cast<double>(n_r) / n_t) * e0;
  constexpr double kDamping = 0.5;

  CMat s_tilde, s;
  double residual = 0.0;
  int it_count = 0;
  bool converged = false;
  for (; it_count < max_iter; ++it_count) {
    s_tilde = inverse_hpd(it + y * eff.rbar_t);
    s = inverse_hpd(ir + x * eff.rbar_r);
    const double x_map = (a / m) * (eff.rbar_t * s_tilde).trace().real();
    const double y_map = (a / m) * (eff.rbar_r * s).trace().real();
    residual = std::max(std::abs(x_map - x), std::abs(y_map - y));
    if (residual <= tol) {
      converged = true;
      break;
    }
    x = (1.0 - kDamping) * x + kDamping * x_map;
    y = (1.0 - kDamping) * y + kDamping * y_map;
  }
  if (!converged) {
    throw ConvergenceError(
        "solve_fixed_point: no convergence after " +
            std::to_string(max_iter) + " iterations (residual " +
            std::to_string(residual) + ")",
        residual);
  }

  eq.delta = x;
  eq.e = (static_cast<double>(n_t) / n_r) * y;
  eq.s_tilde = s_tilde;
  eq.s = s;
  eq.q_t = s_tilde / rho;
  eq.q_r = s / rho;
  eq.residual = residual;
  eq.iterations = it_count + 1;
  eq.mean_mi = mean_mi(eq, eff, rho, n_t, n_r);
  return eq;
}

double mean_mi(const DetEquilibrium& eq, const EffectiveCorrelations& eff,
               double rho, int n_t, int n_r) {
  if (rho == 0.0) return 0.0;
  const double a = rho * eff.beta;
  const double m = static_cast<double>(eff.m);
  const double x = eq.delta;
  const double y = (static_cast<double>(n_r) / n_t) * eq.e;
  const CMat it = CMat::Identity(n_t, n_t);
  const CMat ir = CMat::Identity(n_r, n_r);
  return logdet_hpd(it + y * eff.rbar_t) + logdet_hpd(ir + x * eff.rbar_r) -
         (m / a) * x * y;
}

double iid_special_delta(double rho) {
  if (rho <= 0.0) {
    throw InvalidInputError("iid_special_delta: rho must be > 0");
  }
  return (-rho - 2.0 + std::sqrt(rho * rho + 8.0 * rho + 4.0)) / (2.0 * rho);
}

double mean_mi_iid_special(double rho, int m, int n) {
  if (rho <= 0.0) {
    throw InvalidInputError("mean_mi_iid_special: rho must be > 0");
  }
  if (m < 1 || n < 1) {
    throw InvalidInputError("mean_mi_iid_special: dimensions must be >= 1");
  }
  const double delta = iid_special_delta(rho);
  return m * std::log(1.0 + 1.0 / (rho * (1.0 + delta))) +
         n * std::log(1.0 + delta) - delta / (1.0 + delta);
}

IdentityEquilibrium identity_closed_form(double rho, int n_t, int n_r, int m) {
  if (rho <= 0.0) {
    throw InvalidInputError("identity_closed_form: rho must be > 0");
  }
  if (n_t < 1 || n_r < 1 || m < 1) {
    throw InvalidInputError("identity_closed_form: dimensions must be >= 1");
  }
  const double a_t = rho * n_t / static_cast<double>(m);
  const double a_r = rho * n_r / static_cast<double>(m);
  const double b = 1.0 + a_r - a_t;
  IdentityEquilibrium out;
  out.x = 0.5 * (-b + std::sqrt(b * b + 4.0 * a_t));
  out.y = a_r / (1.0 + out.x);
  out.mean_mi = n_t * std::log1p(out.y) + n_r * std::log1p(out.x) -
                (static_cast<double>(m) / rho) * out.x * out.y;
  return out;
}

}  // namespace simmimo
