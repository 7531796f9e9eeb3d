#include "simmimo/fluctuations.hpp"

#include <cmath>

#include "simmimo/linalg.hpp"

namespace simmimo {

FluctuationSolution solve_variance_fixed_point(const EffectiveCorrelations& eff,
                                               double rho, int n_t, double tol,
                                               int max_iter) {
  if (rho < 0.0) {
    throw InvalidInputError("solve_variance_fixed_point: rho must be >= 0");
  }
  if (tol <= 0.0) {
    throw InvalidInputError("solve_variance_fixed_point: tol must be > 0");
  }
  if (eff.rbar_t.rows() != n_t || eff.rbar_t.cols() != n_t) {
    throw InvalidInputError(
        "solve_variance_fixed_point: rbar_t must be n_t x n_t");
  }
  if (eff.m < 1 || eff.beta <= 0.0) {
    throw InvalidInputError(
        "solve_variance_fixed_point: need m >= 1 and beta > 0");
  }
  const int n_r = eff.n_r();

  FluctuationSolution fl;
  if (rho == 0.0) {
    fl.s = CMat::Identity(n_r, n_r);
    fl.s_tilde = CMat::Identity(n_t, n_t);
    return fl;
  }

  const double m = static_cast<double>(eff.m);
  const double beta = eff.beta;
  const double a = rho * beta;
  const CMat it = CMat::Identity(n_t, n_t);
  const CMat ir = CMat::Identity(n_r, n_r);

  double f = 1.0;
  double ft = 1.0;
  constexpr double kDamping = 0.5;

  CMat s, s_tilde;
  double residual = 0.0;
  int it_count = 0;
  bool converged = false;
  for (; it_count < max_iter; ++it_count) {
    s = inverse_hpd(ir + (rho * ft) * eff.rbar_r);
    s_tilde = inverse_hpd(it + (rho * f) * eff.rbar_t);
    const double f_map = (beta / m) * (eff.rbar_r * s).trace().real();
    const double ft_map = (beta / m) * (eff.rbar_t * s_tilde).trace().real();
    residual = std::max(std::abs(f_map - f), std::abs(ft_map - ft));
    if (residual <= tol) {
      converged = true;
      break;
    }
    f = (1.0 - kDamping) * f + kDamping * f_map;
    ft = (1.0 - kDamping) * ft + kDamping * ft_map;
  }
  if (!converged) {
    throw ConvergenceError(
        "solve_variance_fixed_point: no convergence after " +
            std::to_string(max_iter) + " iterations (residual " +
            std::to_string(residual) + ")",
        residual);
  }

  fl.f = f;
  fl.f_tilde = ft;
  fl.s = s;
  fl.s_tilde = s_tilde;
  const CMat tr_r = eff.rbar_r * s;
  const CMat tr_t = eff.rbar_t * s_tilde;
  fl.gamma = (a / m) * (tr_r * tr_r).trace().real();
  fl.gamma_tilde = (a / m) * (tr_t * tr_t).trace().real();
  fl.residual = residual;
  fl.iterations = it_count + 1;

  const double prod = fl.gamma * fl.gamma_tilde;
  if (prod >= 1.0) {
    throw DegenerateVarianceError(
        "solve_variance_fixed_point: gamma*gamma_tilde = " +
        std::to_string(prod) + " >= 1, variance undefined");
  }
  fl.variance = -std::log1p(-prod);
  return fl;
}

double outage_probability(double rate, double mean_mi, double variance) {
  if (variance <= 0.0) {
    throw InvalidInputError("outage_probability: variance must be > 0");
  }
  return normal_cdf((rate - mean_mi) / std::sqrt(variance));
}

double clt_statistic(double sample_mi, double mean_mi, double variance) {
  if (variance <= 0.0) {
    throw InvalidInputError("clt_statistic: variance must be > 0");
  }
  return (sample_mi - mean_mi) / std::sqrt(variance);
}

}  // namespace simmimo
