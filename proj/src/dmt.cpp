#include "simmimo/dmt.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "simmimo/det_equiv.hpp"
#include "simmimo/fluctuations.hpp"
#include "simmimo/linalg.hpp"

namespace simmimo {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kLogTailFloor = -690.7755278982137;  // log(1e-300)

double log_normal_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

// Solves a 2x2 linear system with a singularity guard.
Eigen::Vector2d solve_2x2(const Eigen::Matrix2d& a, const Eigen::Vector2d& b,
                          const char* what) {
  const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  const double scale = a.cwiseAbs().maxCoeff();
  if (std::abs(det) <= 1e-14 * std::max(scale * scale, 1.0)) {
    throw SingularSensitivityError(std::string("theory_derivatives: singular "
                                               "2x2 derivative system (") +
                                   what + ")");
  }
  return a.partialPivLu().solve(b);
}

int q_of(const EffectiveCorrelations& eff) { return std::min(eff.m, eff.n); }

void check_w(double w, int q) {
  if (!(w > 0.0) || !(w < static_cast<double>(q))) {
    throw InvalidInputError("dmt: w must lie strictly between 0 and q = min(m, n)");
  }
}

// log P_out at the rate implied by (w, rho), plus the pieces the closed form
// needs. c = (q - w)/q is invariant in rho, so holding w fixed holds c fixed.
struct OutageTail {
  double c = 0.0;
  double g = 0.0;        // mean_mi / sqrt(variance)
  double log_pout = 0.0;
};

OutageTail outage_tail(double w, double rho, const EffectiveCorrelations& eff) {
  const int q = q_of(eff);
  check_w(w, q);
  const DetEquilibrium eq = solve_fixed_point(eff, rho, eff.n_t(), eff.n_r());
  const FluctuationSolution fl = solve_variance_fixed_point(eff, rho, eff.n_t());
  if (fl.variance <= 0.0) {
    throw DegenerateVarianceError("dmt: nonpositive variance at rho");
  }
  OutageTail t;
  t.c = (static_cast<double>(q) - w) / static_cast<double>(q);
  t.g = eq.mean_mi / std::sqrt(fl.variance);
  t.log_pout = log_normal_cdf(-t.c * t.g);
  if (t.log_pout < kLogTailFloor) {
    throw TailUnderflowError(
        "dmt: outage probability underflows below 1e-300; increase w or "
        "lower rho");
  }
  return t;
}

}  // namespace

TheoryDerivatives theory_derivatives(const EffectiveCorrelations& eff,
                                     double rho) {
  if (rho <= 0.0) {
    throw InvalidInputError("theory_derivatives: rho must be > 0");
  }
  const int n_t = eff.n_t();
  const int n_r = eff.n_r();
  const double m = static_cast<double>(eff.m);
  const double a = rho * eff.beta;

  const FluctuationSolution fl = solve_variance_fixed_point(eff, rho, n_t);
  TheoryDerivatives d;
  d.f = fl.f;
  d.f_tilde = fl.f_tilde;
  d.gamma = fl.gamma;
  d.gamma_tilde = fl.gamma_tilde;
  d.variance = fl.variance;
  d.x = rho * fl.f_tilde;
  d.y = rho * fl.f;

  // Mean MI from the same resolvents (self-consistent with the derivatives).
  CMat i_t = CMat::Identity(eff.rbar_t.rows(), eff.rbar_t.cols());
  CMat i_r = CMat::Identity(eff.rbar_r.rows(), eff.rbar_r.cols());
  d.mean_mi = logdet_hpd(i_t + d.y * eff.rbar_t) +
              logdet_hpd(i_r + d.x * eff.rbar_r) - (m / a) * d.x * d.y;
  d.mean_mi_prime = m * d.x * d.y / (rho * a);

  // Differentiating x = (a/m) tr(Rbar_t * S_tilde), y = (a/m) tr(Rbar_r * S)
  // in rho gives the 2x2 system
  //   [1      gamma_t][x'] = [x / rho]
  //   [gamma  1      ][y']   [y / rho]
  Eigen::Matrix2d sys_xy;
  sys_xy << 1.0, d.gamma_tilde, d.gamma, 1.0;
  const Eigen::Vector2d rhs_xy(d.x / rho, d.y / rho);
  const Eigen::Vector2d xy_p = solve_2x2(sys_xy, rhs_xy, "mean");
  d.delta_prime = xy_p[0];
  const double y_prime = xy_p[1];
  d.e_prime = (static_cast<double>(n_t) / static_cast<double>(n_r)) * y_prime;

  // Same structure for (f', f_tilde'): differentiating the variance fixed
  // point gives
  //   [1          gamma ][f'      ] = [-gamma   * f_tilde / rho]
  //   [gamma_t    1     ][f_tilde']   [-gamma_t * f       / rho]
  Eigen::Matrix2d sys_f;
  sys_f << 1.0, d.gamma, d.gamma_tilde, 1.0;
  const Eigen::Vector2d rhs_f(-d.gamma * d.f_tilde / rho,
                              -d.gamma_tilde * d.f / rho);
  const Eigen::Vector2d f_p = solve_2x2(sys_f, rhs_f, "variance");
  d.f_prime = f_p[0];
  d.f_tilde_prime = f_p[1];

  // gamma' needs the cubic traces tr((Rbar_r S)^3), tr((Rbar_t S_tilde)^3).
  const CMat t_r = eff.rbar_r * fl.s;
  const CMat t_t = eff.rbar_t * fl.s_tilde;
  const double tr_tr3 = (t_r * t_r * t_r).trace().real();
  const double tr_tt3 = (t_t * t_t * t_t).trace().real();
  d.gamma_prime = d.gamma / rho - (2.0 * a / m) * tr_tr3 * d.delta_prime;
  d.gamma_tilde_prime = d.gamma_tilde / rho - (2.0 * a / m) * tr_tt3 * y_prime;

  const double denom = 1.0 - d.gamma * d.gamma_tilde;
  d.variance_prime =
      (d.gamma_prime * d.gamma_tilde + d.gamma * d.gamma_tilde_prime) / denom;
  return d;
}

double multiplexing_gain(double rate, double mean_mi, int m, int n) {
  if (mean_mi <= 0.0) {
    throw InvalidInputError("multiplexing_gain: mean_mi must be > 0");
  }
  return static_cast<double>(std::min(m, n)) * rate / mean_mi;
}

double rate_from_gain(double w, double mean_mi, int m, int n) {
  return w * mean_mi / static_cast<double>(std::min(m, n));
}

double dmt_closed_form(double w, double rho,
                       const EffectiveCorrelations& eff) {
  const int q = q_of(eff);
  check_w(w, q);
  const TheoryDerivatives d = theory_derivatives(eff, rho);
  const double c = (static_cast<double>(q) - w) / static_cast<double>(q);
  const double sv = std::sqrt(d.variance);
  const double g = d.mean_mi / sv;
  const double log_pout = log_normal_cdf(-c * g);
  if (log_pout < kLogTailFloor) {
    throw TailUnderflowError(
        "dmt: outage probability underflows below 1e-300; increase w or "
        "lower rho");
  }
  const double g_prime =
      (d.mean_mi_prime * d.variance - 0.5 * d.mean_mi * d.variance_prime) /
      (d.variance * sv);
  // -d log Phi(-c G)/d log rho = rho * c * G' * pdf(cG) / Phi(-cG), evaluated
  // as exp(log pdf - log cdf) so the tail ratio never over/underflows.
  const double ratio = std::exp(log_normal_pdf(c * g) - log_pout);
  return rho * c * g_prime * ratio;
}

double dmt_numeric(double w, double rho, const EffectiveCorrelations& eff,
                   double log_step) {
  if (log_step <= 0.0) {
    throw InvalidInputError("dmt_numeric: log_step must be > 0");
  }
  const double lo = outage_tail(w, rho * std::exp(-log_step), eff).log_pout;
  const double hi = outage_tail(w, rho * std::exp(log_step), eff).log_pout;
  return -(hi - lo) / (2.0 * log_step);
}

DmtPoint dmt_point(double w, double rho, const EffectiveCorrelations& eff) {
  DmtPoint p;
  p.w = w;
  p.rho = rho;
  p.derivatives = theory_derivatives(eff, rho);
  p.rate = rate_from_gain(w, p.derivatives.mean_mi, eff.m, eff.n);
  p.d_closed = dmt_closed_form(w, rho, eff);
  p.d_numeric = dmt_numeric(w, rho, eff);
  return p;
}

}  // namespace simmimo
