#pragma once

#include "simmimo/types.hpp"

namespace simmimo {

// Second-order (variance) fixed point. Conventions, with a = rho*beta and m
// the inner aperture dimension:
//   f  = (beta/m) tr(rbar_r s),   s       = (I + rho*f_tilde*rbar_r)^{-1},
//   f~ = (beta/m) tr(rbar_t s~),  s_tilde = (I + rho*f*rbar_t)^{-1},
//   gamma  = (a/m) tr((rbar_r s)^2),  gamma_tilde = (a/m) tr((rbar_t s~)^2),
//   variance = -log(1 - gamma*gamma_tilde).
// These resolvents coincide with the mean fixed point's: rho*f_tilde = delta
// and rho*f = (n_r/n_t)*e.
struct FluctuationSolution {
  double f = 0.0;
  double f_tilde = 0.0;
  CMat s;        // n_r x n_r
  CMat s_tilde;  // n_t x n_t
  double gamma = 0.0;
  double gamma_tilde = 0.0;
  double variance = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

// Damped Picard iteration (damping 0.5, init f = f_tilde = 1). The n_t
// parameter is validated against rbar_t's dimension. rho = 0 short-circuits
// to f = f_tilde = 0, variance = 0.
FluctuationSolution solve_variance_fixed_point(const EffectiveCorrelations& eff,
                                               double rho, int n_t,
                                               double tol = 1e-9,
                                               int max_iter = 1000);

// Gaussian outage approximation: P_out = Phi((rate - mean_mi)/sqrt(variance)),
// with Phi the standard normal CDF. Rate and mean MI share one log base.
double outage_probability(double rate, double mean_mi, double variance);

// Normalized fluctuation (sample - mean)/sqrt(variance).
double clt_statistic(double sample_mi, double mean_mi, double variance);

}  // namespace simmimo
