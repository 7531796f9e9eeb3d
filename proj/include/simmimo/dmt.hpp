#pragma once

#include "simmimo/types.hpp"

namespace simmimo {

// Everything needed to differentiate the Gaussian outage approximation with
// respect to rho at a fixed phase configuration: the fixed-point coordinates,
// their rho-derivatives (each obtained from a 2x2 linear system in the two
// unknown derivatives), and the resulting d(mean)/d(rho), d(variance)/d(rho).
struct TheoryDerivatives {
  // Mean fixed point (x = delta, y scaled as in the mean solver).
  double x = 0.0;
  double y = 0.0;
  double delta_prime = 0.0;  // d(delta)/d(rho)
  double e_prime = 0.0;      // d(e)/d(rho)
  // Variance fixed point and trace couplings.
  double f = 0.0;
  double f_tilde = 0.0;
  double f_prime = 0.0;
  double f_tilde_prime = 0.0;
  double gamma = 0.0;
  double gamma_tilde = 0.0;
  double gamma_prime = 0.0;
  double gamma_tilde_prime = 0.0;
  // Outage statistics and their derivatives.
  double mean_mi = 0.0;
  double mean_mi_prime = 0.0;
  double variance = 0.0;
  double variance_prime = 0.0;
};

// Differentiates both fixed points at rho. Throws SingularSensitivityError if
// either 2x2 derivative system is singular (|1 - gamma*gamma_tilde| ~ 0).
TheoryDerivatives theory_derivatives(const EffectiveCorrelations& eff,
                                     double rho);

// w = q * rate / mean_mi with q = min(m, n); m, n are the metasurface
// element counts. mean_mi must be > 0.
double multiplexing_gain(double rate, double mean_mi, int m, int n);

// Inverse map: rate = w * mean_mi / q.
double rate_from_gain(double w, double mean_mi, int m, int n);

// Closed-form finite-SNR diversity gain at multiplexing gain w (0 < w < q):
//   d(w, rho) = rho * c * G'(rho) * pdf(c*G) / cdf(-c*G),  c = (q - w)/q,
// with G = mean_mi / sqrt(variance). Evaluated in log space so deep outage
// tails stay finite; throws TailUnderflowError when P_out < 1e-300.
double dmt_closed_form(double w, double rho, const EffectiveCorrelations& eff);

// Independent numerical oracle: -d(log P_out)/d(log rho) by central
// differences with the given log-SNR step, holding w fixed (the rate is
// recomputed from w and the mean MI at each evaluation point).
double dmt_numeric(double w, double rho, const EffectiveCorrelations& eff,
                   double log_step = 1e-3);

struct DmtPoint {
  double w = 0.0;
  double rho = 0.0;
  double rate = 0.0;  // nats, rate_from_gain(w, mean_mi(rho))
  double d_closed = 0.0;
  double d_numeric = 0.0;
  TheoryDerivatives derivatives;
};

// Convenience: evaluates both routes and the derivative record at one (w, rho).
DmtPoint dmt_point(double w, double rho, const EffectiveCorrelations& eff);

}  // namespace simmimo
