#pragma once

#include "simmimo/types.hpp"

namespace simmimo {

// Solution of the two-scalar fixed point behind the large-system mean mutual
// information. Exposed scalars follow the convention
//   delta = (rho*beta/m) * tr(rbar_t * s_tilde),
//   e     = (n_t/n_r) * (rho*beta/m) * tr(rbar_r * s),
// with resolvents s_tilde = (I + (n_r/n_t)*e*rbar_t)^{-1} (n_t x n_t) and
// s = (I + delta*rbar_r)^{-1} (n_r x n_r); q_t = s_tilde/rho, q_r = s/rho.
struct DetEquilibrium {
  double e = 0.0;
  double delta = 0.0;
  CMat q_t;
  CMat q_r;
  CMat s_tilde;
  CMat s;
  double mean_mi = 0.0;  // nats
  double residual = 0.0;
  int iterations = 0;
};

// rbar_t = P^H R_T P and rbar_r = D R_R D^H, Hermitian-symmetrized; carries
// the inner dimensions and link gain from `stats`.
EffectiveCorrelations effective_correlations(const CMat& p, const CMat& d,
                                             const ChannelStatistics& stats);

// Damped Picard iteration (damping 0.5) on (e, delta). The residual is the
// max self-consistency gap of the undamped map. rho = 0 short-circuits to the
// analytic limit e = delta = 0, mean_mi = 0.
DetEquilibrium solve_fixed_point(const EffectiveCorrelations& eff, double rho,
                                 int n_t, int n_r, double tol = 1e-9,
                                 int max_iter = 1000, double e0 = 1.0,
                                 double delta0 = 1.0);

// Mean mutual information in nats:
//   logdet(I + (n_r/n_t)*e*rbar_t) + logdet(I + delta*rbar_r)
//   - (m*n_r/(rho*beta*n_t)) * delta * e.
double mean_mi(const DetEquilibrium& eq, const EffectiveCorrelations& eff,
               double rho, int n_t, int n_r);

// Scalar special case used as an independent reference formula; not derived
// from the general solver. Returns mean MI in nats for the quoted closed form
//   delta = (-rho - 2 + sqrt(rho^2 + 8 rho + 4)) / (2 rho),
//   m*log(1 + 1/(rho*(1+delta))) + n*log(1+delta) - delta/(1+delta).
double mean_mi_iid_special(double rho, int m, int n);

// Root of the quadratic the quoted special case solves; exposed for tests.
double iid_special_delta(double rho);

// Closed-form solution of the implemented fixed point when both effective
// correlations are identity matrices (beta = 1): with a_t = rho*n_t/m and
// a_r = rho*n_r/m, x solves x^2 + (1 + a_r - a_t)x - a_t = 0 and
// y = a_r/(1+x). Computed by the quadratic formula — an algebraically
// independent cross-check of the iterative solver.
struct IdentityEquilibrium {
  double x = 0.0;       // equals delta
  double y = 0.0;       // equals (n_r/n_t)*e
  double mean_mi = 0.0; // nats
};
IdentityEquilibrium identity_closed_form(double rho, int n_t, int n_r, int m);

}  // namespace simmimo
