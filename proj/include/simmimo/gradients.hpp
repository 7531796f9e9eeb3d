#pragma once

#include <functional>

#include "simmimo/det_equiv.hpp"
#include "simmimo/fluctuations.hpp"
#include "simmimo/types.hpp"

namespace simmimo {

// Gradients with respect to the conjugated unit-modulus phase factors:
// d_phi[l][m] = dF/d(phi^l_m)^*, d_psi[k][n] = dF/d(psi^k_n)^*.
// For a real objective F and phase angle theta the angle derivative is
// dF/dtheta = 2*Im(dF/dphi^* * e^{-j*theta}).
struct PhaseGradient {
  std::vector<CVec> d_phi;
  std::vector<CVec> d_psi;
};

// Everything the gradient formulas need at one operating point: the composed
// maps P and D, the resolvents s/s_tilde (equal to the inverse matrices
// (I + (n_r/n_t)e*rbar_t)^{-1} and (I + delta*rbar_r)^{-1}), the matched
// second-order scalars, and trace constants.
struct GradientWorkspace {
  CMat p;  // atoms x n_t
  CMat d;  // n_r x atoms
  CMat k_mat;    // = s_tilde, n_t x n_t
  CMat b_mat;    // = s, n_r x n_r
  CMat q_t;      // s_tilde / rho
  CMat q_r;      // s / rho
  CMat s;        // equals b_mat
  CMat s_tilde;  // equals k_mat
  EffectiveCorrelations eff;
  double rho = 0.0;
  double a = 0.0;  // rho * beta
  double e = 0.0;
  double delta = 0.0;
  double x = 0.0;  // = delta
  double y = 0.0;  // = (n_r/n_t) * e
  double f = 0.0;
  double f_tilde = 0.0;
  double gamma = 0.0;
  double gamma_tilde = 0.0;
  double variance = 0.0;
  double mean_mi = 0.0;
  double tr_tr3 = 0.0;  // tr((rbar_r s)^3)
  double tr_tt3 = 0.0;  // tr((rbar_t s_tilde)^3)

  // Sub-stack products for every layer (1-based layer l maps to index l-1):
  // tx_prefix[l-1] spans the antennas up to and including transfer l,
  // tx_suffix[l-1] spans the factors above layer l's phases (identity for the
  // last layer); rx_prefix/rx_suffix are the receive-side analogues.
  std::vector<CMat> tx_prefix;
  std::vector<CMat> tx_suffix;
  std::vector<CMat> rx_prefix;
  std::vector<CMat> rx_suffix;
  CMat prt;  // p^H * r_t  (n_t x atoms)
  CMat rrd;  // r_r * d^H  (atoms x n_r)
};

GradientWorkspace make_workspace(const SimStack& tx, const SimStack& rx,
                                 const ChannelStatistics& stats, double rho,
                                 double tol = 1e-9, int max_iter = 1000);

// Sub-stack sandwich for the transmit side, layer l in 1..L:
// A_l(X) = [transfer and phase factors from the antennas up to and including
// transfer l] * X * [phase and transfer factors from layer l+1 to the output];
// X must be n_t x atoms. The result is atoms x atoms.
CMat sandwich_tx(int l, const CMat& x, const SimStack& stack);

// Receive-side analogue, layer k in 1..K: C_k(Y) = [factors from layer k+1 to
// the channel-facing side] * Y * [factors from the antennas down to and
// including transfer k]; Y must be atoms x n_r. The result is atoms x atoms.
CMat sandwich_rx(int k, const CMat& y, const SimStack& stack);

// Gradient of the mean mutual information. At the fixed point the objective
// is stationary in (e, delta), so only the explicit dependence through the
// effective correlations contributes (envelope property).
PhaseGradient grad_mean_mi(const GradientWorkspace& w);

// Gradient of the fluctuation variance. Includes the implicit sensitivity of
// the fixed point, solved exactly per component by 2x2 elimination.
PhaseGradient grad_variance(const GradientWorkspace& w);

// Gradient of the Gaussian outage approximation at rate R (same log base as
// mean_mi): chain rule through P_out = Phi((R - mean)/sqrt(V)).
PhaseGradient grad_outage(const GradientWorkspace& w, double rate);

// Objective for finite differencing: phases enter via the two stacks.
using PhaseObjective =
    std::function<double(const SimStack& tx, const SimStack& rx)>;

// Central finite differences on each phase angle. The returned complex
// entries are the tangential representatives z = 0.5 * (dF/dtheta) * j *
// e^{j*theta}; they reproduce the angle derivative under the mapping
// dF/dtheta = 2*Im(z e^{-j*theta}) (the radial component of a conjugate-phase
// gradient is unobservable on the unit circle, so only the tangential part is
// comparable).
PhaseGradient finite_difference_gradient(const PhaseObjective& objective,
                                         const SimStack& tx,
                                         const SimStack& rx, double step);

// Angle-domain view of a conjugate-phase gradient: per layer,
// dF/dtheta_m = 2*Im(z_m e^{-j*theta_m}).
std::vector<RVec> angle_derivatives_tx(const PhaseGradient& g,
                                       const SimStack& tx);
std::vector<RVec> angle_derivatives_rx(const PhaseGradient& g,
                                       const SimStack& rx);

// Worst relative deviation between two gradients in the angle domain, with an
// absolute floor below which components count as matching.
double max_relative_angle_error(const PhaseGradient& analytic,
                                const PhaseGradient& numeric,
                                const SimStack& tx, const SimStack& rx,
                                double abs_floor = 1e-8);

}  // namespace simmimo
