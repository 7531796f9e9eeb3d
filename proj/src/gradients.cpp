#include "simmimo/gradients.hpp"

#include <cmath>

#include "simmimo/channel.hpp"
#include "simmimo/linalg.hpp"

namespace simmimo {

namespace {

CVec phase_factors(const RVec& th) {
  CVec v(th.size());
  for (Eigen::Index i = 0; i < th.size(); ++i) v[i] = std::polar(1.0, th[i]);
  return v;
}

// Prefix products B_l = W^l Phi^{l-1} ... Phi^1 W^1 for l = 1..L.
std::vector<CMat> tx_prefixes(const SimStack& tx) {
  const int layers = tx.layers();
  std::vector<CMat> b(static_cast<std::size_t>(layers));
  b[0] = tx.transfers[0];
  for (int l = 1; l < layers; ++l) {
    b[static_cast<std::size_t>(l)] =
        tx.transfers[static_cast<std::size_t>(l)] *
        (phase_factors(tx.phases[static_cast<std::size_t>(l - 1)])
             .asDiagonal() *
         b[static_cast<std::size_t>(l - 1)]);
  }
  return b;
}

// Suffix products T_l = Phi^L W^L ... Phi^{l+1} W^{l+1}, T_L = I.
std::vector<CMat> tx_suffixes(const SimStack& tx) {
  const int layers = tx.layers();
  const int m = static_cast<int>(tx.transfers.back().rows());
  std::vector<CMat> t(static_cast<std::size_t>(layers));
  t[static_cast<std::size_t>(layers - 1)] = CMat::Identity(m, m);
  for (int l = layers - 1; l >= 1; --l) {
    t[static_cast<std::size_t>(l - 1)] =
        t[static_cast<std::size_t>(l)] *
        (phase_factors(tx.phases[static_cast<std::size_t>(l)]).asDiagonal() *
         tx.transfers[static_cast<std::size_t>(l)]);
  }
  return t;
}

// Receive prefixes Lc_k = U^1 Psi^1 ... Psi^{k-1} U^k (antenna side inward).
std::vector<CMat> rx_prefixes(const SimStack& rx) {
  const int layers = rx.layers();
  std::vector<CMat> lc(static_cast<std::size_t>(layers));
  lc[0] = rx.transfers[0];
  for (int k = 1; k < layers; ++k) {
    lc[static_cast<std::size_t>(k)] =
        (lc[static_cast<std::size_t>(k - 1)] *
         phase_factors(rx.phases[static_cast<std::size_t>(k - 1)])
             .asDiagonal()) *
        rx.transfers[static_cast<std::size_t>(k)];
  }
  return lc;
}

// Receive suffixes Rc_k = U^{k+1} Psi^{k+1} ... U^K Psi^K, Rc_K = I.
std::vector<CMat> rx_suffixes(const SimStack& rx) {
  const int layers = rx.layers();
  const int n = static_cast<int>(rx.transfers.back().cols());
  std::vector<CMat> rc(static_cast<std::size_t>(layers));
  rc[static_cast<std::size_t>(layers - 1)] = CMat::Identity(n, n);
  for (int k = layers - 1; k >= 1; --k) {
    rc[static_cast<std::size_t>(k - 1)] =
        rx.transfers[static_cast<std::size_t>(k)] *
        (phase_factors(rx.phases[static_cast<std::size_t>(k)]).asDiagonal() *
         rc[static_cast<std::size_t>(k)]);
  }
  return rc;
}

// diag(left * mid * right) without forming the full product twice:
// entry i = (left*mid).row(i) dot right.col(i).
CVec sandwich_diag(const CMat& left, const CMat& mid, const CMat& right) {
  const CMat f = left * mid;
  return f.cwiseProduct(right.transpose()).rowwise().sum();
}

}  // namespace

CMat sandwich_tx(int l, const CMat& x, const SimStack& stack) {
  if (stack.side != SimSide::transmit) {
    throw InvalidInputError("sandwich_tx: stack must be transmit-side");
  }
  const int layers = stack.layers();
  if (l < 1 || l > layers) {
    throw InvalidInputError("sandwich_tx: layer index out of range");
  }
  const auto b = tx_prefixes(stack);
  const auto t = tx_suffixes(stack);
  const CMat& bl = b[static_cast<std::size_t>(l - 1)];
  const CMat& tl = t[static_cast<std::size_t>(l - 1)];
  if (x.rows() != bl.cols() || x.cols() != tl.rows()) {
    throw InvalidInputError("sandwich_tx: X must be n_t x atoms");
  }
  return bl * x * tl;
}

CMat sandwich_rx(int k, const CMat& y, const SimStack& stack) {
  if (stack.side != SimSide::receive) {
    throw InvalidInputError("sandwich_rx: stack must be receive-side");
  }
  const int layers = stack.layers();
  if (k < 1 || k > layers) {
    throw InvalidInputError("sandwich_rx: layer index out of range");
  }
  const auto lc = rx_prefixes(stack);
  const auto rc = rx_suffixes(stack);
  const CMat& lck = lc[static_cast<std::size_t>(k - 1)];
  const CMat& rck = rc[static_cast<std::size_t>(k - 1)];
  if (y.rows() != rck.cols() || y.cols() != lck.rows()) {
    throw InvalidInputError("sandwich_rx: Y must be atoms x n_r");
  }
  return rck * y * lck;
}

GradientWorkspace make_workspace(const SimStack& tx, const SimStack& rx,
                                 const ChannelStatistics& stats, double rho,
                                 double tol, int max_iter) {
  if (rho <= 0.0) throw InvalidInputError("make_workspace: rho must be > 0");
  if (tx.side != SimSide::transmit || rx.side != SimSide::receive) {
    throw InvalidInputError("make_workspace: stacks must be (transmit, receive)");
  }
  GradientWorkspace w;
  w.p = compose_sim(tx);
  w.d = compose_sim(rx);
  w.eff = effective_correlations(w.p, w.d, stats);
  const int n_t = w.eff.n_t();
  const int n_r = w.eff.n_r();

  const FluctuationSolution fl =
      solve_variance_fixed_point(w.eff, rho, n_t, tol, max_iter);

  w.rho = rho;
  w.a = rho * w.eff.beta;
  w.f = fl.f;
  w.f_tilde = fl.f_tilde;
  // One self-consistent scalar set for all gradients: the mean fixed point in
  // its (x, y) form coincides with (rho*f_tilde, rho*f).
  w.x = rho * fl.f_tilde;
  w.y = rho * fl.f;
  w.delta = w.x;
  w.e = (static_cast<double>(n_t) / n_r) * w.y;
  w.s = fl.s;
  w.s_tilde = fl.s_tilde;
  w.b_mat = fl.s;
  w.k_mat = fl.s_tilde;
  w.q_t = fl.s_tilde / rho;
  w.q_r = fl.s / rho;
  w.gamma = fl.gamma;
  w.gamma_tilde = fl.gamma_tilde;
  w.variance = fl.variance;

  const double m = static_cast<double>(w.eff.m);
  w.mean_mi = logdet_hpd(CMat::Identity(n_t, n_t) + w.y * w.eff.rbar_t) +
              logdet_hpd(CMat::Identity(n_r, n_r) + w.x * w.eff.rbar_r) -
              (m / w.a) * w.x * w.y;

  const CMat t_r = w.eff.rbar_r * w.s;
  const CMat t_t = w.eff.rbar_t * w.s_tilde;
  w.tr_tr3 = (t_r * t_r * t_r).trace().real();
  w.tr_tt3 = (t_t * t_t * t_t).trace().real();

  w.tx_prefix = tx_prefixes(tx);
  w.tx_suffix = tx_suffixes(tx);
  w.rx_prefix = rx_prefixes(rx);
  w.rx_suffix = rx_suffixes(rx);
  w.prt = w.p.adjoint() * stats.r_t;
  w.rrd = stats.r_r * w.d.adjoint();
  return w;
}

PhaseGradient grad_mean_mi(const GradientWorkspace& w) {
  PhaseGradient g;
  const CMat xt = w.s_tilde * w.prt;  // n_t x atoms
  for (std::size_t l = 0; l < w.tx_prefix.size(); ++l) {
    const CVec diag = sandwich_diag(w.tx_prefix[l], xt, w.tx_suffix[l]);
    g.d_phi.push_back(w.y * diag.conjugate());
  }
  const CMat yr = w.rrd * w.s;  // atoms x n_r
  for (std::size_t k = 0; k < w.rx_prefix.size(); ++k) {
    const CVec diag = sandwich_diag(w.rx_suffix[k], yr, w.rx_prefix[k]);
    g.d_psi.push_back(w.x * diag.conjugate());
  }
  return g;
}

PhaseGradient grad_variance(const GradientWorkspace& w) {
  const double denom = 1.0 - w.gamma * w.gamma_tilde;
  if (std::abs(denom) < 1e-12) {
    throw SingularSensitivityError(
        "grad_variance: 1 - gamma*gamma_tilde is numerically singular");
  }
  const double m = static_cast<double>(w.eff.m);
  const double am = w.a / m;
  const double g = w.gamma;
  const double gt = w.gamma_tilde;

  PhaseGradient out;

  // Transmit layers: perturbations reach the fixed point only through
  // rbar_t. Per component (Wirtinger derivative along phi, conjugated at the
  // end): dx = tT/(1-g*gt), dy = -g*dx,
  // dgamma = -(2a/m) tr((rbar_r s)^3) dx,
  // dgamma_tilde = (2a/m) [tr(rbar_t s~^3 dRbar_t) - tr((rbar_t s~)^3) dy].
  const CMat s2 = w.s_tilde * w.s_tilde;
  const CMat u_t = s2 * w.prt;                              // for tT
  const CMat v_t = (w.eff.rbar_t * s2 * w.s_tilde) * w.prt; // for dgamma_tilde
  for (std::size_t l = 0; l < w.tx_prefix.size(); ++l) {
    const CVec du = sandwich_diag(w.tx_prefix[l], u_t, w.tx_suffix[l]);
    const CVec dv = sandwich_diag(w.tx_prefix[l], v_t, w.tx_suffix[l]);
    CVec dvar(du.size());
    for (Eigen::Index i = 0; i < du.size(); ++i) {
      const cplx t_tc = am * du[i];
      const cplx dx = t_tc / denom;
      const cplx dy = -g * dx;
      const cplx dgamma = -2.0 * am * w.tr_tr3 * dx;
      const cplx dgamma_t = 2.0 * am * dv[i] - 2.0 * am * w.tr_tt3 * dy;
      dvar[i] = (gt * dgamma + g * dgamma_t) / denom;
    }
    out.d_phi.push_back(dvar.conjugate());
  }

  // Receive layers: symmetric, through rbar_r.
  const CMat s2r = w.s * w.s;
  const CMat u_r = w.rrd * s2r;
  const CMat v_r = w.rrd * (w.eff.rbar_r * s2r * w.s);
  for (std::size_t k = 0; k < w.rx_prefix.size(); ++k) {
    const CVec du = sandwich_diag(w.rx_suffix[k], u_r, w.rx_prefix[k]);
    const CVec dv = sandwich_diag(w.rx_suffix[k], v_r, w.rx_prefix[k]);
    CVec dvar(du.size());
    for (Eigen::Index i = 0; i < du.size(); ++i) {
      const cplx t_rc = am * du[i];
      const cplx dy = t_rc / denom;
      const cplx dx = -gt * dy;
      const cplx dgamma = 2.0 * am * dv[i] - 2.0 * am * w.tr_tr3 * dx;
      const cplx dgamma_t = -2.0 * am * w.tr_tt3 * dy;
      dvar[i] = (gt * dgamma + g * dgamma_t) / denom;
    }
    out.d_psi.push_back(dvar.conjugate());
  }
  return out;
}

PhaseGradient grad_outage(const GradientWorkspace& w, double rate) {
  if (w.variance <= 0.0) {
    throw InvalidInputError("grad_outage: variance must be > 0");
  }
  const PhaseGradient gc = grad_mean_mi(w);
  const PhaseGradient gv = grad_variance(w);
  const double v = w.variance;
  const double wreg = (rate - w.mean_mi) / std::sqrt(v);
  const double pdf = normal_pdf(wreg);
  const double coef_c = -pdf / std::sqrt(v);
  const double coef_v = -pdf * 0.5 * (rate - w.mean_mi) / (v * std::sqrt(v));

  PhaseGradient out;
  for (std::size_t l = 0; l < gc.d_phi.size(); ++l) {
    out.d_phi.push_back(coef_c * gc.d_phi[l] + coef_v * gv.d_phi[l]);
  }
  for (std::size_t k = 0; k < gc.d_psi.size(); ++k) {
    out.d_psi.push_back(coef_c * gc.d_psi[k] + coef_v * gv.d_psi[k]);
  }
  return out;
}

PhaseGradient finite_difference_gradient(const PhaseObjective& objective,
                                         const SimStack& tx,
                                         const SimStack& rx, double step) {
  if (step <= 0.0) {
    throw InvalidInputError("finite_difference_gradient: step must be > 0");
  }
  PhaseGradient g;
  SimStack tx_pert = tx;
  SimStack rx_pert = rx;

  const auto central = [&](RVec& th, Eigen::Index i) {
    const double orig = th[i];
    th[i] = orig + step;
    const double fp = objective(tx_pert, rx_pert);
    th[i] = orig - step;
    const double fm = objective(tx_pert, rx_pert);
    th[i] = orig;
    return (fp - fm) / (2.0 * step);
  };

  for (std::size_t l = 0; l < tx.phases.size(); ++l) {
    RVec& th = tx_pert.phases[l];
    CVec z(th.size());
    for (Eigen::Index i = 0; i < th.size(); ++i) {
      const double dth = central(th, i);
      // Tangential representative: reproduces dF/dtheta under
      // dF/dtheta = 2 Im(z e^{-j theta}).
      z[i] = 0.5 * dth * cplx(0.0, 1.0) * std::polar(1.0, th[i]);
    }
    g.d_phi.push_back(z);
  }
  for (std::size_t k = 0; k < rx.phases.size(); ++k) {
    RVec& th = rx_pert.phases[k];
    CVec z(th.size());
    for (Eigen::Index i = 0; i < th.size(); ++i) {
      const double dth = central(th, i);
      z[i] = 0.5 * dth * cplx(0.0, 1.0) * std::polar(1.0, th[i]);
    }
    g.d_psi.push_back(z);
  }
  return g;
}

namespace {

std::vector<RVec> angle_view(const std::vector<CVec>& zs,
                             const std::vector<RVec>& phases) {
  if (zs.size() != phases.size()) {
    throw InvalidInputError("angle_derivatives: layer count mismatch");
  }
  std::vector<RVec> out;
  out.reserve(zs.size());
  for (std::size_t l = 0; l < zs.size(); ++l) {
    if (zs[l].size() != phases[l].size()) {
      throw InvalidInputError("angle_derivatives: component count mismatch");
    }
    RVec d(zs[l].size());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      d[i] = 2.0 * (zs[l][i] * std::polar(1.0, -phases[l][i])).imag();
    }
    out.push_back(d);
  }
  return out;
}

}  // namespace

std::vector<RVec> angle_derivatives_tx(const PhaseGradient& g,
                                       const SimStack& tx) {
  return angle_view(g.d_phi, tx.phases);
}

std::vector<RVec> angle_derivatives_rx(const PhaseGradient& g,
                                       const SimStack& rx) {
  return angle_view(g.d_psi, rx.phases);
}

double max_relative_angle_error(const PhaseGradient& analytic,
                                const PhaseGradient& numeric,
                                const SimStack& tx, const SimStack& rx,
                                double abs_floor) {
  const auto a_tx = angle_derivatives_tx(analytic, tx);
  const auto n_tx = angle_derivatives_tx(numeric, tx);
  const auto a_rx = angle_derivatives_rx(analytic, rx);
  const auto n_rx = angle_derivatives_rx(numeric, rx);

  double worst = 0.0;
  const auto scan = [&](const std::vector<RVec>& a,
                        const std::vector<RVec>& n) {
    for (std::size_t l = 0; l < a.size(); ++l) {
      for (Eigen::Index i = 0; i < a[l].size(); ++i) {
        const double denom = std::max(std::abs(n[l][i]), abs_floor);
        worst = std::max(worst, std::abs(a[l][i] - n[l][i]) / denom);
      }
    }
  };
  scan(a_tx, n_tx);
  scan(a_rx, n_rx);
  return worst;
}

}  // namespace simmimo
