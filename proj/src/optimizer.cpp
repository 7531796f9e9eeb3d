#include "simmimo/optimizer.hpp"

#include <chrono>
#include <cmath>

#include "simmimo/channel.hpp"
#include "simmimo/det_equiv.hpp"
#include "simmimo/fluctuations.hpp"

namespace simmimo {

namespace {

constexpr double kTwoPi = 6.283185307179586477;

double wrap_angle(double th) {
  th = std::fmod(th, kTwoPi);
  if (th < 0.0) th += kTwoPi;
  return th;
}

// One projected step on a single layer's phases. `direction` is +1 for
// ascent, -1 for descent; `grad` is the conjugate-phase gradient.
void apply_step(RVec& th, const CVec& grad, double mu, double direction) {
  CVec v(th.size());
  for (Eigen::Index i = 0; i < th.size(); ++i) {
    v[i] = std::polar(1.0, th[i]) + direction * mu * grad[i];
  }
  const CVec z = project_unit_modulus(v);
  for (Eigen::Index i = 0; i < th.size(); ++i) {
    th[i] = wrap_angle(std::arg(z[i]));
  }
}

double gradient_norm(const PhaseGradient& g) {
  double s = 0.0;
  for (const auto& v : g.d_phi) s += v.squaredNorm();
  for (const auto& v : g.d_psi) s += v.squaredNorm();
  return std::sqrt(s);
}

}  // namespace

CVec project_unit_modulus(const CVec& v) {
  CVec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v[i]);
    out[i] = mag < 1e-15 ? cplx(1.0, 0.0) : v[i] / mag;
  }
  return out;
}

double evaluate_objective(const SimStack& tx, const SimStack& rx,
                          const ChannelStatistics& stats,
                          const OptimizerConfig& cfg, double rho) {
  const CMat p = compose_sim(tx);
  const CMat d = compose_sim(rx);
  const EffectiveCorrelations eff = effective_correlations(p, d, stats);
  const int n_t = eff.n_t();
  const int n_r = eff.n_r();
  if (cfg.objective == OptimizerConfig::Objective::mean_mi) {
    return solve_fixed_point(eff, rho, n_t, n_r).mean_mi;
  }
  const DetEquilibrium eq = solve_fixed_point(eff, rho, n_t, n_r);
  const FluctuationSolution fl = solve_variance_fixed_point(eff, rho, n_t);
  return outage_probability(cfg.rate, eq.mean_mi, fl.variance);
}

OptimizationTrace optimize(SimStack tx, SimStack rx,
                           const ChannelStatistics& stats,
                           const OptimizerConfig& cfg, double rho) {
  if (cfg.max_iter < 1) {
    throw InvalidInputError("optimize: max_iter must be >= 1");
  }
  if (cfg.step_tx <= 0.0 || cfg.step_rx <= 0.0) {
    throw InvalidInputError("optimize: step sizes must be > 0");
  }
  if (cfg.mode == OptimizerConfig::Mode::alternating && cfg.ao_inner_steps < 1) {
    throw InvalidInputError("optimize: ao_inner_steps must be >= 1");
  }
  const bool outage = cfg.objective == OptimizerConfig::Objective::outage;
  const double direction = outage ? -1.0 : 1.0;

  OptimizationTrace trace;
  trace.objective.push_back(evaluate_objective(tx, rx, stats, cfg, rho));

  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  const auto compute_gradient = [&](PhaseGradient& g) {
    const GradientWorkspace w = make_workspace(tx, rx, stats, rho);
    g = outage ? grad_outage(w, cfg.rate) : grad_mean_mi(w);
  };

  // Applies one gradient step to the selected sides, with optional halving
  // retries when a descent step overshoots. Returns the new objective.
  const auto step_once = [&](bool update_tx, bool update_rx, double prev_obj) {
    PhaseGradient g;
    compute_gradient(g);
    trace.grad_norm.push_back(gradient_norm(g));

    const SimStack tx_before = tx;
    const SimStack rx_before = rx;
    double mu_scale = 1.0;
    for (int attempt = 0;; ++attempt) {
      if (update_tx) {
        for (std::size_t l = 0; l < tx.phases.size(); ++l) {
          apply_step(tx.phases[l], g.d_phi[l], mu_scale * cfg.step_tx,
                     direction);
        }
      }
      if (update_rx) {
        for (std::size_t k = 0; k < rx.phases.size(); ++k) {
          apply_step(rx.phases[k], g.d_psi[k], mu_scale * cfg.step_rx,
                     direction);
        }
      }
      const double obj = evaluate_objective(tx, rx, stats, cfg, rho);
      const bool worse = outage ? obj > prev_obj : obj < prev_obj;
      if (!cfg.backtracking || !worse || attempt >= 10) return obj;
      tx = tx_before;
      rx = rx_before;
      mu_scale *= 0.5;
    }
  };

  int iter = 0;
  std::string termination = "max-iterations";

  if (cfg.mode == OptimizerConfig::Mode::joint) {
    while (iter < cfg.max_iter) {
      const double prev = trace.objective.back();
      const double obj = step_once(true, true, prev);
      ++iter;
      trace.objective.push_back(obj);
      trace.wall_time_s.push_back(elapsed());
      if (!std::isfinite(obj)) {
        termination = "non-finite-objective";
        break;
      }
      if (std::abs(obj - prev) < cfg.tol) {
        termination = "objective-change-below-tol";
        break;
      }
    }
  } else {
    // Alternating: fixed blocks of inner steps per side; the objective-change
    // stopping test runs at round boundaries only, so a side switch cannot
    // trigger a spurious stop mid-cycle.
    bool stop = false;
    double round_prev = trace.objective.back();
    while (!stop && iter < cfg.max_iter) {
      for (const bool tx_turn : {true, false}) {
        for (int i = 0; i < cfg.ao_inner_steps && iter < cfg.max_iter; ++i) {
          const double prev = trace.objective.back();
          const double obj = step_once(tx_turn, !tx_turn, prev);
          ++iter;
          trace.objective.push_back(obj);
          trace.wall_time_s.push_back(elapsed());
          if (!std::isfinite(obj)) {
            termination = "non-finite-objective";
            stop = true;
            break;
          }
        }
        if (stop) break;
      }
      if (stop) break;
      const double round_obj = trace.objective.back();
      if (std::abs(round_obj - round_prev) < cfg.tol) {
        termination = "objective-change-below-tol";
        stop = true;
      }
      round_prev = round_obj;
    }
  }

  trace.iterations = iter;
  trace.termination = termination;
  trace.final_tx = std::move(tx);
  trace.final_rx = std::move(rx);
  return trace;
}

int iterations_to_within(const OptimizationTrace& trace, double fraction) {
  if (trace.objective.empty()) return 0;
  const double final_obj = trace.objective.back();
  const double tol = fraction * std::max(std::abs(final_obj), 1e-12);
  for (std::size_t i = 0; i < trace.objective.size(); ++i) {
    if (std::abs(trace.objective[i] - final_obj) <= tol) {
      return static_cast<int>(i);
    }
  }
  return static_cast<int>(trace.objective.size() - 1);
}

}  // namespace simmimo
