#pragma once

#include "simmimo/gradients.hpp"
#include "simmimo/types.hpp"

namespace simmimo {

struct OptimizerConfig {
  double step_tx = 0.01;
  double step_rx = 0.01;
  int max_iter = 100;
  double tol = 1e-5;  // stop when |objective change| drops below this
  enum class Objective { outage, mean_mi } objective = Objective::outage;
  enum class Mode { joint, alternating } mode = Mode::joint;
  double rate = 0.0;        // outage threshold, same log base as mean MI
  bool backtracking = false;
  int ao_inner_steps = 10;  // gradient steps per side per alternating round
};

struct OptimizationTrace {
  std::vector<double> objective;  // objective[0] = initial value
  std::vector<double> grad_norm;
  std::vector<double> wall_time_s;  // diagnostics only, not reproducible
  SimStack final_tx;
  SimStack final_rx;
  std::string termination;
  int iterations = 0;
};

// Each entry mapped to its phase factor e^{j*arg}; near-zero entries
// (|v| < 1e-15) have no defined angle and map to 1.
CVec project_unit_modulus(const CVec& v);

// Objective value at the given phases: outage mode returns P_out(rate) in
// [0, 1]; mean-MI mode returns the mean mutual information in nats.
double evaluate_objective(const SimStack& tx, const SimStack& rx,
                          const ChannelStatistics& stats,
                          const OptimizerConfig& cfg, double rho);

// Projected gradient method over all phases. Joint mode updates both stacks
// every iteration (descent on outage, ascent on mean MI); alternating mode
// cycles ao_inner_steps on the transmit side then ao_inner_steps on the
// receive side, with the stopping test applied at round boundaries. Each side
// update counts as one iteration in the trace.
OptimizationTrace optimize(SimStack tx, SimStack rx,
                           const ChannelStatistics& stats,
                           const OptimizerConfig& cfg, double rho);

// Iterations needed to first come within `fraction` of the trace's final
// objective (absolute tolerance guards near-zero finals); the Fig.-style
// convergence-speed metric.
int iterations_to_within(const OptimizationTrace& trace, double fraction);

}  // namespace simmimo
