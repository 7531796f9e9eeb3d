#include <cmath>

#include "doctest.h"
#include "simmimo/channel.hpp"
#include "simmimo/det_equiv.hpp"
#include "simmimo/fluctuations.hpp"
#include "simmimo/optimizer.hpp"
#include "simmimo/rng.hpp"

using namespace simmimo;

namespace {

struct Instance {
  SimStack tx;
  SimStack rx;
  ChannelStatistics stats;
};

Instance make_instance(std::uint64_t seed, int n_t = 3, int n_r = 3, int m = 8,
                       int n = 8) {
  SplitMix64 rng(seed);
  Instance in;
  in.tx = random_synthetic_stack(SimSide::transmit, 2, m, n_t, rng);
  in.rx = random_synthetic_stack(SimSide::receive, 2, n, n_r, rng);
  in.stats.r_t = exponential_correlation(m, 0.5);
  in.stats.r_r = exponential_correlation(n, 0.4);
  in.stats.beta = 1.0;
  in.stats.n_t = n_t;
  in.stats.n_r = n_r;
  return in;
}

double mean_mi_of(const Instance& in, const SimStack& tx, const SimStack& rx,
                  double rho) {
  const EffectiveCorrelations eff =
      effective_correlations(compose_sim(tx), compose_sim(rx), in.stats);
  return solve_fixed_point(eff, rho, in.stats.n_t, in.stats.n_r).mean_mi;
}

bool traces_equal(const OptimizationTrace& a, const OptimizationTrace& b) {
  if (a.objective.size() != b.objective.size()) return false;
  for (std::size_t i = 0; i < a.objective.size(); ++i) {
    if (a.objective[i] != b.objective[i]) return false;
  }
  for (std::size_t l = 0; l < a.final_tx.phases.size(); ++l) {
    if ((a.final_tx.phases[l] - b.final_tx.phases[l]).norm() != 0.0)
      return false;
  }
  return a.iterations == b.iterations && a.termination == b.termination;
}

}  // namespace

TEST_CASE("unit-modulus projection") {
  CVec v(4);
  v << cplx(3.0, 4.0), cplx(0.0, -2.0), cplx(1e-20, 0.0), cplx(-0.5, 0.0);
  const CVec p = project_unit_modulus(v);
  CHECK(std::abs(p[0] - cplx(0.6, 0.8)) < 1e-15);
  CHECK(std::abs(p[1] - cplx(0.0, -1.0)) < 1e-15);
  CHECK(p[2] == cplx(1.0, 0.0));  // near-zero input has no angle
  CHECK(std::abs(p[3] - cplx(-1.0, 0.0)) < 1e-15);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(std::abs(p[i]) - 1.0) < 1e-15);
}

TEST_CASE("objective evaluation matches the solvers directly") {
  const Instance in = make_instance(801);
  const double rho = 4.0;
  OptimizerConfig cfg;
  cfg.objective = OptimizerConfig::Objective::mean_mi;
  CHECK(evaluate_objective(in.tx, in.rx, in.stats, cfg, rho) ==
        doctest::Approx(mean_mi_of(in, in.tx, in.rx, rho)).epsilon(1e-12));

  const EffectiveCorrelations eff =
      effective_correlations(compose_sim(in.tx), compose_sim(in.rx), in.stats);
  const double mi = solve_fixed_point(eff, rho, 3, 3).mean_mi;
  const double v = solve_variance_fixed_point(eff, rho, 3).variance;
  cfg.objective = OptimizerConfig::Objective::outage;
  cfg.rate = mi - 0.5 * std::sqrt(v);
  CHECK(evaluate_objective(in.tx, in.rx, in.stats, cfg, rho) ==
        doctest::Approx(outage_probability(cfg.rate, mi, v)).epsilon(1e-12));
}

TEST_CASE("gradient ascent increases the mean information") {
  const Instance in = make_instance(802);
  const double rho = 4.0;
  OptimizerConfig cfg;
  cfg.objective = OptimizerConfig::Objective::mean_mi;
  cfg.max_iter = 30;
  cfg.tol = 0.0;  // run the full budget
  const OptimizationTrace tr = optimize(in.tx, in.rx, in.stats, cfg, rho);
  REQUIRE(tr.objective.size() == static_cast<std::size_t>(tr.iterations) + 1);
  CHECK(tr.objective.back() > tr.objective.front());
  // The final stacks actually realize the final objective.
  CHECK(mean_mi_of(in, tr.final_tx, tr.final_rx, rho) ==
        doctest::Approx(tr.objective.back()).epsilon(1e-12));
  // Small fixed steps on a smooth landscape: every step improves.
  for (std::size_t i = 1; i < tr.objective.size(); ++i) {
    CHECK(tr.objective[i] >= tr.objective[i - 1] - 1e-9);
  }
}

TEST_CASE("gradient descent decreases the outage probability") {
  const Instance in = make_instance(803);
  const double rho = 4.0;
  const EffectiveCorrelations eff =
      effective_correlations(compose_sim(in.tx), compose_sim(in.rx), in.stats);
  const double mi = solve_fixed_point(eff, rho, 3, 3).mean_mi;
  const double v = solve_variance_fixed_point(eff, rho, 3).variance;
  OptimizerConfig cfg;
  cfg.objective = OptimizerConfig::Objective::outage;
  cfg.rate = mi - 0.5 * std::sqrt(v);
  cfg.max_iter = 30;
  cfg.tol = 0.0;
  const OptimizationTrace tr = optimize(in.tx, in.rx, in.stats, cfg, rho);
  CHECK(tr.objective.back() < tr.objective.front());
  CHECK(tr.objective.front() > 0.0);
  CHECK(tr.objective.back() > 0.0);
}

TEST_CASE("alternating mode improves and counts side updates") {
  const Instance in = make_instance(804);
  const double rho = 4.0;
  OptimizerConfig cfg;
  cfg.objective = OptimizerConfig::Objective::mean_mi;
  cfg.mode = OptimizerConfig::Mode::alternating;
  cfg.ao_inner_steps = 5;
  cfg.max_iter = 20;  // exactly two full rounds
  cfg.tol = 0.0;
  const OptimizationTrace tr = optimize(in.tx, in.rx, in.stats, cfg, rho);
  CHECK(tr.iterations == 20);
  CHECK(tr.objective.size() == 21);
  CHECK(tr.objective.back() > tr.objective.front());
}

TEST_CASE("optimization is deterministic") {
  const Instance in = make_instance(805);
  OptimizerConfig cfg;
  cfg.objective = OptimizerConfig::Objective::mean_mi;
  cfg.max_iter = 10;
  const OptimizationTrace a = optimize(in.tx, in.rx, in.stats, cfg, 2.0);
  const OptimizationTrace b = optimize(in.tx, in.rx, in.stats, cfg, 2.0);
  CHECK(traces_equal(a, b));
}

TEST_CASE("termination reasons") {
  const Instance in = make_instance(806);
  OptimizerConfig cfg;
  cfg.objective = OptimizerConfig::Objective::mean_mi;
  cfg.max_iter = 3;
  cfg.tol = 0.0;
  OptimizationTrace tr = optimize(in.tx, in.rx, in.stats, cfg, 2.0);
  CHECK(tr.termination == "max-iterations");
  CHECK(tr.iterations == 3);

  cfg.max_iter = 500;
  cfg.tol = 0.02;  // coarse tolerance trips long before the budget
  tr = optimize(in.tx, in.rx, in.stats, cfg, 2.0);
  CHECK(tr.termination == "objective-change-below-tol");
  CHECK(tr.iterations < 500);
}

TEST_CASE("backtracking never accepts a worsening step") {
  const Instance in = make_instance(807);
  OptimizerConfig cfg;
  cfg.objective = OptimizerConfig::Objective::mean_mi;
  cfg.step_tx = 0.8;  // deliberately too large without a line search
  cfg.step_rx = 0.8;
  cfg.backtracking = true;
  cfg.max_iter = 15;
  cfg.tol = 0.0;
  const OptimizationTrace tr = optimize(in.tx, in.rx, in.stats, cfg, 4.0);
  for (std::size_t i = 1; i < tr.objective.size(); ++i) {
    CHECK(tr.objective[i] >= tr.objective[i - 1] - 1e-12);
  }
}

TEST_CASE("iterations_to_within on a handcrafted trace") {
  OptimizationTrace tr;
  tr.objective = {10.0, 6.0, 4.2, 4.03, 4.001, 4.0};
  tr.iterations = 5;
  CHECK(iterations_to_within(tr, 0.01) == 3);   // 4.03 is within 1% of 4.0
  CHECK(iterations_to_within(tr, 0.10) == 2);   // 4.2 is within 10%
  CHECK(iterations_to_within(tr, 1e-9) == 5);
  CHECK(iterations_to_within(tr, 10.0) == 0);
}

TEST_CASE("invalid optimizer configuration is rejected") {
  const Instance in = make_instance(808);
  OptimizerConfig cfg;
  cfg.max_iter = 0;
  CHECK_THROWS_AS((void)optimize(in.tx, in.rx, in.stats, cfg, 1.0),
                  InvalidInputError);
  cfg.max_iter = 10;
  cfg.mode = OptimizerConfig::Mode::alternating;
  cfg.ao_inner_steps = 0;
  CHECK_THROWS_AS((void)optimize(in.tx, in.rx, in.stats, cfg, 1.0),
                  InvalidInputError);
}
