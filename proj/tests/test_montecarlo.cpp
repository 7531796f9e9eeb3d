#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "simmimo/channel.hpp"
#include "simmimo/det_equiv.hpp"
#include "simmimo/fluctuations.hpp"
#include "simmimo/linalg.hpp"
#include "simmimo/montecarlo.hpp"
#include "simmimo/rng.hpp"

using namespace simmimo;

namespace {

struct Instance {
  SimStack tx;
  SimStack rx;
  ChannelStatistics stats;
};

Instance make_instance(std::uint64_t seed, int n_t = 3, int n_r = 3, int m = 8,
                       int n = 8, double beta = 1.5) {
  SplitMix64 rng(seed);
  Instance in;
  in.tx = random_synthetic_stack(SimSide::transmit, 2, m, n_t, rng);
  in.rx = random_synthetic_stack(SimSide::receive, 2, n, n_r, rng);
  in.stats.r_t = exponential_correlation(m, 0.4);
  in.stats.r_r = exponential_correlation(n, 0.5);
  in.stats.beta = beta;
  in.stats.n_t = n_t;
  in.stats.n_r = n_r;
  return in;
}

}  // namespace

TEST_CASE("per-sample information for hand-checkable channels") {
  // H = I_2, rho = 3: log det(I + 3*I) = 2*log(4).
  const CMat h = CMat::Identity(2, 2);
  CHECK(mi_sample(h, 3.0) == doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-14));
  CHECK(mi_sample(h, 0.0) == 0.0);
  // Rank-one channel: log(1 + rho*||h||^2).
  CMat v(2, 1);
  v << cplx(0.6, 0.0), cplx(0.0, 0.8);
  CHECK(mi_sample(v, 5.0) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
  CHECK_THROWS_AS((void)mi_sample(h, -1.0), InvalidInputError);
}

TEST_CASE("estimation is deterministic in the seed") {
  const Instance in = make_instance(901);
  const McEstimate a = estimate(in.tx, in.rx, in.stats, 2.0, {1.0}, 500, 42, 1);
  const McEstimate b = estimate(in.tx, in.rx, in.stats, 2.0, {1.0}, 500, 42, 1);
  CHECK(a.mean == b.mean);
  CHECK(a.variance == b.variance);
  REQUIRE(a.samples.size() == 500);
  for (std::size_t i = 0; i < 500; ++i) CHECK(a.samples[i] == b.samples[i]);
  const McEstimate c = estimate(in.tx, in.rx, in.stats, 2.0, {1.0}, 500, 43, 1);
  CHECK(c.mean != a.mean);
}

TEST_CASE("thread count never changes the result") {
  const Instance in = make_instance(902);
  const McEstimate s1 = estimate(in.tx, in.rx, in.stats, 3.0, {2.0, 3.0}, 800,
                                 1234, 1);
  for (int threads : {2, 4, 7}) {
    const McEstimate sn = estimate(in.tx, in.rx, in.stats, 3.0, {2.0, 3.0},
                                   800, 1234, threads);
    CHECK(sn.mean == s1.mean);
    CHECK(sn.variance == s1.variance);
    CHECK(sn.std_error_mean == s1.std_error_mean);
    for (std::size_t i = 0; i < 800; ++i) CHECK(sn.samples[i] == s1.samples[i]);
    for (const auto& [rate, p] : s1.outage_by_rate) {
      CHECK(sn.outage_by_rate.at(rate) == p);
    }
  }
}

TEST_CASE("sample statistics define the reported summaries") {
  const Instance in = make_instance(903);
  const McEstimate mc =
      estimate(in.tx, in.rx, in.stats, 2.0, {0.5, 50.0}, 400, 7, 2);
  double mean = 0.0;
  for (double s : mc.samples) mean += s;
  mean /= 400.0;
  double var = 0.0;
  for (double s : mc.samples) var += (s - mean) * (s - mean);
  var /= 399.0;  // unbiased
  CHECK(mc.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(mc.variance == doctest::Approx(var).epsilon(1e-12));
  CHECK(mc.std_error_mean ==
        doctest::Approx(std::sqrt(var / 400.0)).epsilon(1e-12));
  CHECK(mc.n_trials == 400);
  CHECK(mc.seed == 7);
  // Empirical outage = fraction of samples strictly below the rate.
  const double lo = mc.outage_by_rate.at(0.5);
  const std::size_t below = static_cast<std::size_t>(
      std::count_if(mc.samples.begin(), mc.samples.end(),
                    [](double s) { return s < 0.5; }));
  CHECK(lo == doctest::Approx(static_cast<double>(below) / 400.0));
  CHECK(mc.outage_by_rate.at(50.0) == 1.0);  // unreachable rate
}

TEST_CASE("KS distance separates normal from shifted samples") {
  SplitMix64 rng(904);
  std::vector<double> samples(4000);
  for (auto& s : samples) {
    const cplx z = rng.complex_normal();  // Re/Im are N(0, 1/2)
    s = 3.0 + 2.0 * z.real() * std::sqrt(2.0);
  }
  CHECK(ks_distance_normal(samples, 3.0, 4.0) < 0.03);
  CHECK(ks_distance_normal(samples, 3.8, 4.0) > 0.1);
  CHECK(ks_distance_normal(samples, 3.0, 16.0) > 0.05);
}

TEST_CASE("comparison verdicts react to corrupted theory values") {
  const Instance in = make_instance(905, 4, 4, 12, 12, 0.5);
  const double rho = 3.0;
  const EffectiveCorrelations eff =
      effective_correlations(compose_sim(in.tx), compose_sim(in.rx), in.stats);
  const DetEquilibrium eq = solve_fixed_point(eff, rho, 4, 4);
  const FluctuationSolution fl = solve_variance_fixed_point(eff, rho, 4);
  std::vector<double> rates;
  for (int i = -2; i <= 2; ++i) {
    rates.push_back(eq.mean_mi + 0.6 * i * std::sqrt(fl.variance));
  }
  const McEstimate mc =
      estimate(in.tx, in.rx, in.stats, rho, rates, 6000, 4242, 2);
  std::vector<double> theory;
  for (double r : rates) {
    theory.push_back(outage_probability(r, eq.mean_mi, fl.variance));
  }
  const TheoryComparison good =
      compare_with_theory(mc, eq.mean_mi, fl.variance, theory);
  CHECK(good.mean_ok);
  CHECK(good.variance_ok);
  CHECK(good.outage_ok);
  CHECK(good.ks_ok);
  CHECK(good.all_ok());

  const TheoryComparison bad_mean =
      compare_with_theory(mc, eq.mean_mi * 1.05, fl.variance, theory);
  CHECK_FALSE(bad_mean.mean_ok);
  const TheoryComparison bad_var =
      compare_with_theory(mc, eq.mean_mi, fl.variance * 1.3, theory);
  CHECK_FALSE(bad_var.variance_ok);
  CHECK_FALSE(bad_var.all_ok());
  std::vector<double> shifted = theory;
  for (auto& p : shifted) p = std::min(1.0, p + 0.08);
  const TheoryComparison bad_out =
      compare_with_theory(mc, eq.mean_mi, fl.variance, shifted);
  CHECK_FALSE(bad_out.outage_ok);
}

TEST_CASE("estimation validates its inputs") {
  const Instance in = make_instance(906);
  CHECK_THROWS_AS(
      (void)estimate(in.tx, in.rx, in.stats, 1.0, {}, 0, 1, 1),
      InvalidInputError);
  Instance broken = make_instance(907);
  broken.stats.r_t = exponential_correlation(9, 0.4);  // wrong aperture dim
  CHECK_THROWS_AS(
      (void)estimate(broken.tx, broken.rx, broken.stats, 1.0, {}, 10, 1, 1),
      InvalidInputError);
}
