#include <cmath>

#include "doctest.h"
#include "simmimo/channel.hpp"
#include "simmimo/det_equiv.hpp"
#include "simmimo/fluctuations.hpp"
#include "simmimo/linalg.hpp"
#include "simmimo/rng.hpp"

using namespace simmimo;

namespace {

EffectiveCorrelations identity_eff(int n_t, int n_r, int m) {
  EffectiveCorrelations eff;
  eff.rbar_t = CMat::Identity(n_t, n_t);
  eff.rbar_r = CMat::Identity(n_r, n_r);
  eff.m = m;
  eff.n = m;
  eff.beta = 1.0;
  return eff;
}

EffectiveCorrelations random_eff(std::uint64_t seed, int n_t, int n_r, int m,
                                 int n, double decay, double beta) {
  SplitMix64 rng(seed);
  SimStack tx = random_synthetic_stack(SimSide::transmit, 2, m, n_t, rng);
  SimStack rx = random_synthetic_stack(SimSide::receive, 2, n, n_r, rng);
  ChannelStatistics st;
  st.r_t = exponential_correlation(m, decay);
  st.r_r = exponential_correlation(n, decay);
  st.beta = beta;
  st.n_t = n_t;
  st.n_r = n_r;
  return effective_correlations(compose_sim(tx), compose_sim(rx), st);
}

}  // namespace

TEST_CASE("variance at the symmetric identity point: frozen values") {
  // All dimensions equal with identity correlations: the quadratic root
  // x = (sqrt(5)-1)/2 gives gamma = rho/(1+x)^2 by direct substitution.
  const EffectiveCorrelations eff = identity_eff(4, 4, 4);
  const FluctuationSolution fl = solve_variance_fixed_point(eff, 1.0, 4, 1e-12);
  const double x = 0.61803398874989485;
  const double gamma = 1.0 / ((1.0 + x) * (1.0 + x));
  CHECK(gamma == doctest::Approx(0.38196601125010515).epsilon(1e-14));
  CHECK(fl.gamma == doctest::Approx(gamma).epsilon(1e-10));
  CHECK(fl.gamma_tilde == doctest::Approx(gamma).epsilon(1e-10));
  CHECK(fl.variance ==
        doctest::Approx(-std::log1p(-gamma * gamma)).epsilon(1e-10));
  // Reciprocal coupling of the two scalars at this point: f*(1 + rho*f~) = 1.
  CHECK(fl.f * (1.0 + 1.0 * fl.f_tilde) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("second-order resolvents reuse the mean fixed point") {
  const EffectiveCorrelations eff = random_eff(601, 4, 5, 12, 10, 0.5, 1.4);
  for (double rho : {0.3, 2.0, 25.0}) {
    const DetEquilibrium eq = solve_fixed_point(eff, rho, 4, 5, 1e-12, 2000);
    const FluctuationSolution fl =
        solve_variance_fixed_point(eff, rho, 4, 1e-12, 2000);
    CHECK(std::abs(rho * fl.f_tilde - eq.delta) <= 1e-9);
    CHECK(std::abs(rho * fl.f - (5.0 / 4.0) * eq.e) <= 1e-9);
    CHECK((fl.s - eq.s).norm() <= 1e-8);
    CHECK((fl.s_tilde - eq.s_tilde).norm() <= 1e-8);
    CHECK(fl.gamma > 0.0);
    CHECK(fl.gamma_tilde > 0.0);
    CHECK(fl.gamma * fl.gamma_tilde < 1.0);
    CHECK(fl.variance > 0.0);
  }
}

TEST_CASE("low-power limit of the variance") {
  // As rho -> 0 the resolvents tend to identity, so
  // variance ~ (rho*beta/m)^2 * tr(rbar_t^2) * tr(rbar_r^2).
  const EffectiveCorrelations eff = random_eff(602, 4, 4, 10, 10, 0.4, 2.0);
  const double rho = 1e-4;
  const FluctuationSolution fl = solve_variance_fixed_point(eff, rho, 4, 1e-14);
  const double a_over_m = rho * eff.beta / eff.m;
  const double predict = a_over_m * a_over_m *
                         (eff.rbar_t * eff.rbar_t).trace().real() *
                         (eff.rbar_r * eff.rbar_r).trace().real();
  CHECK(fl.variance == doctest::Approx(predict).epsilon(1e-2));
}

TEST_CASE("variance is increasing in the SNR on a well-behaved instance") {
  const EffectiveCorrelations eff = random_eff(603, 4, 4, 12, 12, 0.3, 1.0);
  double prev = 0.0;
  for (double rho : {0.01, 0.1, 1.0, 10.0}) {
    const double v = solve_variance_fixed_point(eff, rho, 4).variance;
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("zero power short-circuits the variance") {
  const EffectiveCorrelations eff = random_eff(604, 3, 4, 8, 9, 0.2, 0.9);
  const FluctuationSolution fl = solve_variance_fixed_point(eff, 0.0, 3);
  CHECK(fl.variance == 0.0);
  CHECK(fl.f == 0.0);
  CHECK(fl.f_tilde == 0.0);
}

TEST_CASE("variance solver enforces its iteration budget") {
  const EffectiveCorrelations eff = random_eff(605, 4, 4, 10, 10, 0.3, 1.0);
  CHECK_THROWS_AS(
      (void)solve_variance_fixed_point(eff, 5.0, 4, 1e-14, 1),
      ConvergenceError);
}

TEST_CASE("outage probability anchors on the normal quantiles") {
  const double mean = 3.7, var = 0.25;
  CHECK(outage_probability(mean, mean, var) == 0.5);
  CHECK(outage_probability(mean + 3.0 * 0.5, mean, var) ==
        doctest::Approx(0.9986501019683699).epsilon(1e-14));
  CHECK(outage_probability(mean - 2.0 * 0.5, mean, var) ==
        doctest::Approx(0.022750131948179195).epsilon(1e-13));
}

TEST_CASE("outage and CLT statistic reject non-positive variance") {
  CHECK_THROWS_AS((void)outage_probability(1.0, 2.0, -0.1), InvalidInputError);
  CHECK_THROWS_AS((void)outage_probability(1.0, 2.0, 0.0), InvalidInputError);
  CHECK_THROWS_AS((void)clt_statistic(1.0, 2.0, 0.0), InvalidInputError);
  CHECK(clt_statistic(2.5, 2.0, 0.25) == doctest::Approx(1.0).epsilon(1e-15));
}
