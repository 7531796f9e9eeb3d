#include <cmath>

#include "doctest.h"
#include "simmimo/channel.hpp"
#include "simmimo/det_equiv.hpp"
#include "simmimo/linalg.hpp"
#include "simmimo/montecarlo.hpp"
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
                                 int n, double decay_t, double decay_r,
                                 double beta, SimStack* tx_out = nullptr,
                                 SimStack* rx_out = nullptr,
                                 ChannelStatistics* stats_out = nullptr) {
  SplitMix64 rng(seed);
  SimStack tx = random_synthetic_stack(SimSide::transmit, 2, m, n_t, rng);
  SimStack rx = random_synthetic_stack(SimSide::receive, 2, n, n_r, rng);
  ChannelStatistics st;
  st.r_t = exponential_correlation(m, decay_t);
  st.r_r = exponential_correlation(n, decay_r);
  st.beta = beta;
  st.n_t = n_t;
  st.n_r = n_r;
  EffectiveCorrelations eff =
      effective_correlations(compose_sim(tx), compose_sim(rx), st);
  if (tx_out) *tx_out = tx;
  if (rx_out) *rx_out = rx;
  if (stats_out) *stats_out = st;
  return eff;
}

CMat random_unitary(int n, SplitMix64& rng) {
  CMat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.complex_normal();
  Eigen::HouseholderQR<CMat> qr(g);
  return CMat(qr.householderQ());
}

}  // namespace

TEST_CASE("scalar special-case root: frozen values and quadratic residual") {
  CHECK(iid_special_delta(0.1) ==
        doctest::Approx(0.46585609973065441).epsilon(1e-14));
  CHECK(iid_special_delta(1.0) ==
        doctest::Approx(0.30277563773199465).epsilon(1e-14));
  CHECK(iid_special_delta(10.0) ==
        doctest::Approx(0.078232998312526814).epsilon(1e-14));
  for (double rho : {0.05, 0.3, 1.0, 4.0, 25.0, 200.0}) {
    const double d = iid_special_delta(rho);
    CHECK(std::abs(rho * d * d + (rho + 2.0) * d - 1.0) <= 1e-12);
    CHECK(d > 0.0);
  }
  CHECK(mean_mi_iid_special(1.0, 4, 3) ==
        doctest::Approx(2.8395555623378943).epsilon(1e-14));
  CHECK_THROWS_AS((void)iid_special_delta(-1.0), InvalidInputError);
}

TEST_CASE("identity closed form: frozen values at equal dimensions") {
  for (auto [rho, want] : {std::pair{0.1, 0.091607978309961604},
                           std::pair{1.0, 0.61803398874989485},
                           std::pair{10.0, 2.7015621187164243}}) {
    const IdentityEquilibrium eq = identity_closed_form(rho, 4, 4, 4);
    CHECK(eq.x == doctest::Approx(want).epsilon(1e-14));
    CHECK(eq.y == doctest::Approx(want).epsilon(1e-14));
  }
  const IdentityEquilibrium eq = identity_closed_form(1.0, 4, 4, 4);
  CHECK(eq.mean_mi == doctest::Approx(2.321830555476407).epsilon(1e-14));
}

TEST_CASE("identity closed form: frozen values at mixed dimensions") {
  const IdentityEquilibrium eq = identity_closed_form(2.0, 4, 6, 12);
  CHECK(eq.x == doctest::Approx(0.38742588672279311).epsilon(1e-14));
  CHECK(eq.y == doctest::Approx(0.72075922005612644).epsilon(1e-14));
  CHECK(eq.mean_mi == doctest::Approx(2.4603186235335973).epsilon(1e-14));
  // The root actually satisfies its quadratic.
  const double a_t = 2.0 * 4 / 12, a_r = 2.0 * 6 / 12;
  const double b = 1.0 + a_r - a_t;
  CHECK(std::abs(eq.x * eq.x + b * eq.x - a_t) < 1e-15);
}

TEST_CASE("iterative solver agrees with the identity closed form") {
  for (auto [n_t, n_r, m] : {std::tuple{4, 4, 4}, std::tuple{4, 6, 12},
                             std::tuple{8, 3, 16}}) {
    const EffectiveCorrelations eff = identity_eff(n_t, n_r, m);
    for (double rho : {0.1, 1.0, 10.0}) {
      const DetEquilibrium it =
          solve_fixed_point(eff, rho, n_t, n_r, 1e-12, 2000);
      const IdentityEquilibrium cf = identity_closed_form(rho, n_t, n_r, m);
      CHECK(std::abs(it.delta - cf.x) <= 1e-9);
      CHECK(std::abs((static_cast<double>(n_r) / n_t) * it.e - cf.y) <= 1e-9);
      CHECK(std::abs(it.mean_mi - cf.mean_mi) <= 1e-9);
      CHECK(it.residual <= 1e-12);
    }
  }
}

TEST_CASE("solver is independent of the starting point") {
  const EffectiveCorrelations eff =
      random_eff(501, 4, 5, 12, 10, 0.5, 0.3, 1.7);
  for (double rho : {0.2, 3.0, 40.0}) {
    const DetEquilibrium ref =
        solve_fixed_point(eff, rho, 4, 5, 1e-12, 2000, 1.0, 1.0);
    for (double init : {0.1, 10.0}) {
      const DetEquilibrium alt =
          solve_fixed_point(eff, rho, 4, 5, 1e-12, 2000, init, init);
      CHECK(std::abs(alt.e - ref.e) <= 1e-9);
      CHECK(std::abs(alt.delta - ref.delta) <= 1e-9);
      CHECK(std::abs(alt.mean_mi - ref.mean_mi) <= 1e-9);
    }
  }
}

TEST_CASE("zero power short-circuits to zero information") {
  const EffectiveCorrelations eff = random_eff(502, 3, 4, 8, 9, 0.2, 0.6, 0.9);
  const DetEquilibrium eq = solve_fixed_point(eff, 0.0, 3, 4);
  CHECK(eq.mean_mi == 0.0);
  CHECK(eq.e == 0.0);
  CHECK(eq.delta == 0.0);
  CHECK_THROWS_AS((void)solve_fixed_point(eff, -0.5, 3, 4), InvalidInputError);
}

TEST_CASE("mean information is strictly increasing in the SNR") {
  const EffectiveCorrelations eff = random_eff(503, 4, 4, 10, 10, 0.4, 0.4, 1.2);
  double prev = 0.0;
  for (double rho : {0.05, 0.2, 1.0, 5.0, 20.0, 80.0}) {
    const double mi = solve_fixed_point(eff, rho, 4, 4).mean_mi;
    CHECK(mi > prev);
    prev = mi;
  }
}

TEST_CASE("mean information only depends on effective spectra") {
  SimStack tx, rx;
  ChannelStatistics st;
  (void)random_eff(504, 5, 4, 12, 11, 0.5, 0.5, 1.0, &tx, &rx, &st);
  const CMat p = compose_sim(tx);
  const CMat d = compose_sim(rx);
  SplitMix64 rng(999);
  const CMat u = random_unitary(5, rng);
  const EffectiveCorrelations base = effective_correlations(p, d, st);
  const EffectiveCorrelations rotated = effective_correlations(p * u, d, st);
  for (double rho : {0.5, 8.0}) {
    const double a = solve_fixed_point(base, rho, 5, 4, 1e-12, 2000).mean_mi;
    const double b = solve_fixed_point(rotated, rho, 5, 4, 1e-12, 2000).mean_mi;
    CHECK(a == doctest::Approx(b).epsilon(1e-10));
  }
}

TEST_CASE("iteration budget is enforced") {
  const EffectiveCorrelations eff = random_eff(505, 4, 4, 10, 10, 0.3, 0.3, 1.0);
  CHECK_THROWS_AS((void)solve_fixed_point(eff, 5.0, 4, 4, 1e-14, 1),
                  ConvergenceError);
  try {
    (void)solve_fixed_point(eff, 5.0, 4, 4, 1e-14, 1);
  } catch (const ConvergenceError& e) {
    CHECK(e.residual > 0.0);
  }
}

TEST_CASE("mean agrees with Monte Carlo on a small synthetic instance") {
  SimStack tx, rx;
  ChannelStatistics st;
  const EffectiveCorrelations eff =
      random_eff(506, 4, 4, 16, 16, 0.5, 0.4, 2.0, &tx, &rx, &st);
  for (double rho : {0.5, 2.0}) {
    const DetEquilibrium eq = solve_fixed_point(eff, rho, 4, 4);
    const McEstimate mc = estimate(tx, rx, st, rho, {}, 4000, 31337, 1);
    CHECK(std::abs(eq.mean_mi - mc.mean) <= 5.0 * mc.std_error_mean);
  }
}

TEST_CASE("effective correlations carry shapes and gain") {
  SimStack tx, rx;
  ChannelStatistics st;
  const EffectiveCorrelations eff =
      random_eff(507, 3, 5, 8, 12, 0.2, 0.2, 3.5, &tx, &rx, &st);
  CHECK(eff.rbar_t.rows() == 3);
  CHECK(eff.rbar_r.rows() == 5);
  CHECK(eff.m == 8);
  CHECK(eff.n == 12);
  CHECK(eff.beta == 3.5);
  CHECK(eff.n_t() == 3);
  CHECK(eff.n_r() == 5);
  CHECK((eff.rbar_t - eff.rbar_t.adjoint()).norm() < 1e-14);
  CHECK((eff.rbar_r - eff.rbar_r.adjoint()).norm() < 1e-14);
  // Direct quadratic-form definition.
  const CMat p = compose_sim(tx);
  const CMat d = compose_sim(rx);
  CHECK((eff.rbar_t - hermitianize(p.adjoint() * st.r_t * p)).norm() < 1e-12);
  CHECK((eff.rbar_r - hermitianize(d * st.r_r * d.adjoint())).norm() < 1e-12);
}
