#include <cmath>

#include "doctest.h"
#include "simmimo/linalg.hpp"
#include "simmimo/rng.hpp"

using namespace simmimo;

namespace {

CMat random_hpd(int n, SplitMix64& rng, double ridge = 1.0) {
  CMat b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = rng.complex_normal();
  CMat a = b * b.adjoint();
  a += ridge * CMat::Identity(n, n);
  return a;
}

}  // namespace

TEST_CASE("hermitianize symmetrizes and preserves hermitian input") {
  SplitMix64 rng(1);
  CMat a(2, 2);
  a << cplx(1.0, 0.0), cplx(2.0, 1.0), cplx(0.0, 0.0), cplx(3.0, 0.0);
  const CMat h = hermitianize(a);
  CHECK((h - h.adjoint()).norm() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(h(0, 1) == cplx(1.0, 0.5));
  const CMat hpd = random_hpd(4, rng);
  CHECK((hermitianize(hpd) - hpd).norm() < 1e-14);
}

TEST_CASE("hermitian_sqrt squares back to the input") {
  SplitMix64 rng(2);
  const CMat a = random_hpd(6, rng);
  const CMat s = hermitian_sqrt(a);
  CHECK((s * s - a).norm() / a.norm() < 1e-12);
  CHECK((s - s.adjoint()).norm() < 1e-12);
}

TEST_CASE("hermitian_sqrt clips slightly negative eigenvalues") {
  CMat a = CMat::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -1e-12;  // inside the clip tolerance
  const CMat s = hermitian_sqrt(a);
  CHECK(std::abs(s(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(s(1, 1)) == doctest::Approx(0.0));
}

TEST_CASE("hermitian_sqrt rejects clearly indefinite input") {
  CMat a = CMat::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -0.5;
  CHECK_THROWS_AS((void)hermitian_sqrt(a), InvalidInputError);
}

TEST_CASE("logdet_hpd matches the diagonal case and a dense oracle") {
  CMat d = CMat::Zero(3, 3);
  d(0, 0) = 2.0;
  d(1, 1) = 0.5;
  d(2, 2) = 4.0;
  CHECK(logdet_hpd(d) == doctest::Approx(std::log(4.0)).epsilon(1e-13));

  SplitMix64 rng(3);
  const CMat a = random_hpd(5, rng);
  // Independent route: sum of log eigenvalues.
  Eigen::SelfAdjointEigenSolver<CMat> es(a);
  double expected = 0.0;
  for (int i = 0; i < 5; ++i) expected += std::log(es.eigenvalues()[i]);
  CHECK(logdet_hpd(a) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("logdet_hpd rejects non positive definite input") {
  CMat a = CMat::Identity(2, 2);
  a(1, 1) = -1.0;
  CHECK_THROWS_AS((void)logdet_hpd(a), NumericError);
}

TEST_CASE("inverse_hpd inverts") {
  SplitMix64 rng(4);
  const CMat a = random_hpd(5, rng);
  const CMat inv = inverse_hpd(a);
  CHECK((a * inv - CMat::Identity(5, 5)).norm() < 1e-11);
}

TEST_CASE("normal cdf and pdf reference values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(3.0) == doctest::Approx(0.9986501019683699).epsilon(1e-14));
  CHECK(normal_cdf(-3.0) ==
        doctest::Approx(1.0 - 0.9986501019683699).epsilon(1e-11));
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-14));
}

TEST_CASE("log_normal_cdf agrees with direct evaluation in the bulk") {
  for (const double z : {-1.0, -5.0, -10.0, -19.5, 0.0, 2.0}) {
    CHECK(log_normal_cdf(z) ==
          doctest::Approx(std::log(normal_cdf(z))).epsilon(1e-12));
  }
}

TEST_CASE("log_normal_cdf deep tail reference values") {
  CHECK(log_normal_cdf(-8.0) == doctest::Approx(-35.01343715991455).epsilon(1e-12));
  CHECK(log_normal_cdf(-20.0) ==
        doctest::Approx(-203.91715537109726).epsilon(1e-12));
  CHECK(log_normal_cdf(-25.0) ==
        doctest::Approx(-316.63940800802026).epsilon(1e-12));
  CHECK(log_normal_cdf(-30.0) == doctest::Approx(-454.3212439563432).epsilon(1e-12));
}

TEST_CASE("log_normal_cdf is continuous across the tail switchover") {
  const double lo = log_normal_cdf(-20.0001);
  const double hi = log_normal_cdf(-19.9999);
  CHECK(std::abs(hi - lo) < 1e-2);
  CHECK(lo < hi);  // monotone increasing in z
}
