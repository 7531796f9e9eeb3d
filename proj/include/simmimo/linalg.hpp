#pragma once

#include <cmath>

#include "simmimo/types.hpp"

namespace simmimo {

// (X + X^H)/2 — removes roundoff skew from products that are Hermitian in
// exact arithmetic.
inline CMat hermitianize(const CMat& x) { return 0.5 * (x + x.adjoint()); }

// Principal square root of a Hermitian PSD matrix via eigendecomposition.
// Eigenvalues in [-tol, 0) are treated as roundoff and clipped to 0; anything
// below -tol is a genuine indefiniteness and rejected.
inline CMat hermitian_sqrt(const CMat& x, double tol = 1e-10) {
  if (x.rows() != x.cols()) {
    throw InvalidInputError("hermitian_sqrt: matrix must be square");
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitianize(x));
  if (es.info() != Eigen::Success) {
    throw NumericError("hermitian_sqrt: eigendecomposition failed");
  }
  RVec lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < -tol) {
      throw InvalidInputError("hermitian_sqrt: matrix is not PSD (eigenvalue " +
                              std::to_string(lam[i]) + ")");
    }
    if (lam[i] < 0.0) lam[i] = 0.0;
  }
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
         es.eigenvectors().adjoint();
}

// log det of a Hermitian positive-definite matrix via Cholesky.
inline double logdet_hpd(const CMat& x) {
  Eigen::LLT<CMat> llt(hermitianize(x));
  if (llt.info() != Eigen::Success) {
    throw NumericError("logdet_hpd: matrix is not positive definite");
  }
  double s = 0.0;
  CMat l = llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i).real());
  return 2.0 * s;
}

// Inverse of a Hermitian positive-definite matrix via Cholesky.
inline CMat inverse_hpd(const CMat& x) {
  Eigen::LLT<CMat> llt(hermitianize(x));
  if (llt.info() != Eigen::Success) {
    throw NumericError("inverse_hpd: matrix is not positive definite");
  }
  return llt.solve(CMat::Identity(x.rows(), x.cols()));
}

inline double normal_pdf(double z) {
  static constexpr double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z * 0.7071067811865475244);
}

// log of the standard normal CDF, accurate into the deep lower tail where the
// CDF itself underflows. For z < -20 uses the asymptotic expansion
// Phi(-t) = pdf(t)/t * (1 - 1/t^2 + 3/t^4 - 15/t^6 + 105/t^8 - ...).
inline double log_normal_cdf(double z) {
  if (z >= -20.0) {
    return std::log(normal_cdf(z));
  }
  const double t = -z;
  const double t2 = t * t;
  const double series =
      1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2) +
      105.0 / (t2 * t2 * t2 * t2);
  static constexpr double log_sqrt_2pi = 0.91893853320467274178;
  return -0.5 * t2 - log_sqrt_2pi - std::log(t) + std::log(series);
}

}  // namespace simmimo
