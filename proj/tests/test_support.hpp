#pragma once

// Shared generators and dense oracles for the unit tests. Nothing in here
// goes through the low-rank code paths under test.

#include "eigengp/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

namespace eigengp::testing {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64 &rng, double lo = 0.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      m(i, j) = u(rng);
  return m;
}

inline Vector random_vector(Index n, std::mt19937_64 &rng, double lo = -1.0, double hi = 1.0) {
  return random_matrix(n, 1, rng, lo, hi);
}

inline Matrix random_spd(Index n, std::mt19937_64 &rng) {
  const Matrix W = random_matrix(n, n, rng, -1.0, 1.0);
  return W.transpose() * W + 0.1 * Matrix::Identity(n, n);
}

struct Instance {
  Matrix X;
  Vector y;
  HyperParams theta;
};

inline Matrix dense_kernel(const Matrix &A, const Matrix &B, const Kernel &p);

/// Random regression problem with well-separated inducing points: draws
/// are repeated until K_BB has smallest/largest eigenvalue ratio >= 1e-4,
/// so that finite differences of the evidence stay accurate.
inline Instance random_instance(Index N, Index M, Index D, std::uint64_t seed,
                                Index m_basis = -1) {
  std::mt19937_64 rng(seed);
  Instance inst;
  inst.X = random_matrix(N, D, rng, 0.0, 2.0);
  inst.y = (inst.X.col(0).array() * 2.0).sin().matrix() + 0.1 * random_vector(N, rng);
  inst.theta.kernel.a0 = 0.5 + random_matrix(1, 1, rng)(0, 0);
  inst.theta.kernel.eta = random_matrix(D, 1, rng, 0.5, 2.0);
  const double spread = 2.0 * std::max(1.0, static_cast<double>(M) / (2.0 * static_cast<double>(D)));
  for (int attempt = 0;; ++attempt) {
    inst.theta.inducing.points = random_matrix(M, D, rng, 0.0, spread);
    const Matrix Kbb = dense_kernel(inst.theta.inducing.points, inst.theta.inducing.points,
                                    inst.theta.kernel);
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(Kbb).eigenvalues();
    if (ev(0) >= 1e-4 * ev(M - 1) || attempt > 1000)
      break;
  }
  const Index mb = m_basis > 0 ? m_basis : M;
  inst.theta.w = random_matrix(mb, 1, rng, 0.2, 1.5);
  inst.theta.sigma2 = 0.05 + 0.2 * random_matrix(1, 1, rng)(0, 0);
  return inst;
}

inline Matrix dense_kernel(const Matrix &A, const Matrix &B, const Kernel &p) {
  Matrix K(A.rows(), B.rows());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < B.rows(); ++j) {
      double s = 0.0;
      for (Index d = 0; d < A.cols(); ++d)
        s += p.eta(d) * (A(i, d) - B(j, d)) * (A(i, d) - B(j, d));
      K(i, j) = p.a0 * std::exp(-s);
    }
  return K;
}

/// Covariance N x N of the eigenfunction model, built explicitly.
inline Matrix dense_covariance(const HyperParams &theta, const Matrix &X, ModelVariant variant,
                               bool tied) {
  const Matrix &B = theta.inducing.points;
  const Index M = B.rows();
  const Matrix Kbb = dense_kernel(B, B, theta.kernel);
  Eigen::SelfAdjointEigenSolver<Matrix> es(Kbb);
  const Index mb = theta.w.size();
  Matrix Vm(M, mb);
  Vector lam(mb);
  for (Index j = 0; j < mb; ++j) {
    lam(j) = es.eigenvalues()(M - 1 - j);
    Vm.col(j) = es.eigenvectors().col(M - 1 - j);
  }
  const Matrix U = std::sqrt(static_cast<double>(M)) * Vm * lam.cwiseInverse().asDiagonal();
  const Matrix Phi = dense_kernel(X, B, theta.kernel) * U;
  const Vector w = tied ? Vector(lam / static_cast<double>(M)) : theta.w;
  Matrix C = Phi * w.asDiagonal() * Phi.transpose();
  if (variant == ModelVariant::PlusCorrection)
    for (Index i = 0; i < X.rows(); ++i)
      C(i, i) += std::max(0.0, theta.kernel.a0 - C(i, i));
  C.diagonal().array() += theta.sigma2;
  return C;
}

inline double dense_log_evidence(const Matrix &C, const Vector &y) {
  Eigen::LDLT<Matrix> ldlt(C);
  const double logdet = ldlt.vectorD().array().log().sum();
  return -0.5 * logdet - 0.5 * y.dot(ldlt.solve(y)) -
         0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

/// Central difference of f with respect to a scalar slot.
inline double central_diff(const std::function<double(double)> &f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// |a - b| <= rel * max(|a|, |b|) + abs_floor for every entry.
template <typename A, typename B>
::testing::AssertionResult close_rel(const A &a, const B &b, double rel, double abs_floor = 0.0) {
  const Matrix ma = a;
  const Matrix mb = b;
  if (ma.rows() != mb.rows() || ma.cols() != mb.cols())
    return ::testing::AssertionFailure() << "shape mismatch";
  for (Index i = 0; i < ma.rows(); ++i)
    for (Index j = 0; j < ma.cols(); ++j) {
      const double diff = std::abs(ma(i, j) - mb(i, j));
      const double scale = std::max(std::abs(ma(i, j)), std::abs(mb(i, j)));
      if (!(diff <= rel * scale + abs_floor))
        return ::testing::AssertionFailure()
               << "entry (" << i << "," << j << "): " << ma(i, j) << " vs " << mb(i, j);
    }
  return ::testing::AssertionSuccess();
}

} // namespace eigengp::testing
