#pragma once

#include "eigengp/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace eigengp {

/// Lower Cholesky factor of A + jitter_used * I.
template <typename Scalar> struct PsdFactor {
  MatrixX<Scalar> lower_triangular;
  Scalar jitter_used = Scalar(0);

  Index size() const { return lower_triangular.rows(); }

  Scalar log_determinant() const {
    return Scalar(2) * lower_triangular.diagonal().array().log().sum();
  }
};

/// Symmetric eigenpairs, values descending, vectors orthonormal columns.
template <typename Scalar> struct EigPair {
  VectorX<Scalar> values;
  MatrixX<Scalar> vectors;
};

/// Base jitter used for kernel Gram matrices: 1e-10 * mean diagonal.
template <typename Derived>
typename Derived::Scalar default_jitter(const Eigen::MatrixBase<Derived> &A) {
  using Scalar = typename Derived::Scalar;
  if (A.rows() == 0)
    return Scalar(0);
  const Scalar mean_diag = A.trace() / static_cast<Scalar>(A.rows());
  return Scalar(1e-10) * std::max(mean_diag, Scalar(0));
}

/// Cholesky with an escalating jitter ladder {0, base * 4^k, k = 0..6}.
template <typename Derived>
PsdFactor<typename Derived::Scalar>
chol_psd(const Eigen::MatrixBase<Derived> &A,
         typename Derived::Scalar base_jitter) {
  using Scalar = typename Derived::Scalar;
  EIGENGP_REQUIRE(A.rows() == A.cols(), ErrorKind::DimensionMismatch,
                  "chol_psd expects a square matrix");
  EIGENGP_REQUIRE(base_jitter >= Scalar(0), ErrorKind::InvalidArgument,
                  "base_jitter must be nonnegative");
  const Index n = A.rows();
  const MatrixX<Scalar> sym = A;

  std::vector<Scalar> ladder{Scalar(0)};
  if (base_jitter > Scalar(0)) {
    Scalar j = base_jitter;
    for (int k = 0; k <= 6; ++k, j *= Scalar(4))
      ladder.push_back(j);
  }

  for (const Scalar jitter : ladder) {
    MatrixX<Scalar> shifted = sym;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<MatrixX<Scalar>> llt(shifted);
    if (llt.info() != Eigen::Success)
      continue;
    MatrixX<Scalar> L = llt.matrixL();
    if ((L.diagonal().array() > Scalar(0)).all() && L.allFinite())
      return PsdFactor<Scalar>{std::move(L), jitter};
  }
  throw Error(ErrorKind::FactorizationFailed,
              "matrix of size " + std::to_string(n) +
                  " is not positive definite at any jitter level");
}

/// Solves (A + jitter I) X = rhs via two triangular solves.
template <typename Scalar, typename Derived>
MatrixX<Scalar> solve_psd(const PsdFactor<Scalar> &F,
                          const Eigen::MatrixBase<Derived> &rhs) {
  EIGENGP_REQUIRE(rhs.rows() == F.size(), ErrorKind::DimensionMismatch,
                  "solve_psd: rhs has " + std::to_string(rhs.rows()) +
                      " rows, factor has " + std::to_string(F.size()));
  MatrixX<Scalar> X = rhs;
  const auto L = F.lower_triangular.template triangularView<Eigen::Lower>();
  L.solveInPlace(X);
  L.transpose().solveInPlace(X);
  return X;
}

/// Flips each column so its largest-magnitude entry is positive (lowest
/// index wins ties).
template <typename Scalar> void canonicalize_signs(MatrixX<Scalar> &vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    Index best = 0;
    Scalar best_abs = Scalar(-1);
    for (Index i = 0; i < vectors.rows(); ++i) {
      const Scalar a = std::abs(vectors(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (vectors(best, j) < Scalar(0))
      vectors.col(j) = -vectors.col(j);
  }
}

/// Top-m eigenpairs of a symmetric matrix in descending order.
template <typename Derived>
EigPair<typename Derived::Scalar> sym_eig_desc(const Eigen::MatrixBase<Derived> &A,
                                               Index m) {
  using Scalar = typename Derived::Scalar;
  EIGENGP_REQUIRE(A.rows() == A.cols(), ErrorKind::DimensionMismatch,
                  "sym_eig_desc expects a square matrix");
  const Index n = A.rows();
  EIGENGP_REQUIRE(m >= 1 && m <= n, ErrorKind::InvalidArgument,
                  "sym_eig_desc: requested " + std::to_string(m) +
                      " eigenpairs of a " + std::to_string(n) + "x" +
                      std::to_string(n) + " matrix");
  const MatrixX<Scalar> sym = A;
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(sym);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::ConvergenceFailure,
                "symmetric eigendecomposition did not converge");
  EigPair<Scalar> out;
  out.values = solver.eigenvalues().reverse().head(m);
  out.vectors = solver.eigenvectors().rowwise().reverse().leftCols(m);
  canonicalize_signs(out.vectors);
  return out;
}

/// Factorized covariance C = diag(noise) + Phi diag(w) Phi^T.
///
/// Columns with w_j = 0 are dropped. The remaining columns are scaled by
/// sqrt(w_j), giving Psi, and the core I + Psi^T D^-1 Psi is factored, so
/// no division by w ever happens. Everything here costs O(N M^2).
template <typename Scalar> struct LowRankStats {
  Scalar logdet = Scalar(0);
  VectorX<Scalar> alpha;
  PsdFactor<Scalar> inner_factor;

  VectorX<Scalar> noise;          // diagonal of D
  std::vector<Index> active;      // columns of Phi with w > 0
  MatrixX<Scalar> scaled_basis;   // Psi = Phi_active * diag(sqrt(w_active))

  Index n() const { return noise.size(); }

  /// C^{-1} rhs.
  template <typename Derived>
  MatrixX<Scalar> solve(const Eigen::MatrixBase<Derived> &rhs) const {
    EIGENGP_REQUIRE(rhs.rows() == n(), ErrorKind::DimensionMismatch,
                    "LowRankStats::solve row mismatch");
    const VectorX<Scalar> dinv = noise.cwiseInverse();
    MatrixX<Scalar> scaled = dinv.asDiagonal() * rhs;
    if (active.empty())
      return scaled;
    const MatrixX<Scalar> core = solve_psd(inner_factor, scaled_basis.transpose() * scaled);
    scaled.noalias() -= dinv.asDiagonal() * (scaled_basis * core);
    return scaled;
  }

  /// diag(C^{-1}) without forming C.
  VectorX<Scalar> inverse_diagonal() const {
    VectorX<Scalar> dinv = noise.cwiseInverse();
    if (active.empty())
      return dinv;
    MatrixX<Scalar> T = (dinv.asDiagonal() * scaled_basis).transpose();
    inner_factor.lower_triangular.template triangularView<Eigen::Lower>()
        .solveInPlace(T);
    return dinv - T.colwise().squaredNorm().transpose();
  }
};

/// Low-rank log-determinant and solve for diag(noise) + Phi diag(w) Phi^T.
template <typename DerivedPhi, typename DerivedW, typename DerivedNoise,
          typename DerivedY>
LowRankStats<typename DerivedPhi::Scalar>
lowrank_stats_diag(const Eigen::MatrixBase<DerivedPhi> &Phi,
                   const Eigen::MatrixBase<DerivedW> &w,
                   const Eigen::MatrixBase<DerivedNoise> &noise,
                   const Eigen::MatrixBase<DerivedY> &y) {
  using Scalar = typename DerivedPhi::Scalar;
  const Index N = Phi.rows();
  const Index M = Phi.cols();
  EIGENGP_REQUIRE(w.size() == M, ErrorKind::DimensionMismatch,
                  "lowrank_stats: w length does not match Phi columns");
  EIGENGP_REQUIRE(noise.size() == N && y.size() == N,
                  ErrorKind::DimensionMismatch,
                  "lowrank_stats: noise/y length does not match Phi rows");
  EIGENGP_REQUIRE((noise.array() > Scalar(0)).all(), ErrorKind::NonPositiveNoise,
                  "noise variance must be positive");
  EIGENGP_REQUIRE((w.array() >= Scalar(0)).all(), ErrorKind::InvalidArgument,
                  "prior variances w must be nonnegative");

  LowRankStats<Scalar> out;
  out.noise = noise;
  for (Index j = 0; j < M; ++j)
    if (w(j) > Scalar(0))
      out.active.push_back(j);
  const Index A = static_cast<Index>(out.active.size());
  out.scaled_basis.resize(N, A);
  for (Index k = 0; k < A; ++k)
    out.scaled_basis.col(k) = Phi.col(out.active[k]) * std::sqrt(w(out.active[k]));

  const VectorX<Scalar> dinv = out.noise.cwiseInverse();
  MatrixX<Scalar> core = MatrixX<Scalar>::Identity(A, A);
  if (A > 0)
    core.noalias() += out.scaled_basis.transpose() * dinv.asDiagonal() * out.scaled_basis;
  out.inner_factor = chol_psd(core, Scalar(0));
  out.logdet = out.noise.array().log().sum() + out.inner_factor.log_determinant();
  out.alpha = out.solve(y);
  return out;
}

/// Scalar-noise form: ln det and C^{-1} y for Phi diag(w) Phi^T + sigma2 I.
template <typename DerivedPhi, typename DerivedW, typename DerivedY>
LowRankStats<typename DerivedPhi::Scalar>
lowrank_stats(const Eigen::MatrixBase<DerivedPhi> &Phi,
              const Eigen::MatrixBase<DerivedW> &w,
              typename DerivedPhi::Scalar sigma2,
              const Eigen::MatrixBase<DerivedY> &y) {
  using Scalar = typename DerivedPhi::Scalar;
  EIGENGP_REQUIRE(sigma2 > Scalar(0), ErrorKind::NonPositiveNoise,
                  "sigma2 must be positive");
  return lowrank_stats_diag(Phi, w, VectorX<Scalar>::Constant(Phi.rows(), sigma2), y);
}

} // namespace eigengp
