#pragma once

#include "eigengp/kernel.hpp"
#include "eigengp/linalg.hpp"

#include <string>
#include <vector>

namespace eigengp {

/// Inducing (basis) points, one per row.
template <typename Scalar> struct InducingSet {
  MatrixX<Scalar> points;

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
};

/// Eigenvalues below this fraction of the leading one are dropped.
inline constexpr double kEigenDropThreshold = 1e-12;

/// Nystrom eigenfunctions phi_j(x) = k(x, B) u_j, u_j = sqrt(M) v_j / lambda_j.
template <typename Scalar> struct EigenBasis {
  VectorX<Scalar> lambda;    // kept eigenvalues of K_BB, descending
  MatrixX<Scalar> vectors;   // matching orthonormal eigenvectors (M_ind x M_basis)
  MatrixX<Scalar> U;         // scaled weights (M_ind x M_basis)
  EigPair<Scalar> spectrum;  // full eigendecomposition of K_BB
  InducingSet<Scalar> inducing;
  KernelParams<Scalar> kernel;
  Index requested = 0;       // M_basis asked for
  std::vector<std::string> warnings;

  Index m_ind() const { return inducing.size(); }
  Index m_basis() const { return lambda.size(); }
  Index dropped() const { return requested - m_basis(); }
};

template <typename Scalar>
EigenBasis<Scalar> build_basis(const InducingSet<Scalar> &B, const KernelParams<Scalar> &p,
                               Index m_basis) {
  EIGENGP_REQUIRE(B.size() >= 1, ErrorKind::InvalidArgument, "empty inducing set");
  EIGENGP_REQUIRE(B.points.allFinite(), ErrorKind::InvalidArgument,
                  "inducing points must be finite");
  EIGENGP_REQUIRE(m_basis >= 1 && m_basis <= B.size(), ErrorKind::InvalidArgument,
                  "M_basis must lie in [1, M_ind]");
  EIGENGP_REQUIRE(p.valid(), ErrorKind::InvalidArgument, "invalid kernel parameters");

  const MatrixX<Scalar> Kbb = kernel_matrix(B.points, B.points, p);
  EigPair<Scalar> eig;
  try {
    eig = sym_eig_desc(Kbb, B.size());
  } catch (const Error &e) {
    if (e.kind() != ErrorKind::ConvergenceFailure)
      throw;
    MatrixX<Scalar> jittered = Kbb;
    jittered.diagonal().array() += default_jitter(Kbb);
    eig = sym_eig_desc(jittered, B.size());
  }

  EigenBasis<Scalar> out;
  out.inducing = B;
  out.kernel = p;
  out.requested = m_basis;
  const Scalar lead = eig.values(0);
  if (!(lead > Scalar(0)))
    throw Error(ErrorKind::AllEigenvaluesDegenerate,
                "leading eigenvalue of K_BB is not positive");
  const Scalar cut = Scalar(kEigenDropThreshold) * lead;
  Index keep = 0;
  while (keep < m_basis && eig.values(keep) >= cut)
    ++keep;
  for (Index j = keep; j < m_basis; ++j)
    out.warnings.push_back("dropped eigenpair " + std::to_string(j) + " (lambda=" +
                           std::to_string(static_cast<double>(eig.values(j))) +
                           ") below threshold");

  out.lambda = eig.values.head(keep);
  out.vectors = eig.vectors.leftCols(keep);
  out.spectrum = std::move(eig);
  const Scalar root_m = std::sqrt(static_cast<Scalar>(B.size()));
  out.U = out.vectors * (root_m * out.lambda.cwiseInverse()).asDiagonal();
  return out;
}

/// Phi = k(X, B) U, one row per input.
template <typename Scalar, typename Derived>
MatrixX<Scalar> eval_phi(const EigenBasis<Scalar> &basis, const Eigen::MatrixBase<Derived> &X) {
  return kernel_matrix(X, basis.inducing.points, basis.kernel) * basis.U;
}

/// w_j = lambda_j / M_ind: the prior variances that turn the eigenfunction
/// model back into the Nystrom covariance K_XB K_BB^{-1} K_BX.
template <typename Scalar> VectorX<Scalar> default_weights(const EigenBasis<Scalar> &basis) {
  return basis.lambda / static_cast<Scalar>(basis.m_ind());
}

} // namespace eigengp
