#pragma once

#include "eigengp/core.hpp"

#include <cmath>

namespace eigengp {

/// ARD squared exponential: k(x, x') = a0 exp(-(x - x')^T diag(eta) (x - x')).
///
/// eta holds the coefficients exactly as they sit in the exponent; eta_d = 0
/// switches dimension d off.
template <typename Scalar> struct KernelParams {
  Scalar a0 = Scalar(1);
  VectorX<Scalar> eta;

  Index dim() const { return eta.size(); }

  bool valid() const {
    return a0 > Scalar(0) && (eta.array() >= Scalar(0)).all() && eta.allFinite() &&
           std::isfinite(a0);
  }
};

namespace detail {

template <typename Scalar, typename D1, typename D2>
void check_kernel_dims(const Eigen::MatrixBase<D1> &X1, const Eigen::MatrixBase<D2> &X2,
                       const KernelParams<Scalar> &p) {
  EIGENGP_REQUIRE(X1.cols() == p.dim() && X2.cols() == p.dim(),
                  ErrorKind::DimensionMismatch,
                  "kernel inputs have " + std::to_string(X1.cols()) + " and " +
                      std::to_string(X2.cols()) + " columns, kernel has D=" +
                      std::to_string(p.dim()));
}

} // namespace detail

/// Weighted squared distances sum_d eta_d (X1[i,d] - X2[j,d])^2.
template <typename D1, typename D2>
MatrixX<typename D1::Scalar>
weighted_sqdist(const Eigen::MatrixBase<D1> &X1, const Eigen::MatrixBase<D2> &X2,
                const VectorX<typename D1::Scalar> &eta) {
  using Scalar = typename D1::Scalar;
  MatrixX<Scalar> dist = MatrixX<Scalar>::Zero(X1.rows(), X2.rows());
  for (Index d = 0; d < eta.size(); ++d) {
    if (eta(d) == Scalar(0))
      continue;
    dist.array() += eta(d) * (X1.col(d).replicate(1, X2.rows()).rowwise() -
                              X2.col(d).transpose())
                                 .array()
                                 .square();
  }
  return dist;
}

template <typename D1, typename D2>
MatrixX<typename D1::Scalar> kernel_matrix(const Eigen::MatrixBase<D1> &X1,
                                           const Eigen::MatrixBase<D2> &X2,
                                           const KernelParams<typename D1::Scalar> &p) {
  detail::check_kernel_dims(X1, X2, p);
  return (p.a0 * (-weighted_sqdist(X1, X2, p.eta)).array().exp()).matrix();
}

/// Diagonal k(x_i, x_i); always a0 for a stationary kernel.
template <typename D1>
VectorX<typename D1::Scalar> kernel_diagonal(const Eigen::MatrixBase<D1> &X,
                                             const KernelParams<typename D1::Scalar> &p) {
  EIGENGP_REQUIRE(X.cols() == p.dim(), ErrorKind::DimensionMismatch,
                  "kernel_diagonal column mismatch");
  return VectorX<typename D1::Scalar>::Constant(X.rows(), p.a0);
}

/// Partial derivatives of K = kernel_matrix(X, B, p).
///
/// The contract_* members turn an adjoint G (dL/dK, same shape as K) into
/// parameter gradients without forming the per-parameter derivative
/// matrices; cost is O(n1 n2 D).
template <typename Scalar> class KernelGrads {
public:
  KernelGrads(MatrixX<Scalar> X, MatrixX<Scalar> B, KernelParams<Scalar> p)
      : X_(std::move(X)), B_(std::move(B)), p_(std::move(p)) {
    detail::check_kernel_dims(X_, B_, p_);
    K_ = kernel_matrix(X_, B_, p_);
  }

  const MatrixX<Scalar> &K() const { return K_; }
  const KernelParams<Scalar> &params() const { return p_; }

  MatrixX<Scalar> d_a0() const { return K_ / p_.a0; }

  /// dK/d eta_d = -K o D_d with D_d[i,j] = (X[i,d] - B[j,d])^2.
  MatrixX<Scalar> d_eta(Index d) const {
    return -(K_.array() * diff(d).array().square()).matrix();
  }

  /// dK[:, j]/dB[j, d]; every other column of dK is zero.
  VectorX<Scalar> d_b(Index j, Index d) const {
    return (Scalar(2) * p_.eta(d) * (X_.col(d).array() - B_(j, d)) *
            K_.col(j).array())
        .matrix();
  }

  template <typename DG> Scalar contract_a0(const Eigen::MatrixBase<DG> &G) const {
    return (G.array() * K_.array()).sum() / p_.a0;
  }

  template <typename DG>
  VectorX<Scalar> contract_eta(const Eigen::MatrixBase<DG> &G) const {
    const MatrixX<Scalar> GK = (G.array() * K_.array()).matrix();
    VectorX<Scalar> out(p_.dim());
    for (Index d = 0; d < p_.dim(); ++d)
      out(d) = -(GK.array() * diff(d).array().square()).sum();
    return out;
  }

  /// Gradient with respect to the second argument's rows (n2 x D).
  template <typename DG>
  MatrixX<Scalar> contract_b(const Eigen::MatrixBase<DG> &G) const {
    const MatrixX<Scalar> GK = (G.array() * K_.array()).matrix();
    const VectorX<Scalar> colsum = GK.colwise().sum().transpose();
    const MatrixX<Scalar> GKtX = GK.transpose() * X_;
    MatrixX<Scalar> out(B_.rows(), p_.dim());
    for (Index d = 0; d < p_.dim(); ++d)
      out.col(d) = Scalar(2) * p_.eta(d) *
                   (GKtX.col(d).array() - colsum.array() * B_.col(d).array()).matrix();
    return out;
  }

  /// Gradient with respect to the first argument's rows (n1 x D).
  template <typename DG>
  MatrixX<Scalar> contract_x(const Eigen::MatrixBase<DG> &G) const {
    const MatrixX<Scalar> GK = (G.array() * K_.array()).matrix();
    const VectorX<Scalar> rowsum = GK.rowwise().sum();
    const MatrixX<Scalar> GKB = GK * B_;
    MatrixX<Scalar> out(X_.rows(), p_.dim());
    for (Index d = 0; d < p_.dim(); ++d)
      out.col(d) = Scalar(2) * p_.eta(d) *
                   (GKB.col(d).array() - rowsum.array() * X_.col(d).array()).matrix();
    return out;
  }

private:
  MatrixX<Scalar> diff(Index d) const {
    return X_.col(d).replicate(1, B_.rows()).rowwise() - B_.col(d).transpose();
  }

  MatrixX<Scalar> X_;
  MatrixX<Scalar> B_;
  KernelParams<Scalar> p_;
  MatrixX<Scalar> K_;
};

template <typename D1, typename D2>
KernelGrads<typename D1::Scalar> kernel_grads(const Eigen::MatrixBase<D1> &X,
                                              const Eigen::MatrixBase<D2> &B,
                                              const KernelParams<typename D1::Scalar> &p) {
  return KernelGrads<typename D1::Scalar>(X, B, p);
}

} // namespace eigengp
