#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace eigengp;
using namespace eigengp::testing;

namespace {

Inducing inducing_from(const Matrix &B) {
  Inducing s;
  s.points = B;
  return s;
}

Kernel kernel_1d(double a0, double eta) {
  Kernel p;
  p.a0 = a0;
  p.eta = Vector::Constant(1, eta);
  return p;
}

} // namespace

TEST(EigenBasis, SinglePoint) {
  Matrix b(1, 1);
  b << 0.3;
  const Basis basis = build_basis(inducing_from(b), kernel_1d(2.0, 1.0), 1);
  ASSERT_EQ(basis.m_basis(), 1);
  EXPECT_DOUBLE_EQ(basis.lambda(0), 2.0);
  EXPECT_DOUBLE_EQ(std::abs(basis.U(0, 0)), 0.5);
  // phi(b) = k(b,b) u = 1 up to sign
  Matrix x(1, 1);
  x << 0.3;
  EXPECT_NEAR(std::abs(eval_phi(basis, x)(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(default_weights(basis)(0), 2.0, 1e-15);
}

TEST(EigenBasis, OrthogonalityAtInducingPoints) {
  for (int t = 0; t < 10; ++t) {
    const Instance inst = random_instance(5, 3 + t % 5, 1 + t % 3, 100 + t);
    const Basis basis = build_basis(inst.theta.inducing, inst.theta.kernel, inst.theta.m_ind());
    const Matrix PhiB = eval_phi(basis, inst.theta.inducing.points);
    const double M = static_cast<double>(basis.m_ind());
    EXPECT_TRUE(close_rel(PhiB.transpose() * PhiB,
                          M * Matrix::Identity(basis.m_basis(), basis.m_basis()), 1e-8, 1e-8));
  }
}

TEST(EigenBasis, EigenRelationAtInducingPoints) {
  const Instance inst = random_instance(5, 6, 2, 42);
  const Basis basis = build_basis(inst.theta.inducing, inst.theta.kernel, 6);
  const Matrix &B = inst.theta.inducing.points;
  const Matrix Kbb = dense_kernel(B, B, inst.theta.kernel);
  const Matrix PhiB = eval_phi(basis, B);
  // (1/M) sum_i k(x, b_i) phi_j(b_i) = (lambda_j / M) phi_j(x)
  std::mt19937_64 rng(1);
  const Matrix X = random_matrix(8, 2, rng, 0, 2);
  const Matrix lhs = kernel_matrix(X, B, inst.theta.kernel) * PhiB / 6.0;
  const Matrix rhs = eval_phi(basis, X) * (basis.lambda / 6.0).asDiagonal();
  EXPECT_TRUE(close_rel(lhs, rhs, 1e-8, 1e-10));
  EXPECT_TRUE(close_rel(Kbb * basis.vectors, basis.vectors * basis.lambda.asDiagonal(), 1e-10,
                        1e-12));
}

TEST(EigenBasis, DefaultWeightsReproduceNystrom) {
  for (int t = 0; t < 10; ++t) {
    const Instance inst = random_instance(12, 2 + t % 6, 1 + t % 3, 200 + t);
    const Basis basis = build_basis(inst.theta.inducing, inst.theta.kernel, inst.theta.m_ind());
    const Matrix &B = inst.theta.inducing.points;
    const Matrix Kxb = dense_kernel(inst.X, B, inst.theta.kernel);
    const Matrix nystrom =
        Kxb * dense_kernel(B, B, inst.theta.kernel).ldlt().solve(Matrix(Kxb.transpose()));
    const Matrix Phi = eval_phi(basis, inst.X);
    const Matrix model = Phi * default_weights(basis).asDiagonal() * Phi.transpose();
    EXPECT_TRUE(close_rel(model, nystrom, 1e-8, 1e-8));
  }
}

TEST(EigenBasis, TruncationKeepsLeadingEigenpairs) {
  const Instance inst = random_instance(20, 6, 2, 300);
  const Basis full = build_basis(inst.theta.inducing, inst.theta.kernel, 6);
  const Basis trunc = build_basis(inst.theta.inducing, inst.theta.kernel, 3);
  ASSERT_EQ(trunc.m_basis(), 3);
  EXPECT_EQ(trunc.lambda, full.lambda.head(3));
  const Matrix Phi = eval_phi(full, inst.X).leftCols(3);
  EXPECT_EQ(eval_phi(trunc, inst.X), Phi);
  // rank-3 Nystrom: K_XB V3 Lambda3^{-1} V3^T K_BX
  const Matrix Kxb = dense_kernel(inst.X, inst.theta.inducing.points, inst.theta.kernel);
  const Matrix V3 = full.vectors.leftCols(3);
  const Matrix expected =
      Kxb * V3 * full.lambda.head(3).cwiseInverse().asDiagonal() * V3.transpose() *
      Kxb.transpose();
  const Matrix model = Phi * default_weights(trunc).asDiagonal() * Phi.transpose();
  EXPECT_TRUE(close_rel(model, expected, 1e-8, 1e-10));
}

TEST(EigenBasis, DuplicateInducingPointsDropEigenpair) {
  Matrix B(3, 1);
  B << 0.0, 0.0, 1.0;
  const Basis basis = build_basis(inducing_from(B), kernel_1d(1.0, 1.0), 3);
  EXPECT_EQ(basis.m_basis(), 2);
  EXPECT_EQ(basis.dropped(), 1);
  EXPECT_EQ(basis.warnings.size(), 1u);
  EXPECT_TRUE(basis.U.allFinite());
}

TEST(EigenBasis, FarPointHasVanishingFeatures) {
  const Instance inst = random_instance(5, 4, 1, 400);
  const Basis basis = build_basis(inst.theta.inducing, inst.theta.kernel, 4);
  Matrix far(1, 1);
  far << 1e3;
  EXPECT_LT(eval_phi(basis, far).cwiseAbs().maxCoeff(), 1e-300);
}

TEST(EigenBasis, InvalidBasisSizeThrows) {
  Matrix B(2, 1);
  B << 0.0, 1.0;
  EXPECT_THROW(build_basis(inducing_from(B), kernel_1d(1.0, 1.0), 3), Error);
  EXPECT_THROW(build_basis(inducing_from(B), kernel_1d(1.0, 1.0), 0), Error);
}

TEST(EigenBasis, SignConventionIsDeterministic) {
  const Instance inst = random_instance(5, 5, 2, 500);
  const Basis a = build_basis(inst.theta.inducing, inst.theta.kernel, 5);
  const Basis b = build_basis(inst.theta.inducing, inst.theta.kernel, 5);
  EXPECT_EQ(a.U, b.U);
  EXPECT_EQ(a.lambda, b.lambda);
}
