#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace eigengp;
using namespace eigengp::testing;

namespace {

HyperParams one_point_theta(double a0, double w, double sigma2) {
  HyperParams t;
  t.kernel.a0 = a0;
  t.kernel.eta = Vector::Ones(1);
  t.inducing.points = Matrix::Zero(1, 1);
  t.w = Vector::Constant(1, w);
  t.sigma2 = sigma2;
  return t;
}

struct DenseOracle {
  Vector mean;
  Vector variance;
};

// Predictive distribution through the explicit N x N covariance.
DenseOracle dense_predict(const HyperParams &theta, const Matrix &X, const Vector &y,
                          const Matrix &Xs, ModelVariant variant) {
  const Matrix C = dense_covariance(theta, X, variant, false);
  const Basis basis = build_basis(theta.inducing, theta.kernel, theta.m_basis());
  const Matrix Phi = eval_phi(basis, X);
  const Matrix Phis = eval_phi(basis, Xs);
  const Matrix Ksn = Phis * theta.w.asDiagonal() * Phi.transpose();
  const Eigen::LDLT<Matrix> ldlt(C);
  DenseOracle out;
  out.mean = Ksn * ldlt.solve(y);
  const Vector kss = (Phis * theta.w.asDiagonal() * Phis.transpose()).diagonal();
  out.variance = kss - (Ksn.array() * ldlt.solve(Matrix(Ksn.transpose())).transpose().array())
                           .rowwise()
                           .sum()
                           .matrix();
  if (variant == ModelVariant::PlusCorrection)
    out.variance.array() += (theta.kernel.a0 - kss.array()).max(0.0);
  out.variance.array() += theta.sigma2;
  return out;
}

} // namespace

TEST(Ktilde, ZeroWeightsGiveZero) {
  const Instance inst = random_instance(6, 4, 2, 1);
  const Basis basis = build_basis(inst.theta.inducing, inst.theta.kernel, 4);
  EXPECT_TRUE((ktilde(inst.X, inst.X, basis, Vector::Zero(4)).array() == 0.0).all());
}

TEST(Ktilde, DefaultWeightsGiveNystromCrossBlocks) {
  const Instance inst = random_instance(6, 5, 2, 2);
  const Basis basis = build_basis(inst.theta.inducing, inst.theta.kernel, 5);
  std::mt19937_64 rng(3);
  const Matrix X2 = random_matrix(4, 2, rng, 0, 2);
  const Matrix &B = inst.theta.inducing.points;
  const Matrix Kbb = dense_kernel(B, B, inst.theta.kernel);
  const Matrix expected = dense_kernel(inst.X, B, inst.theta.kernel) *
                          Kbb.ldlt().solve(dense_kernel(B, X2, inst.theta.kernel));
  EXPECT_TRUE(close_rel(ktilde(inst.X, X2, basis, default_weights(basis)), expected, 1e-8, 1e-10));
  // exact at the inducing points
  EXPECT_TRUE(close_rel(ktilde(B, B, basis, default_weights(basis)), Kbb, 1e-8, 1e-10));
}

TEST(Ktilde, RejectsBadWeights) {
  const Instance inst = random_instance(3, 3, 1, 4);
  const Basis basis = build_basis(inst.theta.inducing, inst.theta.kernel, 3);
  EXPECT_THROW(ktilde(inst.X, inst.X, basis, Vector::Ones(2)), Error);
  EXPECT_THROW(ktilde(inst.X, inst.X, basis, -Vector::Ones(3)), Error);
}

TEST(Fit, SinglePointClosedForm) {
  // B = {0}, a0 = 1: lambda = 1, u = 1, phi(x) = k(x, 0)
  const HyperParams theta = one_point_theta(1.0, 0.7, 0.3);
  Matrix X(1, 1);
  X << 0.5;
  Vector y(1);
  y << 2.0;
  const TrainedModel m = fit(X, y, theta, ModelVariant::Finite);
  const double phi = std::exp(-0.25);
  EXPECT_NEAR(m.alpha(0), 2.0 / (0.7 * phi * phi + 0.3), 1e-14);
  EXPECT_NEAR(m.weight_mean(0), 0.7 * phi * m.alpha(0), 1e-14);
}

TEST(Fit, RefitIsBitwiseIdentical) {
  const Instance inst = random_instance(30, 5, 2, 5);
  const TrainedModel a = fit(inst.X, inst.y, inst.theta, ModelVariant::Finite);
  const TrainedModel b = fit(inst.X, inst.y, inst.theta, ModelVariant::Finite);
  EXPECT_EQ(a.alpha, b.alpha);
  EXPECT_EQ(a.weight_mean, b.weight_mean);
  EXPECT_EQ(a.data_digest, b.data_digest);
  EXPECT_EQ(predict(a, inst.X).variance, predict(b, inst.X).variance);
}

TEST(Fit, DigestChangesWithData) {
  const Instance inst = random_instance(10, 3, 1, 6);
  Vector y2 = inst.y;
  y2(3) += 1e-12;
  EXPECT_NE(data_digest(inst.X, inst.y), data_digest(inst.X, y2));
  EXPECT_EQ(data_digest(inst.X, inst.y).size(), 64u);
}

TEST(Fit, RejectsMismatchedInputs) {
  const Instance inst = random_instance(10, 3, 2, 7);
  try {
    fit(Matrix(inst.X.leftCols(1)), inst.y, inst.theta, ModelVariant::Finite);
    FAIL() << "expected DimensionMismatch";
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
  HyperParams bad = inst.theta;
  bad.sigma2 = 0.0;
  try {
    fit(inst.X, inst.y, bad, ModelVariant::Finite);
    FAIL() << "expected NonPositiveNoise";
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveNoise);
  }
}

TEST(Predict, FarPointReturnsPrior) {
  const Instance inst = random_instance(20, 4, 1, 8);
  Matrix far(1, 1);
  far << 1e3;
  const auto fin = predict(fit(inst.X, inst.y, inst.theta, ModelVariant::Finite), far);
  EXPECT_NEAR(fin.mean(0), 0.0, 1e-300);
  EXPECT_DOUBLE_EQ(fin.variance(0), inst.theta.sigma2);
  const auto plus = predict(fit(inst.X, inst.y, inst.theta, ModelVariant::PlusCorrection), far);
  EXPECT_DOUBLE_EQ(plus.variance(0), inst.theta.kernel.a0 + inst.theta.sigma2);
}

TEST(Predict, MatchesDenseOracle) {
  for (int t = 0; t < 10; ++t) {
    const Index D = 1 + t % 3;
    const Instance inst = random_instance(40, 3 + t % 5, D, 900 + t);
    std::mt19937_64 rng(t);
    const Matrix Xs = random_matrix(15, D, rng, -0.5, 2.5);
    for (ModelVariant v : {ModelVariant::Finite, ModelVariant::PlusCorrection}) {
      const auto got = predict(fit(inst.X, inst.y, inst.theta, v), Xs);
      const DenseOracle want = dense_predict(inst.theta, inst.X, inst.y, Xs, v);
      EXPECT_TRUE(close_rel(got.mean, want.mean, 1e-7, 1e-9)) << "trial " << t;
      EXPECT_TRUE(close_rel(got.variance, want.variance, 1e-7, 1e-9)) << "trial " << t;
    }
  }
}

TEST(Predict, VarianceBounds) {
  for (int t = 0; t < 5; ++t) {
    const Instance inst = random_instance(25, 4, 2, 1000 + t);
    std::mt19937_64 rng(t);
    const Matrix Xs = random_matrix(50, 2, rng, -1, 3);
    const auto fin = predict(fit(inst.X, inst.y, inst.theta, ModelVariant::Finite), Xs);
    const auto plus = predict(fit(inst.X, inst.y, inst.theta, ModelVariant::PlusCorrection), Xs);
    EXPECT_TRUE((fin.variance.array() >= inst.theta.sigma2).all());
    EXPECT_TRUE((plus.variance.array() >= inst.theta.sigma2).all());
    EXPECT_TRUE((plus.variance.array() >= fin.variance.array() - 1e-12).all());
  }
}

TEST(Predict, DimensionMismatchThrows) {
  const Instance inst = random_instance(10, 3, 2, 11);
  const TrainedModel m = fit(inst.X, inst.y, inst.theta, ModelVariant::Finite);
  EXPECT_THROW(predict(m, Matrix::Zero(2, 3)), Error);
}

TEST(PosteriorAlpha, ZeroFeaturesKeepPrior) {
  HyperParams theta = one_point_theta(1.0, 0.8, 0.5);
  Matrix X(2, 1);
  X << 1e3, -1e3;
  const Vector y = Vector::Ones(2);
  const PosteriorAlpha post = posterior_alpha(fit(X, y, theta, ModelVariant::Finite));
  EXPECT_NEAR(post.mean(0), 0.0, 1e-300);
  EXPECT_NEAR(post.covariance(0, 0), 0.8, 1e-15);
}

TEST(PosteriorAlpha, ScalarConjugateCase) {
  // phi = 1, w = 1, sigma2 = 1, y = 2: posterior N(1, 1/2)
  const HyperParams theta = one_point_theta(1.0, 1.0, 1.0);
  const Matrix X = Matrix::Zero(1, 1);
  const Vector y = Vector::Constant(1, 2.0);
  const PosteriorAlpha post = posterior_alpha(fit(X, y, theta, ModelVariant::Finite));
  EXPECT_NEAR(post.mean(0), 1.0, 1e-15);
  EXPECT_NEAR(post.covariance(0, 0), 0.5, 1e-15);
}

TEST(PosteriorAlpha, WeightAndFunctionSpaceAgree) {
  for (int t = 0; t < 5; ++t) {
    const Instance inst = random_instance(30, 5, 2, 1200 + t);
    const PosteriorAlpha post = posterior_alpha(fit(inst.X, inst.y, inst.theta, ModelVariant::Finite));
    const Basis basis = build_basis(inst.theta.inducing, inst.theta.kernel, 5);
    const Matrix Phi = eval_phi(basis, inst.X);
    const Matrix W = inst.theta.w.asDiagonal();
    const Matrix C = dense_covariance(inst.theta, inst.X, ModelVariant::Finite, false);
    const Eigen::LDLT<Matrix> ldlt(C);
    const Vector mean = W * Phi.transpose() * ldlt.solve(inst.y);
    const Matrix cov = W - W * Phi.transpose() * ldlt.solve(Matrix(Phi * W));
    EXPECT_TRUE(close_rel(post.mean, mean, 1e-8, 1e-10));
    EXPECT_TRUE(close_rel(post.covariance, cov, 1e-8, 1e-10));
  }
}

TEST(ModelVariant, StringRoundTrip) {
  for (ModelVariant v : {ModelVariant::Finite, ModelVariant::PlusCorrection})
    EXPECT_EQ(variant_from_string(to_string(v)), v);
  EXPECT_THROW(variant_from_string("bogus"), Error);
}
