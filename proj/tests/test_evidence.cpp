#include "eigengp/evidence.hpp"

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace eigengp;
using namespace eigengp::testing;

namespace {

constexpr ModelVariant kVariants[] = {ModelVariant::Finite, ModelVariant::PlusCorrection};

/// Central differences of the evidence over every natural parameter.
EvidenceResult numeric_gradient(const HyperParams &theta, const Matrix &X, const Vector &y,
                                ModelVariant variant, GradMode mode, double step = 1e-5) {
  EvidenceResult out;
  const auto eval = [&](const HyperParams &t) { return log_evidence(t, X, y, variant, mode); };
  const auto slot = [&](auto setter, double base) {
    const double h = step * std::max(std::abs(base), 1e-2);
    HyperParams plus = theta, minus = theta;
    setter(plus, base + h);
    setter(minus, base - h);
    return (eval(plus) - eval(minus)) / (2.0 * h);
  };
  out.value = eval(theta);
  if (mode != GradMode::Phase2) {
    out.d_a0 = slot([](HyperParams &t, double v) { t.kernel.a0 = v; }, theta.kernel.a0);
    Vector de(theta.dim());
    for (Index d = 0; d < theta.dim(); ++d)
      de(d) = slot([d](HyperParams &t, double v) { t.kernel.eta(d) = v; }, theta.kernel.eta(d));
    out.d_eta = de;
    Matrix dB(theta.m_ind(), theta.dim());
    for (Index j = 0; j < theta.m_ind(); ++j)
      for (Index d = 0; d < theta.dim(); ++d)
        dB(j, d) = slot([j, d](HyperParams &t, double v) { t.inducing.points(j, d) = v; },
                        theta.inducing.points(j, d));
    out.d_B = dB;
  }
  if (mode != GradMode::Phase1) {
    Vector dw(theta.m_basis());
    for (Index j = 0; j < theta.m_basis(); ++j)
      dw(j) = slot([j](HyperParams &t, double v) { t.w(j) = v; }, theta.w(j));
    out.d_w = dw;
  }
  out.d_sigma2 = slot([](HyperParams &t, double v) { t.sigma2 = v; }, theta.sigma2);
  return out;
}

void expect_gradients_match(const EvidenceResult &a, const EvidenceResult &n, double rel,
                            double floor, const std::string &label) {
  ASSERT_EQ(a.d_a0.has_value(), n.d_a0.has_value()) << label;
  if (a.d_a0)
    EXPECT_TRUE(close_rel(Vector::Constant(1, *a.d_a0), Vector::Constant(1, *n.d_a0), rel, floor))
        << label << " a0";
  if (a.d_eta)
    EXPECT_TRUE(close_rel(*a.d_eta, *n.d_eta, rel, floor)) << label << " eta";
  if (a.d_B)
    EXPECT_TRUE(close_rel(*a.d_B, *n.d_B, rel, floor)) << label << " B";
  ASSERT_EQ(a.d_w.has_value(), n.d_w.has_value()) << label;
  if (a.d_w)
    EXPECT_TRUE(close_rel(*a.d_w, *n.d_w, rel, floor)) << label << " w";
  EXPECT_TRUE(close_rel(Vector::Constant(1, *a.d_sigma2), Vector::Constant(1, *n.d_sigma2), rel,
                        floor))
      << label << " sigma2";
}

} // namespace

TEST(LogEvidence, ScalarCase) {
  // N = M = 1: choose B = x so phi = k(x,b) u = a0 * (1 / a0) = 1.
  HyperParams theta;
  theta.kernel.a0 = 1.0;
  theta.kernel.eta = Vector::Ones(1);
  theta.inducing.points = Matrix::Zero(1, 1);
  theta.w = Vector::Ones(1);
  theta.sigma2 = 1.0;
  const double v = log_evidence(theta, Matrix::Zero(1, 1), Vector::Zero(1), ModelVariant::Finite);
  EXPECT_NEAR(v, -0.5 * std::log(4.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(v, -1.2655121, 1e-7);
}

TEST(LogEvidence, ZeroPriorIsIidGaussian) {
  auto inst = random_instance(15, 4, 2, 1);
  inst.theta.w.setZero();
  double iid = 0.0;
  for (Index i = 0; i < inst.y.size(); ++i)
    iid += -0.5 * std::log(2 * std::numbers::pi * inst.theta.sigma2) -
           inst.y(i) * inst.y(i) / (2 * inst.theta.sigma2);
  EXPECT_NEAR(log_evidence(inst.theta, inst.X, inst.y, ModelVariant::Finite), iid, 1e-10);
}

TEST(LogEvidence, MatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(50, 6, 2, seed);
    for (auto variant : kVariants)
      for (bool tied : {false, true}) {
        const double dense =
            dense_log_evidence(dense_covariance(inst.theta, inst.X, variant, tied), inst.y);
        const double v = log_evidence(inst.theta, inst.X, inst.y, variant,
                                      tied ? GradMode::Phase1 : GradMode::Joint);
        EXPECT_NEAR(v, dense, 1e-8 * std::abs(dense)) << "seed " << seed;
      }
  }
}

TEST(LogEvidence, Phase1EqualsExplicitNystromCovariance) {
  const auto inst = random_instance(40, 5, 2, 77);
  const Matrix Kxb = dense_kernel(inst.X, inst.theta.inducing.points, inst.theta.kernel);
  const Matrix Kbb =
      dense_kernel(inst.theta.inducing.points, inst.theta.inducing.points, inst.theta.kernel);
  Matrix C = Kxb * Kbb.ldlt().solve(Kxb.transpose());
  C.diagonal().array() += inst.theta.sigma2;
  const double nystrom = dense_log_evidence(C, inst.y);
  EXPECT_NEAR(log_evidence(inst.theta, inst.X, inst.y, ModelVariant::Finite, GradMode::Phase1),
              nystrom, 1e-8 * std::abs(nystrom));
}

TEST(LogEvidence, InvariantUnderInducingPermutation) {
  const auto inst = random_instance(30, 5, 2, 21);
  HyperParams permuted = inst.theta;
  permuted.inducing.points = inst.theta.inducing.points.colwise().reverse();
  const double a = log_evidence(inst.theta, inst.X, inst.y, ModelVariant::Finite, GradMode::Phase1);
  const double b = log_evidence(permuted, inst.X, inst.y, ModelVariant::Finite, GradMode::Phase1);
  EXPECT_NEAR(a, b, 1e-10 * std::abs(a));
}

TEST(GradW, ZeroFeaturesGiveZeroGradient) {
  auto inst = random_instance(10, 3, 1, 4);
  // Inducing points far away make phi vanish.
  inst.theta.inducing.points.array() += 1e3;
  const Vector g = grad_w(inst.theta, inst.X, inst.y);
  EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GradW, ScalarClosedForm) {
  HyperParams theta;
  theta.kernel.a0 = 1.0;
  theta.kernel.eta = Vector::Ones(1);
  theta.inducing.points = Matrix::Zero(1, 1);
  theta.w = Vector::Constant(1, 0.7);
  theta.sigma2 = 0.3;
  const double y = 1.3, phi = 1.0;
  const double c = theta.w(0) * phi * phi + theta.sigma2;
  const double expected = -0.5 * phi * phi / c + y * y * phi * phi / (2 * c * c);
  const Vector g = grad_w(theta, Matrix::Zero(1, 1), Vector::Constant(1, y));
  EXPECT_NEAR(g(0), expected, 1e-12);
}

TEST(GradW, MatchesFiniteDifferences) {
  const auto inst = random_instance(30, 5, 2, 5);
  const auto analytic =
      evidence_and_grad(inst.theta, inst.X, inst.y, ModelVariant::Finite, GradMode::Phase2);
  const auto numeric =
      numeric_gradient(inst.theta, inst.X, inst.y, ModelVariant::Finite, GradMode::Phase2);
  EXPECT_TRUE(close_rel(*analytic.d_w, *numeric.d_w, 1e-5, 1e-7));
}

TEST(GradB, ZeroEtaGivesZeroGradient) {
  auto inst = random_instance(20, 4, 2, 8);
  inst.theta.kernel.eta.setZero();
  inst.theta.w = Vector::Ones(1);
  // With eta = 0 K_BB is rank one; keep a single basis function.
  const Matrix g = grad_B(inst.theta, inst.X, inst.y, GradMode::Phase1);
  EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GradB, ReflectionSymmetry) {
  // X, B and y symmetric about the origin in 1-D.
  HyperParams theta;
  theta.kernel.a0 = 1.0;
  theta.kernel.eta = Vector::Constant(1, 1.5);
  theta.inducing.points = (Matrix(4, 1) << -1.2, -0.4, 0.4, 1.2).finished();
  theta.w = Vector::Ones(4);
  theta.sigma2 = 0.1;
  const Vector xs = Vector::LinSpaced(7, 0.2, 2.0);
  Matrix X(14, 1);
  Vector y(14);
  for (Index i = 0; i < 7; ++i) {
    X(i, 0) = xs(i);
    X(7 + i, 0) = -xs(i);
    y(i) = y(7 + i) = std::cos(xs(i));
  }
  const Matrix g = grad_B(theta, X, y, GradMode::Phase1);
  EXPECT_NEAR(g(0, 0) + g(3, 0), 0.0, 1e-10);
  EXPECT_NEAR(g(1, 0) + g(2, 0), 0.0, 1e-10);
}

TEST(GradB, Phase1MatchesFiniteDifferences) {
  const auto inst = random_instance(30, 5, 3, 31);
  const auto analytic =
      evidence_and_grad(inst.theta, inst.X, inst.y, ModelVariant::Finite, GradMode::Phase1);
  const auto numeric =
      numeric_gradient(inst.theta, inst.X, inst.y, ModelVariant::Finite, GradMode::Phase1);
  EXPECT_TRUE(close_rel(*analytic.d_B, *numeric.d_B, 1e-5, 1e-7));
}

TEST(GradKernelNoise, SigmaAtZeroFeatures) {
  auto inst = random_instance(12, 3, 1, 6);
  inst.theta.inducing.points.array() += 1e3;
  const auto g = grad_kernel_noise(inst.theta, inst.X, inst.y, GradMode::Phase2);
  const double s2 = inst.theta.sigma2;
  const double expected =
      -0.5 * (static_cast<double>(inst.y.size()) / s2 - inst.y.squaredNorm() / (s2 * s2));
  EXPECT_NEAR(g.d_sigma2, expected, 1e-9 * std::abs(expected));
  EXPECT_FALSE(g.d_a0.has_value());
}

// In Joint mode with free w the Finite model depends on a0 only through
// Phi = K_XB U, and K_XB scales with a0 while U scales with 1/a0.
TEST(GradKernelNoise, JointFiniteEvidenceIsFlatInA0) {
  const auto inst = random_instance(25, 4, 2, 19);
  const auto g = grad_kernel_noise(inst.theta, inst.X, inst.y, GradMode::Joint);
  const auto numeric =
      numeric_gradient(inst.theta, inst.X, inst.y, ModelVariant::Finite, GradMode::Joint);
  EXPECT_NEAR(*numeric.d_a0, 0.0, 1e-6);
  EXPECT_NEAR(*g.d_a0, 0.0, 1e-9);
}

TEST(EvidenceAndGrad, BlocksPresentPerMode) {
  const auto inst = random_instance(20, 4, 2, 3);
  const auto p2 = evidence_and_grad(inst.theta, inst.X, inst.y, ModelVariant::Finite, GradMode::Phase2);
  EXPECT_TRUE(p2.d_w && p2.d_sigma2);
  EXPECT_FALSE(p2.d_a0 || p2.d_eta || p2.d_B);
  const auto p1 = evidence_and_grad(inst.theta, inst.X, inst.y, ModelVariant::Finite, GradMode::Phase1);
  EXPECT_TRUE(p1.d_a0 && p1.d_eta && p1.d_B && p1.d_sigma2);
  EXPECT_FALSE(p1.d_w);
  const auto j = evidence_and_grad(inst.theta, inst.X, inst.y, ModelVariant::Finite, GradMode::Joint);
  EXPECT_TRUE(j.d_a0 && j.d_eta && j.d_B && j.d_w && j.d_sigma2);
}

TEST(EvidenceAndGrad, ValueIsBitwiseLogEvidence) {
  const auto inst = random_instance(20, 4, 2, 3);
  for (auto variant : kVariants)
    for (auto mode : {GradMode::Phase1, GradMode::Phase2, GradMode::Joint}) {
      const auto r = evidence_and_grad(inst.theta, inst.X, inst.y, variant, mode);
      EXPECT_EQ(r.value, log_evidence(inst.theta, inst.X, inst.y, variant, mode));
    }
}

TEST(EvidenceAndGrad, Phase1RoutesAgree) {
  for (std::uint64_t seed = 40; seed < 45; ++seed) {
    const auto inst = random_instance(30, 5, 2, seed);
    for (auto variant : kVariants) {
      const auto direct = detail::phase1_direct(inst.theta, inst.X, inst.y, variant);
      const auto perturbed =
          detail::perturbation_route(inst.theta, inst.X, inst.y, variant, GradMode::Phase1);
      expect_gradients_match(direct, perturbed, 1e-6, 1e-9, "seed " + std::to_string(seed));
    }
  }
}

// 20 random instances, both variants, all three modes.
TEST(EvidenceAndGrad, AllBlocksMatchFiniteDifferences) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const Index N = 10 + static_cast<Index>(rng() % 41);
    const Index M = 2 + static_cast<Index>(rng() % 7);
    const Index D = 1 + static_cast<Index>(rng() % 4);
    const auto inst = random_instance(N, M, D, 1000 + trial);
    for (auto variant : kVariants)
      for (auto mode : {GradMode::Phase1, GradMode::Phase2, GradMode::Joint}) {
        const std::string label = "trial " + std::to_string(trial) + " " + to_string(variant) +
                                  " " + to_string(mode);
        EvidenceResult analytic;
        try {
          analytic = evidence_and_grad(inst.theta, inst.X, inst.y, variant, mode);
        } catch (const Error &e) {
          ADD_FAILURE() << label << ": " << e.what();
          continue;
        }
        ASSERT_TRUE(analytic.all_finite()) << label;
        const auto numeric = numeric_gradient(inst.theta, inst.X, inst.y, variant, mode);
        expect_gradients_match(analytic, numeric, 1e-5, 1e-7, label);
      }
  }
}

TEST(EvidenceAndGrad, TruncatedBasisMatchesFiniteDifferences) {
  const auto inst = random_instance(30, 6, 2, 314, 3);
  for (auto mode : {GradMode::Phase1, GradMode::Joint}) {
    const auto analytic = evidence_and_grad(inst.theta, inst.X, inst.y, ModelVariant::Finite, mode);
    const auto numeric = numeric_gradient(inst.theta, inst.X, inst.y, ModelVariant::Finite, mode);
    expect_gradients_match(analytic, numeric, 1e-5, 1e-7, to_string(mode));
  }
}

TEST(EvidenceAndGrad, JointRefusesTinyEigengap) {
  auto inst = random_instance(20, 4, 1, 12);
  // Two pairs of nearly coincident points give two tiny, nearly equal eigenvalues.
  inst.theta.inducing.points = (Matrix(4, 1) << 0.0, 1e-4, 1.5, 1.5 + 1e-4).finished();
  try {
    evidence_and_grad(inst.theta, inst.X, inst.y, ModelVariant::Finite, GradMode::Joint);
    FAIL() << "expected EigengapTooSmall";
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::EigengapTooSmall);
  }
}
