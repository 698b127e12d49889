#include "eigengp/model.hpp"

#include "eigengp/digest.hpp"

#include <cmath>
#include <cstring>

namespace eigengp {

void HyperParams::validate() const {
  EIGENGP_REQUIRE(kernel.valid(), ErrorKind::InvalidArgument,
                  "kernel parameters must satisfy a0 > 0, eta >= 0");
  EIGENGP_REQUIRE(inducing.size() >= 1, ErrorKind::InvalidArgument,
                  "at least one inducing point is required");
  EIGENGP_REQUIRE(inducing.dim() == kernel.dim(), ErrorKind::DimensionMismatch,
                  "inducing points have " + std::to_string(inducing.dim()) +
                      " columns, kernel has D=" + std::to_string(kernel.dim()));
  EIGENGP_REQUIRE(w.size() >= 1 && w.size() <= inducing.size(),
                  ErrorKind::InvalidArgument, "M_basis must lie in [1, M_ind]");
  EIGENGP_REQUIRE((w.array() >= 0.0).all() && w.allFinite(), ErrorKind::InvalidArgument,
                  "prior variances w must be finite and nonnegative");
  EIGENGP_REQUIRE(sigma2 > 0.0 && std::isfinite(sigma2), ErrorKind::NonPositiveNoise,
                  "sigma2 must be positive");
}

const char *to_string(ModelVariant v) {
  return v == ModelVariant::Finite ? "finite" : "plus";
}

ModelVariant variant_from_string(const std::string &s) {
  if (s == "finite")
    return ModelVariant::Finite;
  if (s == "plus")
    return ModelVariant::PlusCorrection;
  throw Error(ErrorKind::InvalidArgument, "unknown model variant '" + s + "'");
}

Vector effective_weights(const HyperParams &theta, const Basis &basis) {
  return theta.w.head(basis.m_basis());
}

CovarianceAssembly assemble_covariance(const HyperParams &theta, const Matrix &X,
                                       const Vector &y, ModelVariant variant,
                                       bool tie_weights) {
  theta.validate();
  EIGENGP_REQUIRE(X.cols() == theta.dim(), ErrorKind::DimensionMismatch,
                  "training inputs have " + std::to_string(X.cols()) +
                      " columns, expected " + std::to_string(theta.dim()));
  EIGENGP_REQUIRE(X.rows() == y.size() && X.rows() >= 1, ErrorKind::DimensionMismatch,
                  "X rows and y length must match and be positive");
  EIGENGP_REQUIRE(y.allFinite(), ErrorKind::InvalidArgument, "targets must be finite");

  CovarianceAssembly a;
  a.basis = build_basis(theta.inducing, theta.kernel, theta.m_basis());
  a.Kxb = kernel_matrix(X, theta.inducing.points, theta.kernel);
  a.Phi = a.Kxb * a.basis.U;
  a.w = tie_weights ? default_weights(a.basis) : effective_weights(theta, a.basis);
  a.ktilde_diag = a.Phi.array().square().matrix() * a.w;
  a.plus = variant == ModelVariant::PlusCorrection;
  a.noise = Vector::Constant(X.rows(), theta.sigma2);
  a.clamped = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(X.rows(), false);
  if (a.plus) {
    const Eigen::ArrayXd correction = theta.kernel.a0 - a.ktilde_diag.array();
    a.clamped = correction < 0.0;
    a.noise.array() += correction.max(0.0);
  }
  a.stats = lowrank_stats_diag(a.Phi, a.w, a.noise, y);
  return a;
}

Matrix ktilde(const Matrix &X1, const Matrix &X2, const Basis &basis, const Vector &w) {
  EIGENGP_REQUIRE(w.size() == basis.m_basis(), ErrorKind::DimensionMismatch,
                  "w length does not match the basis");
  EIGENGP_REQUIRE((w.array() >= 0.0).all(), ErrorKind::InvalidArgument,
                  "prior variances w must be nonnegative");
  return eval_phi(basis, X1) * w.asDiagonal() * eval_phi(basis, X2).transpose();
}

TrainedModel fit(const Matrix &X, const Vector &y, const HyperParams &theta,
                 ModelVariant variant) {
  CovarianceAssembly a = assemble_covariance(theta, X, y, variant, false);

  TrainedModel m;
  m.theta = theta;
  m.variant = variant;
  m.alpha = a.stats.alpha;
  m.weight_mean = a.w.asDiagonal() * (a.Phi.transpose() * a.stats.alpha);
  m.active = a.stats.active;
  m.sqrt_w_active.resize(static_cast<Index>(m.active.size()));
  for (std::size_t k = 0; k < m.active.size(); ++k)
    m.sqrt_w_active(static_cast<Index>(k)) = std::sqrt(a.w(m.active[k]));
  m.inner_lower = a.stats.inner_factor.lower_triangular;
  m.phi_col_norms = a.Phi.colwise().norm().transpose();
  m.ybar_train = y.mean();
  m.n_train = X.rows();
  m.data_digest = data_digest(X, y);
  m.warnings = a.basis.warnings;
  if (a.plus && a.clamped.any())
    m.warnings.push_back(std::to_string(a.clamped.count()) +
                         " training points had ktilde(x,x) > a0; correction clamped at 0");
  m.basis = std::move(a.basis);
  return m;
}

namespace {

/// Columns of L^{-1} S Phi_active^T; squared column norms are the latent
/// posterior variances.
Matrix whitened_features(const TrainedModel &m, const Matrix &Phistar) {
  const Index a = static_cast<Index>(m.active.size());
  Matrix T(a, Phistar.rows());
  for (Index k = 0; k < a; ++k)
    T.row(k) = m.sqrt_w_active(k) * Phistar.col(m.active[static_cast<std::size_t>(k)]).transpose();
  if (a > 0)
    m.inner_lower.triangularView<Eigen::Lower>().solveInPlace(T);
  return T;
}

} // namespace

PredictiveDistribution predict(const TrainedModel &m, const Matrix &Xstar) {
  EIGENGP_REQUIRE(Xstar.cols() == m.theta.dim(), ErrorKind::DimensionMismatch,
                  "test inputs have " + std::to_string(Xstar.cols()) +
                      " columns, model expects " + std::to_string(m.theta.dim()));
  const Matrix Phistar = eval_phi(m.basis, Xstar);
  PredictiveDistribution out;
  out.mean = Phistar * m.weight_mean;

  const Matrix T = whitened_features(m, Phistar);
  Vector latent = T.colwise().squaredNorm().transpose();
  if (m.variant == ModelVariant::PlusCorrection) {
    const Vector w = effective_weights(m.theta, m.basis);
    const Eigen::ArrayXd kd = (Phistar.array().square().matrix() * w).array();
    const Eigen::ArrayXd correction = m.theta.kernel.a0 - kd;
    const Index negative = (correction < 0.0).count();
    if (negative > 0)
      out.warnings.push_back(std::to_string(negative) +
                             " test points had ktilde(x,x) > a0; correction clamped at 0");
    latent.array() += correction.max(0.0);
  }
  out.variance = latent.array() + m.theta.sigma2;
  return out;
}

PosteriorAlpha posterior_alpha(const TrainedModel &m) {
  const Index mb = m.basis.m_basis();
  const Index a = static_cast<Index>(m.active.size());
  PosteriorAlpha out;
  out.mean = m.weight_mean;
  out.covariance = Matrix::Zero(mb, mb);
  if (a == 0)
    return out;
  // Sigma = S (L L^T)^{-1} S
  Matrix Linv = Matrix::Identity(a, a);
  m.inner_lower.triangularView<Eigen::Lower>().solveInPlace(Linv);
  const Matrix SLinvT = m.sqrt_w_active.asDiagonal() * Linv.transpose();
  const Matrix core = SLinvT * SLinvT.transpose();
  for (Index i = 0; i < a; ++i)
    for (Index j = 0; j < a; ++j)
      out.covariance(m.active[static_cast<std::size_t>(i)],
                     m.active[static_cast<std::size_t>(j)]) = core(i, j);
  return out;
}

std::string data_digest(const Matrix &X, const Vector &y) {
  std::string bytes;
  const auto append = [&bytes](double v) {
    char buf[sizeof(double)];
    std::memcpy(buf, &v, sizeof(double));
    bytes.append(buf, sizeof(double));
  };
  append(static_cast<double>(X.rows()));
  append(static_cast<double>(X.cols()));
  for (Index i = 0; i < X.rows(); ++i)
    for (Index d = 0; d < X.cols(); ++d)
      append(X(i, d));
  for (Index i = 0; i < y.size(); ++i)
    append(y(i));
  return sha256_hex(bytes);
}

} // namespace eigengp
