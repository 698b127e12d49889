#include "eigengp/evidence.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace eigengp {

namespace {
std::string fmt_g(const char *f, double a, double b, double c) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}
} // namespace

const char *to_string(GradMode mode) {
  switch (mode) {
  case GradMode::Phase1: return "phase1";
  case GradMode::Phase2: return "phase2";
  case GradMode::Joint: return "joint";
  }
  return "unknown";
}

GradMode grad_mode_from_string(const std::string &s) {
  if (s == "phase1")
    return GradMode::Phase1;
  if (s == "phase2")
    return GradMode::Phase2;
  if (s == "joint")
    return GradMode::Joint;
  throw Error(ErrorKind::InvalidArgument, "unknown gradient mode '" + s + "'");
}

bool EvidenceResult::all_finite() const {
  if (!std::isfinite(value))
    return false;
  if (d_a0 && !std::isfinite(*d_a0))
    return false;
  if (d_sigma2 && !std::isfinite(*d_sigma2))
    return false;
  if (d_eta && !d_eta->allFinite())
    return false;
  if (d_B && !d_B->allFinite())
    return false;
  if (d_w && !d_w->allFinite())
    return false;
  return true;
}

namespace {

double evidence_value(const CovarianceAssembly &a, const Vector &y) {
  const double n = static_cast<double>(y.size());
  return -0.5 * a.stats.logdet - 0.5 * y.dot(a.stats.alpha) -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

/// Pieces of G = alpha alpha^T - C^{-1} needed without forming it.
///
/// With the PlusCorrection variant the diagonal term a0 - ktilde(x_i, x_i)
/// also depends on ktilde, which subtracts diag(g) on unclamped rows; that
/// is carried in `plus_diag`.
struct Adjoint {
  const CovarianceAssembly *a = nullptr;
  Vector inv_diag;  // diag(C^{-1})
  Vector g;         // diag(G)
  Vector plus_mask; // 1 where the plus correction is active, else 0

  explicit Adjoint(const CovarianceAssembly &assembly) : a(&assembly) {
    inv_diag = a->stats.inverse_diagonal();
    g = a->stats.alpha.array().square().matrix() - inv_diag;
    plus_mask = Vector::Zero(g.size());
    if (a->plus)
      plus_mask = (!a->clamped).cast<double>().matrix();
  }

  double d_sigma2() const { return 0.5 * g.sum(); }
  double d_a0_direct() const { return 0.5 * plus_mask.dot(g); }

  /// First trace operand, C^{-1} with its plus-diagonal removed, applied to Z.
  Matrix first(const Matrix &Z) const {
    Matrix out = a->stats.solve(Z);
    if (a->plus)
      out -= (plus_mask.array() * inv_diag.array()).matrix().asDiagonal() * Z;
    return out;
  }

  /// Second trace operand, alpha alpha^T with its plus-diagonal removed.
  Matrix second(const Matrix &Z) const {
    const Vector &alpha = a->stats.alpha;
    Matrix out = alpha * (alpha.transpose() * Z);
    if (a->plus)
      out -= (plus_mask.array() * alpha.array().square()).matrix().asDiagonal() * Z;
    return out;
  }

  /// Effective G applied to Z: second(Z) - first(Z).
  Matrix apply(const Matrix &Z) const { return second(Z) - first(Z); }
};

Vector pad(const Vector &head, Index size) {
  Vector out = Vector::Zero(size);
  out.head(head.size()) = head;
  return out;
}

/// Shared Phase2 quantities: dL/dw_j = 1/2 phi_j^T G phi_j.
Vector weight_gradient(const CovarianceAssembly &a, const Matrix &Gamma) {
  return 0.5 * (a.Phi.array() * Gamma.array()).colwise().sum().transpose();
}

/// 4 R X diag(eta) - 4 (R 1 1^T) o (B diag(eta)) - 4 S B diag(eta) + 4 (S 1 1^T) o (B diag(eta))
Matrix trace_derivative_B(const Matrix &R, const Matrix &S, const Matrix &X, const Matrix &B,
                          const Vector &eta) {
  const Vector r = R.rowwise().sum();
  const Vector s = S.rowwise().sum();
  Matrix out = R * X - S * B;
  out += ((s - r).asDiagonal() * B);
  return 4.0 * out * eta.asDiagonal();
}

} // namespace

double log_evidence(const HyperParams &theta, const Matrix &X, const Vector &y,
                    ModelVariant variant, GradMode mode) {
  const CovarianceAssembly a =
      assemble_covariance(theta, X, y, variant, mode == GradMode::Phase1);
  return evidence_value(a, y);
}

namespace detail {

EvidenceResult phase1_direct(const HyperParams &theta, const Matrix &X, const Vector &y,
                             ModelVariant variant) {
  const CovarianceAssembly a = assemble_covariance(theta, X, y, variant, true);
  EIGENGP_REQUIRE(a.basis.m_basis() == a.basis.m_ind(), ErrorKind::InvalidArgument,
                  "direct Phase1 gradient requires a full basis with no dropped pairs");
  const Adjoint adj(a);
  const Matrix &B = theta.inducing.points;
  const Vector &eta = theta.kernel.eta;

  const Matrix Kinv = a.basis.vectors * a.basis.lambda.cwiseInverse().asDiagonal() *
                      a.basis.vectors.transpose();
  const Matrix Kbb = kernel_matrix(B, B, theta.kernel);
  const Matrix P = a.Kxb * Kinv; // K_XB K_BB^{-1}

  const Matrix H1P = adj.first(P);
  const Matrix H2P = adj.second(P);

  // R = (K_BB^{-1} K_BX H) o K_BX,  S = (K_BB^{-1} K_BX H K_XB K_BB^{-1}) o K_BB
  const Matrix R1 = (H1P.transpose().array() * a.Kxb.transpose().array()).matrix();
  const Matrix R2 = (H2P.transpose().array() * a.Kxb.transpose().array()).matrix();
  const Matrix S1 = ((P.transpose() * H1P).array() * Kbb.array()).matrix();
  const Matrix S2 = ((P.transpose() * H2P).array() * Kbb.array()).matrix();

  EvidenceResult out;
  out.value = evidence_value(a, y);
  out.d_B = -0.5 * (trace_derivative_B(R1, S1, X, B, eta) -
                    trace_derivative_B(R2, S2, X, B, eta));

  const Matrix adj_xb = H2P - H1P;
  const Matrix adj_bb = -0.5 * (P.transpose() * adj_xb);
  const KernelGrads<double> kxb(X, B, theta.kernel);
  const KernelGrads<double> kbb(B, B, theta.kernel);
  out.d_eta = kxb.contract_eta(adj_xb) + kbb.contract_eta(adj_bb);
  out.d_a0 = kxb.contract_a0(adj_xb) + kbb.contract_a0(adj_bb) + adj.d_a0_direct();
  out.d_sigma2 = adj.d_sigma2();
  out.warnings = a.basis.warnings;
  return out;
}

EvidenceResult perturbation_route(const HyperParams &theta, const Matrix &X,
                                  const Vector &y, ModelVariant variant, GradMode mode) {
  EIGENGP_REQUIRE(mode != GradMode::Phase2, ErrorKind::InvalidArgument,
                  "Phase2 does not differentiate the basis");
  const bool tied = mode == GradMode::Phase1;
  const CovarianceAssembly a = assemble_covariance(theta, X, y, variant, tied);
  const Adjoint adj(a);
  const Basis &basis = a.basis;
  const Matrix &B = theta.inducing.points;
  const Index M = basis.m_ind();
  const Index m = basis.m_basis();
  const double root_m = std::sqrt(static_cast<double>(M));
  const Vector &lambda = basis.lambda;
  const Vector &mu = basis.spectrum.values;
  const Matrix &Q = basis.spectrum.vectors;
  const Matrix &V = basis.vectors;

  double min_gap = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < m; ++j)
    for (Index k = 0; k < M; ++k)
      if (k != j)
        min_gap = std::min(min_gap, std::abs(lambda(j) - mu(k)));
  if (!tied && min_gap < kMinRelativeEigengap * lambda(0))
    throw Error(ErrorKind::EigengapTooSmall,
                fmt_g("minimum eigengap %.3g below %.3g * lambda_1 (%.6g)", min_gap,
                      kMinRelativeEigengap, lambda(0)));

  const Matrix Gamma = adj.apply(a.Phi);
  const Vector w_bar = weight_gradient(a, Gamma);
  const Matrix phi_bar = Gamma * a.w.asDiagonal();
  const Matrix kxb_bar = phi_bar * basis.U.transpose();
  const Matrix u_bar = a.Kxb.transpose() * phi_bar;

  // U = sqrt(M) V diag(1/lambda)
  Vector lambda_bar(m);
  for (Index j = 0; j < m; ++j)
    lambda_bar(j) = -root_m * V.col(j).dot(u_bar.col(j)) / (lambda(j) * lambda(j));
  if (tied)
    lambda_bar += w_bar / static_cast<double>(M);
  const Matrix v_bar = root_m * u_bar * lambda.cwiseInverse().asDiagonal();

  // d lambda_j = v_j^T dK v_j,  d v_j = sum_{k != j} q_k q_k^T dK v_j / (lambda_j - mu_k)
  Matrix F = Q.transpose() * v_bar;
  for (Index j = 0; j < m; ++j)
    for (Index k = 0; k < M; ++k)
      F(k, j) = (k == j) ? 0.0 : F(k, j) / (lambda(j) - mu(k));
  Matrix kbb_bar = V * lambda_bar.asDiagonal() * V.transpose() + Q * F * V.transpose();
  kbb_bar = 0.5 * (kbb_bar + kbb_bar.transpose()).eval();

  const KernelGrads<double> kxb(X, B, theta.kernel);
  const KernelGrads<double> kbb(B, B, theta.kernel);

  EvidenceResult out;
  out.value = evidence_value(a, y);
  out.d_B = kxb.contract_b(kxb_bar) + kbb.contract_x(kbb_bar) + kbb.contract_b(kbb_bar);
  out.d_eta = kxb.contract_eta(kxb_bar) + kbb.contract_eta(kbb_bar);
  out.d_a0 = kxb.contract_a0(kxb_bar) + kbb.contract_a0(kbb_bar) + adj.d_a0_direct();
  if (!tied)
    out.d_w = pad(w_bar, theta.w.size());
  out.d_sigma2 = adj.d_sigma2();
  out.warnings = basis.warnings;
  return out;
}

} // namespace detail

EvidenceResult evidence_and_grad(const HyperParams &theta, const Matrix &X,
                                 const Vector &y, ModelVariant variant, GradMode mode) {
  switch (mode) {
  case GradMode::Phase2: {
    const CovarianceAssembly a = assemble_covariance(theta, X, y, variant, false);
    const Adjoint adj(a);
    EvidenceResult out;
    out.value = evidence_value(a, y);
    out.d_w = pad(weight_gradient(a, adj.apply(a.Phi)), theta.w.size());
    out.d_sigma2 = adj.d_sigma2();
    out.warnings = a.basis.warnings;
    return out;
  }
  case GradMode::Phase1: {
    // The direct route needs K_BB^{-1}; with dropped or truncated pairs the
    // tied covariance uses a truncated pseudo-inverse instead.
    const Basis probe = build_basis(theta.inducing, theta.kernel, theta.m_basis());
    if (probe.m_basis() == probe.m_ind())
      return detail::phase1_direct(theta, X, y, variant);
    return detail::perturbation_route(theta, X, y, variant, mode);
  }
  case GradMode::Joint:
    return detail::perturbation_route(theta, X, y, variant, mode);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown gradient mode");
}

Vector grad_w(const HyperParams &theta, const Matrix &X, const Vector &y,
              ModelVariant variant) {
  return *evidence_and_grad(theta, X, y, variant, GradMode::Phase2).d_w;
}

Matrix grad_B(const HyperParams &theta, const Matrix &X, const Vector &y, GradMode mode,
              ModelVariant variant) {
  EIGENGP_REQUIRE(mode != GradMode::Phase2, ErrorKind::InvalidArgument,
                  "grad_B requires Phase1 or Joint mode");
  return *evidence_and_grad(theta, X, y, variant, mode).d_B;
}

KernelNoiseGrad grad_kernel_noise(const HyperParams &theta, const Matrix &X,
                                  const Vector &y, GradMode mode, ModelVariant variant) {
  const EvidenceResult r = evidence_and_grad(theta, X, y, variant, mode);
  KernelNoiseGrad out;
  out.d_a0 = r.d_a0;
  out.d_eta = r.d_eta;
  out.d_sigma2 = *r.d_sigma2;
  return out;
}

} // namespace eigengp
