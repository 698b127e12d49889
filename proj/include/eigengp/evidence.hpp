#pragma once

#include "eigengp/model.hpp"

#include <optional>

namespace eigengp {

/// Which hyperparameter blocks an evidence evaluation differentiates.
///
///  Phase1: B, eta, a0, sigma2 with w tied to lambda / M_ind.
///  Phase2: w, sigma2 with the basis held fixed.
///  Joint:  every block at once.
enum class GradMode { Phase1, Phase2, Joint };

const char *to_string(GradMode mode);
GradMode grad_mode_from_string(const std::string &s);

struct EvidenceResult {
  double value = 0.0;
  std::optional<double> d_a0;
  std::optional<Vector> d_eta;
  std::optional<Matrix> d_B;
  std::optional<Vector> d_w;
  std::optional<double> d_sigma2;
  std::vector<std::string> warnings;

  bool all_finite() const;
};

/// Relative eigengap below which eigenvector derivatives are refused.
inline constexpr double kMinRelativeEigengap = 1e-8;

/// ln p(y | theta) = -1/2 ln det C_N - 1/2 y^T C_N^{-1} y - N/2 ln(2 pi).
/// In Phase1 mode the prior variances are tied to default_weights.
double log_evidence(const HyperParams &theta, const Matrix &X, const Vector &y,
                    ModelVariant variant, GradMode mode = GradMode::Joint);

EvidenceResult evidence_and_grad(const HyperParams &theta, const Matrix &X,
                                 const Vector &y, ModelVariant variant, GradMode mode);

/// Gradient with respect to the prior variances w (basis fixed).
Vector grad_w(const HyperParams &theta, const Matrix &X, const Vector &y,
              ModelVariant variant = ModelVariant::Finite);

/// Gradient with respect to the inducing points (Phase1 or Joint).
Matrix grad_B(const HyperParams &theta, const Matrix &X, const Vector &y, GradMode mode,
              ModelVariant variant = ModelVariant::Finite);

struct KernelNoiseGrad {
  std::optional<double> d_a0;
  std::optional<Vector> d_eta;
  double d_sigma2 = 0.0;
};

KernelNoiseGrad grad_kernel_noise(const HyperParams &theta, const Matrix &X,
                                  const Vector &y, GradMode mode,
                                  ModelVariant variant = ModelVariant::Finite);

namespace detail {

/// Phase1 gradient through the direct K_XB K_BB^{-1} K_BX route with the R
/// and S matrices. Requires a full, undropped basis. Exposed so tests can
/// compare it with the eigen-perturbation route.
EvidenceResult phase1_direct(const HyperParams &theta, const Matrix &X, const Vector &y,
                             ModelVariant variant);

/// Phase1 / Joint gradient through first-order eigenpair perturbation.
EvidenceResult perturbation_route(const HyperParams &theta, const Matrix &X,
                                  const Vector &y, ModelVariant variant, GradMode mode);

} // namespace detail

} // namespace eigengp
