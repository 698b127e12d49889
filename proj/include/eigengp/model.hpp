#pragma once

#include "eigengp/eigenbasis.hpp"

#include <string>
#include <vector>

namespace eigengp {

using Kernel = KernelParams<double>;
using Inducing = InducingSet<double>;
using Basis = EigenBasis<double>;

/// Full parameter bundle: kernel, inducing points, prior variances of the
/// eigenfunction weights, and observation noise.
struct HyperParams {
  Kernel kernel;
  Inducing inducing;
  Vector w;            // prior variances, length M_basis
  double sigma2 = 1.0; // noise variance

  Index dim() const { return kernel.dim(); }
  Index m_ind() const { return inducing.size(); }
  Index m_basis() const { return w.size(); }

  /// Throws InvalidArgument / NonPositiveNoise when a constraint is broken.
  void validate() const;
};

enum class ModelVariant { Finite, PlusCorrection };

const char *to_string(ModelVariant v);
ModelVariant variant_from_string(const std::string &s);

/// Everything needed to evaluate C_N = Phi diag(w) Phi^T + diag(noise) on a
/// training set: the basis, features, and the factorized low-rank system.
///
/// For the PlusCorrection variant noise_i = sigma2 + max(0, a0 - ktilde_ii);
/// entries where the correction was clamped are flagged in `clamped`.
struct CovarianceAssembly {
  Basis basis;
  Matrix Kxb;
  Matrix Phi;
  Vector w;
  Vector ktilde_diag;
  Vector noise;
  Eigen::Array<bool, Eigen::Dynamic, 1> clamped;
  bool plus = false;
  LowRankStats<double> stats;
};

/// Builds the training-side covariance. With tie_weights the prior
/// variances are replaced by default_weights(basis) (the Nystrom choice).
CovarianceAssembly assemble_covariance(const HyperParams &theta, const Matrix &X,
                                       const Vector &y, ModelVariant variant,
                                       bool tie_weights);

/// Prior variances actually used against a basis: truncated to the number
/// of kept eigenpairs.
Vector effective_weights(const HyperParams &theta, const Basis &basis);

struct PredictiveDistribution {
  Vector mean;
  Vector variance; // includes sigma2
  std::vector<std::string> warnings;
};

struct PosteriorAlpha {
  Vector mean;
  Matrix covariance;
};

struct TrainedModel {
  HyperParams theta;
  Basis basis;
  ModelVariant variant = ModelVariant::Finite;

  // Cache. alpha is only present when the model was fit in this process.
  Vector alpha;
  Vector weight_mean;                // posterior mean of the eigenfunction weights
  std::vector<Index> active;         // weights with w_j > 0
  Vector sqrt_w_active;
  Matrix inner_lower;                // Cholesky of I + S Phi^T D^-1 Phi S
  Vector phi_col_norms;
  double ybar_train = 0.0;
  Index n_train = 0;
  std::string data_digest;
  std::vector<std::string> warnings;
};

/// ktilde(X1, X2) = Phi(X1) diag(w) Phi(X2)^T.
Matrix ktilde(const Matrix &X1, const Matrix &X2, const Basis &basis, const Vector &w);

TrainedModel fit(const Matrix &X, const Vector &y, const HyperParams &theta,
                 ModelVariant variant);

PredictiveDistribution predict(const TrainedModel &m, const Matrix &Xstar);

PosteriorAlpha posterior_alpha(const TrainedModel &m);

/// SHA-256 over the raw bytes of X and y (row-major, little endian doubles).
std::string data_digest(const Matrix &X, const Vector &y);

} // namespace eigengp
