#pragma once

#include "eigengp/optimizer.hpp"

namespace eigengp {

inline constexpr Index kDefaultFullGpMaxN = 5000;

/// Exact GP with a dense Cholesky factor of K_XX + sigma2 I.
struct FullGpModel {
  Kernel kernel;
  double sigma2 = 0.0;
  Matrix X;
  Matrix chol_lower;
  Vector alpha;
};

struct FullGpEvidence {
  double value = 0.0;
  double d_a0 = 0.0;
  Vector d_eta;
  double d_sigma2 = 0.0;
};

FullGpEvidence full_gp_evidence(const Matrix &X, const Vector &y, const Kernel &kernel,
                                double sigma2, Index max_n = kDefaultFullGpMaxN);

FullGpModel full_gp_fit(const Matrix &X, const Vector &y, const Kernel &kernel, double sigma2,
                        Index max_n = kDefaultFullGpMaxN);

struct FullGpTrainResult {
  FullGpModel model;
  OptTrace trace;
};

/// Evidence maximization over log a0, log eta (nonzero entries) and log sigma2.
FullGpTrainResult full_gp_train(const Matrix &X, const Vector &y, const Kernel &kernel0,
                                double sigma2_0, const TrainOptions &opts = {},
                                Index max_n = kDefaultFullGpMaxN);

PredictiveDistribution full_gp_predict(const FullGpModel &m, const Matrix &Xstar);

/// How the Nystrom predictor treats the test blocks.
///  Exact:   k(x*, X) and k(x*, x*) from the kernel, training block low-rank.
///  LowRank: every block through K_.B K_BB^{-1} K_B.; a proper GP, equal to
///           the eigenfunction model with default weights.
enum class NystromCross { Exact, LowRank };

const char *to_string(NystromCross c);
NystromCross nystrom_cross_from_string(const std::string &s);

inline constexpr double kVarianceClamp = 1e-12;

struct NystromPrediction {
  PredictiveDistribution dist;   // variance clamped at kVarianceClamp
  Vector raw_variance;
  Eigen::Array<bool, Eigen::Dynamic, 1> negative;
  Index negative_count = 0;
};

NystromPrediction nystrom_gp_predict(const Matrix &X, const Vector &y, const Matrix &B,
                                     const Kernel &p, double sigma2, const Matrix &Xstar,
                                     NystromCross cross = NystromCross::Exact);

struct KMeansResult {
  Matrix centers;
  std::vector<Index> assignment;
  std::vector<double> objective;  // after each assignment step
  int iterations = 0;
};

/// Lloyd iterations from k-means++ seeding; deterministic for a fixed seed.
KMeansResult kmeans(const Matrix &X, Index M, std::uint64_t seed, int max_iters = 100);

struct SubsetInit {
  Kernel kernel;
  double sigma2 = 0.0;
  std::vector<Index> subset;
};

/// Starting eta for the subset GP is 0.5 / var(x_d) times each of these.
inline constexpr double kSubsetEtaMultipliers[] = {1.0, 4.0, 16.0, 64.0};

/// Full GP trained on a random subset of round(fraction * N) points,
/// restarted from several lengthscales; the best evidence wins.
SubsetInit subset_gp_init(const Matrix &X, const Vector &y, double fraction, std::uint64_t seed,
                          const TrainOptions &opts = {});

/// Starting hyperparameters: kernel and noise from subset_gp_init, inducing
/// points from k-means, w = default_weights.
HyperParams initialize_hyperparams(const Matrix &X, const Vector &y, Index m_ind, Index m_basis,
                                   std::uint64_t seed, double subset_fraction = 0.1,
                                   const TrainOptions &opts = {});

} // namespace eigengp
