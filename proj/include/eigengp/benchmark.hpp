#pragma once

#include "eigengp/baselines.hpp"
#include "eigengp/dataio.hpp"
#include "eigengp/metrics.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace eigengp {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char *kToolVersion = "0.1.0";

enum class Method { EigenGP, EigenGPStar, EigenGPPlus, Nystrom, NystromStar, FullGP };

const char *to_string(Method m);
Method method_from_string(const std::string &s);
const std::vector<Method> &all_methods();

/// Kernel and noise given by hand instead of the subset GP.
struct ExplicitInit {
  Kernel kernel;
  double sigma2 = 0.0;
};

struct RunConfig {
  Method method = Method::EigenGP;
  Index m_ind = 14;
  Index m_basis = 0;  // 0 = m_ind
  std::uint64_t seed = 0;
  double subset_fraction = 0.1;
  std::optional<ExplicitInit> init;
  TrainOptions train;
  NystromCross cross = NystromCross::Exact;
  NmseDenominator denominator = NmseDenominator::Standard;

  Index basis_size() const { return m_basis > 0 ? m_basis : m_ind; }
  void validate() const;
  Json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static RunConfig from_json(const Json &j, const RunConfig &base);
  static RunConfig from_json(const Json &j);
  std::string hash() const;
};

/// A trained method of any kind, self-contained for prediction: training
/// data is kept so the posterior can be rebuilt exactly.
class MethodModel {
public:
  Method method = Method::EigenGP;
  HyperParams theta;   // full-gp uses kernel and sigma2 only
  NystromCross cross = NystromCross::Exact;
  Matrix X;
  Vector y;
  std::string train_digest;

  ModelVariant variant() const {
    return method == Method::EigenGPPlus ? ModelVariant::PlusCorrection : ModelVariant::Finite;
  }
  double ybar_train() const { return y.mean(); }

  /// Negative raw variances (Nystrom methods only) are counted in *negatives.
  PredictiveDistribution predict(const Matrix &Xstar, Index *negatives = nullptr) const;

  /// Log evidence of the fitted hyperparameters, when the method has one.
  std::optional<double> log_evidence() const;

  Json to_json() const;
  static MethodModel from_json(const Json &j);

private:
  mutable std::optional<TrainedModel> fitted_;
  mutable std::optional<FullGpModel> full_;
};

struct TrainOutcome {
  MethodModel model;
  std::vector<PhaseTrace> phases;
  HyperParams init;
  double seconds = 0.0;
  bool optimizer_invoked = false;
};

/// Initialization (subset GP or explicit kernel, k-means inducing points)
/// followed by the method's training.
TrainOutcome train_method(const RunConfig &cfg, const Dataset &train);

struct CellResult {
  RunConfig config;
  std::string dataset;
  bool ok = false;
  std::string error;
  std::optional<ErrorKind> error_kind;
  EvalReport report;
  std::vector<PhaseTrace> phases;
  Index negative_variances = 0;
  std::optional<double> log_evidence;
};

CellResult run_cell(const RunConfig &cfg, const DatasetPair &data, const std::string &dataset);

/// A {method x M x seed} matrix on a seeded data generator.
struct BenchmarkSpec {
  std::string name;
  std::string dataset;
  std::function<DatasetPair(std::uint64_t seed)> make_data;
  std::vector<Method> methods;
  std::vector<Index> ms;
  std::vector<std::uint64_t> seeds;
  RunConfig base;
};

/// Cells run on `jobs` worker threads; results come back ordered by
/// (method, M, seed) whatever the scheduling.
std::vector<CellResult> run_benchmark(const BenchmarkSpec &spec, int jobs = 1);

/// Long-format rows: method,M,seed,nmse,mnlp,train_seconds,status,error.
std::string benchmark_csv(const std::vector<CellResult> &cells);

struct CellSummary {
  Method method;
  Index m = 0;
  int runs = 0;
  int failures = 0;
  double nmse_mean = 0.0, nmse_se = 0.0;
  double mnlp_mean = 0.0, mnlp_se = 0.0;
  double train_seconds_mean = 0.0;
};

/// Mean and standard error over the successful seeds of each (method, M).
std::vector<CellSummary> summarize(const std::vector<CellResult> &cells);
Json summary_json(const std::vector<CellSummary> &s);

/// x sin(x^3): 200 noisy training points, 500 noiseless test points.
DatasetPair xsinx3_data(std::uint64_t seed);

/// 1-D analog of the 200-point toy set. Test inputs are a 500-point grid on
/// [0, 6] labeled with the predictive mean of a full GP trained on the data.
DatasetPair snelson_like_data(std::uint64_t seed, Index n_train = 200, Index n_test = 500);

/// JSON helpers shared by the command line tool.
Json to_json(const Matrix &m);
Json to_json(const Vector &v);
Matrix matrix_from_json(const Json &j);
Vector vector_from_json(const Json &j);
Json to_json(const Kernel &k);
Kernel kernel_from_json(const Json &j);
Json to_json(const HyperParams &theta);
HyperParams hyperparams_from_json(const Json &j);
Json to_json(const OptTrace &t);
Json to_json(const EvalReport &r);

} // namespace eigengp
