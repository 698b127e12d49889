#pragma once

#include "eigengp/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace eigengp {

using Json = nlohmann::json;

inline constexpr const char *kRngName = "mt19937_64";

struct Dataset {
  Matrix X;
  Vector y;
  std::vector<std::string> feature_names;
  Json provenance = Json::object();

  Index size() const { return X.rows(); }
  Index dim() const { return X.cols(); }
  std::string digest() const { return data_digest(X, y); }
  void validate() const;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
  std::vector<std::string> warnings;
};

/// f(x) = x sin(x^3).
double xsinx3(double x);

/// Uniform inputs on [lo, hi]; training targets carry N(0, noise_sd^2) noise,
/// test targets are the noiseless function.
DatasetPair gen_xsinx3(Index n_train = 200, Index n_test = 500, double noise_sd = 0.5,
                       double lo = 0.0, double hi = 3.0, std::uint64_t seed = 0);

/// Noise-free mean of the 1-D analog used by gen_snelson_like.
double snelson_like_mean(double x);

inline constexpr double kSnelsonLikeNoiseSd = 0.3;

/// Synthetic 1-D stand-in for the classic 200-point toy set: inputs uniform
/// on [0, 6], a smooth multi-bump mean and Gaussian noise.
Dataset gen_snelson_like(Index n_train = 200, std::uint64_t seed = 0);

/// Evenly spaced column of inputs on [lo, hi].
Matrix grid_inputs(Index n, double lo, double hi);

/// Whitespace-separated numeric text: one row per line (inputs may carry
/// several columns), one target per line.
Dataset load_columns(const std::filesystem::path &inputs, const std::filesystem::path &outputs);

struct CsvOptions {
  std::string target = "-1";  // column name, or an integer index (negative counts from the end)
  char delimiter = ',';
  bool header = true;
};

Dataset load_csv(const std::filesystem::path &path, const CsvOptions &opts = {});

/// Parses RFC-4180 records (quoted fields, doubled quotes, CRLF).
std::vector<std::vector<std::string>> parse_csv(const std::string &text, char delimiter = ',');

DatasetPair split_counts(const Dataset &d, Index n_train, Index n_test, std::uint64_t seed);
DatasetPair split_fraction(const Dataset &d, double train_fraction, std::uint64_t seed);

std::string file_sha256(const std::filesystem::path &path);

class Standardizer {
public:
  static Standardizer fit(const Dataset &train);

  bool fitted() const { return fitted_; }
  const Vector &feature_mean() const { return x_mean_; }
  const Vector &feature_scale() const { return x_scale_; }
  double target_mean() const { return y_mean_; }
  double target_scale() const { return y_scale_; }
  const std::vector<bool> &constant_features() const { return constant_; }
  const std::string &fitted_on() const { return fitted_on_; }

  Matrix apply_inputs(const Matrix &X) const;
  Vector apply_targets(const Vector &y) const;
  Dataset apply(const Dataset &d) const;
  /// Predictions back to original units; variances scale by target_scale^2.
  PredictiveDistribution invert(const PredictiveDistribution &p) const;

  Json to_json() const;
  static Standardizer from_json(const Json &j);

private:
  void require_fitted() const;

  bool fitted_ = false;
  Vector x_mean_, x_scale_;
  double y_mean_ = 0.0, y_scale_ = 1.0;
  std::vector<bool> constant_;
  std::string fitted_on_;
};

} // namespace eigengp
