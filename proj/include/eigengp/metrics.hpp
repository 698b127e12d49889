#pragma once

#include "eigengp/model.hpp"

#include <chrono>
#include <string>

namespace eigengp {

/// Standard:     sum (y_i - mu_i)^2 / sum (y_i - ybar)^2
/// PaperLiteral: sum (y_i - mu_i)^2 / sum (mu_i - ybar)^2
/// ybar is the mean training target.
enum class NmseDenominator { Standard, PaperLiteral };

const char *to_string(NmseDenominator d);
NmseDenominator nmse_denominator_from_string(const std::string &s);

double nmse(const Vector &y, const Vector &mu, double ybar_train,
            NmseDenominator denominator = NmseDenominator::Standard);

/// Mean negative log probability of y under independent N(mu_i, var_i).
double mnlp(const Vector &y, const Vector &mu, const Vector &var);

struct EvalReport {
  double nmse = 0.0;
  double mnlp = 0.0;
  Index n_test = 0;
  double train_seconds = 0.0;
  double predict_seconds = 0.0;
  NmseDenominator denominator = NmseDenominator::Standard;
};

EvalReport evaluate(const Vector &y, const PredictiveDistribution &pred, double ybar_train,
                    NmseDenominator denominator = NmseDenominator::Standard);

class Stopwatch {
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  void reset() { start_ = std::chrono::steady_clock::now(); }

private:
  std::chrono::steady_clock::time_point start_;
};

} // namespace eigengp
