#include "eigengp/metrics.hpp"

#include <cmath>
#include <numbers>

namespace eigengp {

const char *to_string(NmseDenominator d) {
  return d == NmseDenominator::Standard ? "standard" : "paper-literal";
}

NmseDenominator nmse_denominator_from_string(const std::string &s) {
  if (s == "standard")
    return NmseDenominator::Standard;
  if (s == "paper-literal")
    return NmseDenominator::PaperLiteral;
  throw Error(ErrorKind::InvalidArgument, "unknown NMSE denominator '" + s + "'");
}

double nmse(const Vector &y, const Vector &mu, double ybar_train, NmseDenominator denominator) {
  EIGENGP_REQUIRE(y.size() == mu.size() && y.size() >= 1, ErrorKind::DimensionMismatch,
                  "y and mu must have equal, positive length");
  const double num = (y - mu).squaredNorm();
  const Vector &ref = denominator == NmseDenominator::Standard ? y : mu;
  const double den = (ref.array() - ybar_train).square().sum();
  EIGENGP_REQUIRE(den > 0.0, ErrorKind::ZeroDenominator,
                  std::string("NMSE denominator is zero (") + to_string(denominator) + ")");
  return num / den;
}

double mnlp(const Vector &y, const Vector &mu, const Vector &var) {
  EIGENGP_REQUIRE(y.size() == mu.size() && y.size() == var.size() && y.size() >= 1,
                  ErrorKind::DimensionMismatch, "y, mu and var must have equal, positive length");
  EIGENGP_REQUIRE((var.array() > 0.0).all(), ErrorKind::NonPositiveVariance,
                  "predictive variances must be positive");
  const double ln2pi = std::log(2.0 * std::numbers::pi);
  const double total =
      ((y - mu).array().square() / var.array() + var.array().log() + ln2pi).sum();
  return 0.5 * total / static_cast<double>(y.size());
}

EvalReport evaluate(const Vector &y, const PredictiveDistribution &pred, double ybar_train,
                    NmseDenominator denominator) {
  EvalReport r;
  r.nmse = nmse(y, pred.mean, ybar_train, denominator);
  r.mnlp = mnlp(y, pred.mean, pred.variance);
  r.n_test = y.size();
  r.denominator = denominator;
  return r;
}

} // namespace eigengp
