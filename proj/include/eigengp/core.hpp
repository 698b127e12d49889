#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace eigengp {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

enum class ErrorKind {
  DimensionMismatch,
  FactorizationFailed,
  ConvergenceFailure,
  NonPositiveNoise,
  AllEigenvaluesDegenerate,
  EigengapTooSmall,
  NonFiniteObjective,
  SizeGuardExceeded,
  SubsetTooSmall,
  FileFormatError,
  NonNumericCell,
  MissingTarget,
  CountsExceedN,
  NotFitted,
  ZeroDenominator,
  NonPositiveVariance,
  InvalidArgument,
  SchemaMismatch,
  ProvenanceMismatch,
  UnknownSuite,
  IoError,
};

inline const char *to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline const char *to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::DimensionMismatch: return "DimensionMismatch";
  case ErrorKind::FactorizationFailed: return "FactorizationFailed";
  case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
  case ErrorKind::NonPositiveNoise: return "NonPositiveNoise";
  case ErrorKind::AllEigenvaluesDegenerate: return "AllEigenvaluesDegenerate";
  case ErrorKind::EigengapTooSmall: return "EigengapTooSmall";
  case ErrorKind::NonFiniteObjective: return "NonFiniteObjective";
  case ErrorKind::SizeGuardExceeded: return "SizeGuardExceeded";
  case ErrorKind::SubsetTooSmall: return "SubsetTooSmall";
  case ErrorKind::FileFormatError: return "FileFormatError";
  case ErrorKind::NonNumericCell: return "NonNumericCell";
  case ErrorKind::MissingTarget: return "MissingTarget";
  case ErrorKind::CountsExceedN: return "CountsExceedN";
  case ErrorKind::NotFitted: return "NotFitted";
  case ErrorKind::ZeroDenominator: return "ZeroDenominator";
  case ErrorKind::NonPositiveVariance: return "NonPositiveVariance";
  case ErrorKind::InvalidArgument: return "InvalidArgument";
  case ErrorKind::SchemaMismatch: return "SchemaMismatch";
  case ErrorKind::ProvenanceMismatch: return "ProvenanceMismatch";
  case ErrorKind::UnknownSuite: return "UnknownSuite";
  case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

#define EIGENGP_REQUIRE(cond, kind, msg)                                       \
  do {                                                                         \
    if (!(cond))                                                               \
      throw ::eigengp::Error((kind), (msg));                                   \
  } while (0)

/// Independent child seed for a named sub-stream (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

} // namespace eigengp
