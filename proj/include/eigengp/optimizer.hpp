#pragma once

#include "eigengp/evidence.hpp"

#include <cstdint>
#include <functional>

namespace eigengp {

struct OptOptions {
  int max_evals = 100;
  int cg_restart = 0;            // restart along -grad every k accepted steps; 0 = never
  double rho = 1e-4;             // sufficient decrease
  double sig = 0.9;              // curvature
  int max_line_evals = 20;
  double interp_guard = 0.1;     // stay this fraction away from bracket ends
  double extrap_limit = 3.0;     // extrapolate at most this many times the current step
  double slope_ratio = 10.0;     // cap on the initial step growth between searches
  std::uint64_t seed = 0;

  void validate() const;
};

struct TraceEntry {
  int eval_index = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  bool accepted = false;
};

struct OptTrace {
  std::vector<TraceEntry> entries;
  std::string termination;

  /// Count of accepted objectives that rise above their predecessor by more than tol.
  int monotonicity_violations(double tol = 1e-12) const;
  int evaluations() const { return static_cast<int>(entries.size()); }
};

/// Returns f(x) and writes the gradient into grad. Exceptions thrown at any
/// point other than x0 are treated as a rejected trial step.
using Objective = std::function<double(const Vector &x, Vector &grad)>;

struct OptResult {
  Vector x;
  double objective = 0.0;
  Vector gradient;
  OptTrace trace;
};

/// Nonlinear conjugate gradients (Polak-Ribiere) with a cubic / quadratic
/// interpolating line search. Every objective call counts toward max_evals.
OptResult minimize_cg(const Objective &f, const Vector &x0, const OptOptions &opts = {});

/// Flattens the active blocks of a mode: [log a0, log eta, B, log w, log sigma2]
/// in that order, skipping blocks the mode does not touch. eta and w entries
/// equal to zero are pinned and left out.
class ParamPacker {
public:
  ParamPacker(const HyperParams &reference, GradMode mode, double sigma2_floor = 0.0);

  Index size() const { return size_; }
  GradMode mode() const { return mode_; }
  double sigma2_floor() const { return sigma2_floor_; }

  Vector pack(const HyperParams &theta) const;
  HyperParams unpack(const Vector &v) const;
  /// Gradient of the evidence in packed coordinates.
  Vector pack_gradient(const EvidenceResult &g, const HyperParams &theta) const;
  std::vector<std::string> labels() const;

private:
  HyperParams ref_;
  GradMode mode_;
  double sigma2_floor_;
  std::vector<Index> eta_active_;
  std::vector<Index> w_active_;
  Index size_ = 0;
  bool kernel_block() const { return mode_ != GradMode::Phase2; }
  bool w_block() const { return mode_ != GradMode::Phase1; }
};

struct TrainOptions {
  OptOptions opt;
  int cycles = 1;                  // Phase1 -> Phase2 repetitions (sequential only)
  double sigma2_floor_rel = 1e-8;  // floor on sigma2 relative to var(y)
};

struct PhaseTrace {
  std::string name;
  OptTrace trace;
  double start_objective = 0.0;
  double final_objective = 0.0;
};

struct TrainResult {
  TrainedModel model;
  std::vector<PhaseTrace> phases;
  std::vector<std::string> diagnostics;
  double seconds = 0.0;
};

double sigma2_floor(const Vector &y, double rel);

/// One minimize_cg run over the blocks of mode; returns the best parameters.
HyperParams optimize_evidence(const HyperParams &init, const Matrix &X, const Vector &y,
                              ModelVariant variant, GradMode mode, const TrainOptions &opts,
                              PhaseTrace &trace);

/// Phase1 (w tied to the eigenvalues) followed by Phase2 (w only).
TrainResult train_sequential(const Matrix &X, const Vector &y, const HyperParams &init,
                             ModelVariant variant, const TrainOptions &opts = {});

/// A single run over every block.
TrainResult train_joint(const Matrix &X, const Vector &y, const HyperParams &init,
                        ModelVariant variant, const TrainOptions &opts = {});

/// Phase1 only; the prior variances are set to default_weights afterwards.
TrainResult train_phase1(const Matrix &X, const Vector &y, const HyperParams &init,
                         ModelVariant variant, const TrainOptions &opts = {});

struct BlockCheck {
  std::string block;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  bool passed = false;
  bool eigengap_path = false;
  bool step_size_artifact = false;
  std::string message;
};

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckFloor = 1e-3;

/// Analytic gradient blocks against central differences with relative step
/// step * max(|theta_i|, 1e-2). Relative error is |a - b| / max(|a|, |b|, 1e-3).
GradCheckReport finite_diff_check(const HyperParams &theta, const Matrix &X, const Vector &y,
                                  ModelVariant variant, GradMode mode, double step = 1e-5);

} // namespace eigengp
