#include "eigengp/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace eigengp {

void OptOptions::validate() const {
  EIGENGP_REQUIRE(max_evals >= 1, ErrorKind::InvalidArgument, "max_evals must be >= 1");
  EIGENGP_REQUIRE(cg_restart >= 0, ErrorKind::InvalidArgument, "cg_restart must be >= 0");
  EIGENGP_REQUIRE(rho > 0.0 && rho < 1.0 && sig > 0.0 && sig < 1.0 && rho < sig,
                  ErrorKind::InvalidArgument,
                  "line search constants must satisfy 0 < rho < sig < 1");
  EIGENGP_REQUIRE(max_line_evals >= 1, ErrorKind::InvalidArgument,
                  "max_line_evals must be >= 1");
  EIGENGP_REQUIRE(interp_guard > 0.0 && interp_guard < 0.5 && extrap_limit > 1.0 &&
                      slope_ratio > 0.0,
                  ErrorKind::InvalidArgument, "invalid interpolation constants");
}

int OptTrace::monotonicity_violations(double tol) const {
  int violations = 0;
  double last = std::numeric_limits<double>::infinity();
  for (const TraceEntry &e : entries) {
    if (!e.accepted)
      continue;
    if (e.objective > last + tol)
      ++violations;
    last = e.objective;
  }
  return violations;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Evaluator {
public:
  Evaluator(const Objective &f, OptTrace &trace) : f_(f), trace_(trace) {}

  /// Returns false on a non-finite value or a library error.
  bool operator()(const Vector &x, double &value, Vector &grad) {
    bool ok = false;
    try {
      grad.resize(x.size());
      value = f_(x, grad);
      ok = std::isfinite(value) && grad.size() == x.size() && grad.allFinite();
    } catch (const Error &) {
      ok = false;
    }
    if (!ok) {
      value = kInf;
      grad = Vector::Constant(x.size(), kInf);
    }
    TraceEntry e;
    e.eval_index = static_cast<int>(trace_.entries.size());
    e.objective = value;
    e.grad_norm = ok ? grad.norm() : kInf;
    trace_.entries.push_back(e);
    return ok;
  }

  int count() const { return static_cast<int>(trace_.entries.size()); }
  void accept_last() { trace_.entries.back().accepted = true; }
  void accept(int index) { trace_.entries[static_cast<std::size_t>(index)].accepted = true; }

private:
  const Objective &f_;
  OptTrace &trace_;
};

bool small_gradient(const Vector &g, double f) {
  return g.norm() < 1e-8 * std::max(1.0, std::abs(f));
}

} // namespace

OptResult minimize_cg(const Objective &f, const Vector &x0, const OptOptions &opts) {
  opts.validate();
  OptResult res;
  Evaluator eval(f, res.trace);
  const double INT = opts.interp_guard;
  const double EXT = opts.extrap_limit;
  const double SIG = opts.sig;
  const double RHO = opts.rho;

  Vector X = x0;
  double f0;
  Vector df0;
  if (!eval(X, f0, df0))
    throw Error(ErrorKind::NonFiniteObjective, "objective is not finite at the starting point");
  eval.accept_last();

  double best_f = f0;
  Vector best_x = X, best_g = df0;
  const auto track_best = [&](const Vector &x, double fx, const Vector &gx) {
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
      best_g = gx;
    }
  };

  if (X.size() == 0 || small_gradient(df0, f0)) {
    res.trace.termination = "gradient";
    res.x = X;
    res.objective = f0;
    res.gradient = df0;
    return res;
  }

  Vector s = -df0;
  double d0 = -s.squaredNorm();
  double x3 = 1.0 / (1.0 - d0);
  bool ls_failed = false;
  int accepted_steps = 0;
  res.trace.termination = "max_evals";

  while (eval.count() < opts.max_evals) {
    Vector X0 = X;
    double F0 = f0;
    Vector dF0 = df0;
    int X0_eval = -1;
    int M = std::min(opts.max_line_evals, opts.max_evals - eval.count());

    double x1 = 0, f1 = 0, d1 = 0, x2 = 0, f2 = 0, d2 = 0;
    double f3 = f0, d3 = d0, x4 = 0, f4 = 0, d4 = 0;
    Vector df3 = df0;
    bool have_x4 = false;

    // extrapolation
    while (true) {
      x2 = 0;
      f2 = f0;
      d2 = d0;
      f3 = f0;
      df3 = df0;
      bool success = false;
      while (!success && M > 0) {
        --M;
        success = eval(X + x3 * s, f3, df3);
        if (!success)
          x3 = (x2 + x3) / 2;
      }
      if (!success) {
        f3 = kInf;
        d3 = kInf;
        break;
      }
      if (f3 < F0) {
        X0 = X + x3 * s;
        F0 = f3;
        dF0 = df3;
        X0_eval = eval.count() - 1;
      }
      track_best(X + x3 * s, f3, df3);
      d3 = df3.dot(s);
      if (d3 > SIG * d0 || f3 > f0 + x3 * RHO * d0 || M == 0)
        break;
      x1 = x2;
      f1 = f2;
      d1 = d2;
      x2 = x3;
      f2 = f3;
      d2 = d3;
      const double A = 6 * (f1 - f2) + 3 * (d2 + d1) * (x2 - x1);
      const double B = 3 * (f2 - f1) - (2 * d1 + d2) * (x2 - x1);
      const double disc = B * B - A * d1 * (x2 - x1);
      x3 = disc >= 0 ? x1 - d1 * (x2 - x1) * (x2 - x1) / (B + std::sqrt(disc))
                     : std::numeric_limits<double>::quiet_NaN();
      if (!std::isfinite(x3) || x3 < 0)
        x3 = x2 * EXT;
      else if (x3 > x2 * EXT)
        x3 = x2 * EXT;
      else if (x3 < x2 + INT * (x2 - x1))
        x3 = x2 + INT * (x2 - x1);
    }

    // interpolation
    while ((std::abs(d3) > -SIG * d0 || f3 > f0 + x3 * RHO * d0) && M > 0) {
      if (d3 > 0 || f3 > f0 + x3 * RHO * d0) {
        x4 = x3;
        f4 = f3;
        d4 = d3;
        have_x4 = true;
      } else {
        x2 = x3;
        f2 = f3;
        d2 = d3;
      }
      if (!have_x4) {
        x3 = x2 * EXT;
      } else {
        if (f4 > f0) {
          x3 = x2 - (0.5 * d2 * (x4 - x2) * (x4 - x2)) / (f4 - f2 - d2 * (x4 - x2));
        } else {
          const double A = 6 * (f2 - f4) / (x4 - x2) + 3 * (d4 + d2);
          const double B = 3 * (f4 - f2) - (2 * d2 + d4) * (x4 - x2);
          const double disc = B * B - A * d2 * (x4 - x2) * (x4 - x2);
          x3 = disc >= 0 ? x2 + (std::sqrt(disc) - B) / A
                         : std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(x3))
          x3 = (x2 + x4) / 2;
        x3 = std::max(std::min(x3, x4 - INT * (x4 - x2)), x2 + INT * (x4 - x2));
      }
      --M;
      if (eval(X + x3 * s, f3, df3)) {
        if (f3 < F0) {
          X0 = X + x3 * s;
          F0 = f3;
          dF0 = df3;
          X0_eval = eval.count() - 1;
        }
        track_best(X + x3 * s, f3, df3);
        d3 = df3.dot(s);
      } else {
        d3 = kInf;
      }
    }

    if (std::abs(d3) < -SIG * d0 && f3 < f0 + x3 * RHO * d0) {
      X = X + x3 * s;
      f0 = f3;
      eval.accept_last();
      ++accepted_steps;
      const bool restart = opts.cg_restart > 0 && accepted_steps % opts.cg_restart == 0;
      const double beta = (df3.squaredNorm() - df0.dot(df3)) / df0.squaredNorm();
      s = restart ? Vector(-df3) : Vector(beta * s - df3);
      df0 = df3;
      d3 = d0;
      d0 = df0.dot(s);
      if (d0 > 0) {
        s = -df0;
        d0 = -s.squaredNorm();
      }
      x3 = x3 * std::min(opts.slope_ratio, d3 / (d0 - std::numeric_limits<double>::min()));
      ls_failed = false;
      if (small_gradient(df0, f0)) {
        res.trace.termination = "gradient";
        break;
      }
    } else {
      // fall back to the best point of this search
      X = X0;
      f0 = F0;
      df0 = dF0;
      if (X0_eval >= 0)
        eval.accept(X0_eval);
      if (ls_failed || eval.count() >= opts.max_evals) {
        res.trace.termination = ls_failed ? "line_search_failed" : "max_evals";
        break;
      }
      s = -df0;
      d0 = -s.squaredNorm();
      x3 = 1.0 / (1.0 - d0);
      ls_failed = true;
    }
  }

  res.x = best_x;
  res.objective = best_f;
  res.gradient = best_g;
  return res;
}

// ---------------------------------------------------------------------------

ParamPacker::ParamPacker(const HyperParams &reference, GradMode mode, double sigma2_floor)
    : ref_(reference), mode_(mode), sigma2_floor_(sigma2_floor) {
  ref_.validate();
  if (kernel_block()) {
    size_ += 1;
    for (Index d = 0; d < ref_.dim(); ++d)
      if (ref_.kernel.eta(d) > 0.0)
        eta_active_.push_back(d);
    size_ += static_cast<Index>(eta_active_.size()) + ref_.inducing.points.size();
  }
  if (w_block()) {
    for (Index j = 0; j < ref_.w.size(); ++j)
      if (ref_.w(j) > 0.0)
        w_active_.push_back(j);
    size_ += static_cast<Index>(w_active_.size());
  }
  size_ += 1;
}

Vector ParamPacker::pack(const HyperParams &theta) const {
  Vector v(size_);
  Index k = 0;
  if (kernel_block()) {
    v(k++) = std::log(theta.kernel.a0);
    for (Index d : eta_active_)
      v(k++) = std::log(theta.kernel.eta(d));
    const Matrix &B = theta.inducing.points;
    for (Index i = 0; i < B.rows(); ++i)
      for (Index d = 0; d < B.cols(); ++d)
        v(k++) = B(i, d);
  }
  if (w_block())
    for (Index j : w_active_)
      v(k++) = std::log(theta.w(j));
  v(k++) = std::log(theta.sigma2);
  return v;
}

HyperParams ParamPacker::unpack(const Vector &v) const {
  EIGENGP_REQUIRE(v.size() == size_, ErrorKind::DimensionMismatch,
                  "packed vector has length " + std::to_string(v.size()) + ", expected " +
                      std::to_string(size_));
  HyperParams theta = ref_;
  Index k = 0;
  if (kernel_block()) {
    theta.kernel.a0 = std::exp(v(k++));
    for (Index d : eta_active_)
      theta.kernel.eta(d) = std::exp(v(k++));
    Matrix &B = theta.inducing.points;
    for (Index i = 0; i < B.rows(); ++i)
      for (Index d = 0; d < B.cols(); ++d)
        B(i, d) = v(k++);
  }
  if (w_block())
    for (Index j : w_active_)
      theta.w(j) = std::exp(v(k++));
  theta.sigma2 = std::max(std::exp(v(k++)), sigma2_floor_);
  return theta;
}

Vector ParamPacker::pack_gradient(const EvidenceResult &g, const HyperParams &theta) const {
  Vector out(size_);
  Index k = 0;
  if (kernel_block()) {
    EIGENGP_REQUIRE(g.d_a0 && g.d_eta && g.d_B, ErrorKind::InvalidArgument,
                    "evidence result lacks kernel / inducing gradients");
    out(k++) = theta.kernel.a0 * *g.d_a0;
    for (Index d : eta_active_)
      out(k++) = theta.kernel.eta(d) * (*g.d_eta)(d);
    const Matrix &dB = *g.d_B;
    for (Index i = 0; i < dB.rows(); ++i)
      for (Index d = 0; d < dB.cols(); ++d)
        out(k++) = dB(i, d);
  }
  if (w_block()) {
    EIGENGP_REQUIRE(g.d_w.has_value(), ErrorKind::InvalidArgument,
                    "evidence result lacks the w gradient");
    for (Index j : w_active_)
      out(k++) = theta.w(j) * (*g.d_w)(j);
  }
  EIGENGP_REQUIRE(g.d_sigma2.has_value(), ErrorKind::InvalidArgument,
                  "evidence result lacks the noise gradient");
  // below the floor sigma2 no longer moves with its packed coordinate
  const bool floored = theta.sigma2 <= sigma2_floor_ && sigma2_floor_ > 0.0;
  out(k++) = floored ? 0.0 : theta.sigma2 * *g.d_sigma2;
  return out;
}

std::vector<std::string> ParamPacker::labels() const {
  std::vector<std::string> out;
  if (kernel_block()) {
    out.push_back("log_a0");
    for (Index d : eta_active_)
      out.push_back("log_eta[" + std::to_string(d) + "]");
    for (Index i = 0; i < ref_.inducing.points.rows(); ++i)
      for (Index d = 0; d < ref_.dim(); ++d)
        out.push_back("B[" + std::to_string(i) + "," + std::to_string(d) + "]");
  }
  if (w_block())
    for (Index j : w_active_)
      out.push_back("log_w[" + std::to_string(j) + "]");
  out.push_back("log_sigma2");
  return out;
}

// ---------------------------------------------------------------------------

double sigma2_floor(const Vector &y, double rel) {
  if (y.size() < 2)
    return rel;
  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  return rel * (var > 0.0 ? var : 1.0);
}

namespace {

/// w = default_weights of the current basis, zero-padded for dropped eigenpairs.
Vector padded_default_weights(const HyperParams &theta) {
  const Basis basis = build_basis(theta.inducing, theta.kernel, theta.m_basis());
  Vector w = Vector::Zero(theta.m_basis());
  w.head(basis.m_basis()) = default_weights(basis);
  return w;
}

HyperParams jitter_inducing(const HyperParams &theta) {
  HyperParams out = theta;
  Matrix &B = out.inducing.points;
  const double scale = 1e-6 * std::max(1.0, B.cwiseAbs().maxCoeff());
  for (Index i = 0; i < B.rows(); ++i)
    for (Index d = 0; d < B.cols(); ++d)
      B(i, d) += scale * std::sin(1.0 + static_cast<double>(i * B.cols() + d));
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

HyperParams optimize_evidence(const HyperParams &init, const Matrix &X, const Vector &y,
                              ModelVariant variant, GradMode mode, const TrainOptions &opts,
                              PhaseTrace &trace) {
  const ParamPacker packer(init, mode, sigma2_floor(y, opts.sigma2_floor_rel));
  const Objective objective = [&](const Vector &v, Vector &grad) {
    const HyperParams theta = packer.unpack(v);
    const EvidenceResult r = evidence_and_grad(theta, X, y, variant, mode);
    grad = -packer.pack_gradient(r, theta);
    return -r.value;
  };
  HyperParams start = init;
  start.sigma2 = std::max(start.sigma2, packer.sigma2_floor());
  const OptResult res = minimize_cg(objective, packer.pack(start), opts.opt);
  trace.name = to_string(mode);
  trace.trace = res.trace;
  trace.start_objective = res.trace.entries.front().objective;
  trace.final_objective = res.objective;
  return packer.unpack(res.x);
}

TrainResult train_phase1(const Matrix &X, const Vector &y, const HyperParams &init,
                         ModelVariant variant, const TrainOptions &opts) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult out;
  PhaseTrace p1;
  HyperParams theta = optimize_evidence(init, X, y, variant, GradMode::Phase1, opts, p1);
  out.phases.push_back(std::move(p1));
  theta.w = padded_default_weights(theta);
  out.model = fit(X, y, theta, variant);
  out.seconds = seconds_since(t0);
  return out;
}

TrainResult train_sequential(const Matrix &X, const Vector &y, const HyperParams &init,
                             ModelVariant variant, const TrainOptions &opts) {
  EIGENGP_REQUIRE(opts.cycles >= 1, ErrorKind::InvalidArgument, "cycles must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult out;
  HyperParams theta = init;
  for (int c = 0; c < opts.cycles; ++c) {
    PhaseTrace p1, p2;
    theta = optimize_evidence(theta, X, y, variant, GradMode::Phase1, opts, p1);
    if (p1.trace.termination != "gradient" && p1.trace.termination != "max_evals")
      out.diagnostics.push_back("phase1 stopped: " + p1.trace.termination);
    theta.w = padded_default_weights(theta);
    theta = optimize_evidence(theta, X, y, variant, GradMode::Phase2, opts, p2);
    if (p2.trace.termination != "gradient" && p2.trace.termination != "max_evals")
      out.diagnostics.push_back("phase2 stopped: " + p2.trace.termination);
    out.phases.push_back(std::move(p1));
    out.phases.push_back(std::move(p2));
  }
  out.model = fit(X, y, theta, variant);
  out.seconds = seconds_since(t0);
  return out;
}

TrainResult train_joint(const Matrix &X, const Vector &y, const HyperParams &init,
                        ModelVariant variant, const TrainOptions &opts) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult out;
  PhaseTrace pj;
  HyperParams start = init;
  HyperParams theta;
  try {
    theta = optimize_evidence(start, X, y, variant, GradMode::Joint, opts, pj);
  } catch (const Error &e) {
    if (e.kind() != ErrorKind::NonFiniteObjective)
      throw;
    // the start point itself was rejected; nudge the inducing points once
    out.diagnostics.push_back(std::string("joint start rejected (") + e.what() +
                              "); retrying with jittered inducing points");
    start = jitter_inducing(start);
    try {
      theta = optimize_evidence(start, X, y, variant, GradMode::Joint, opts, pj);
    } catch (const Error &e2) {
      if (e2.kind() != ErrorKind::NonFiniteObjective)
        throw;
      evidence_and_grad(start, X, y, variant, GradMode::Joint);  // rethrows the root cause
      throw;
    }
  }
  if (pj.trace.termination != "gradient" && pj.trace.termination != "max_evals")
    out.diagnostics.push_back("joint stopped: " + pj.trace.termination);
  out.phases.push_back(std::move(pj));
  out.model = fit(X, y, theta, variant);
  out.seconds = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct GradientBlocks {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
};

// Raw-space gradient entries grouped by block, in a fixed order.
GradientBlocks flatten(const EvidenceResult &r, GradMode mode) {
  GradientBlocks out;
  if (mode != GradMode::Phase2) {
    out.names.push_back("a0");
    out.values.push_back({*r.d_a0});
    out.names.push_back("eta");
    out.values.emplace_back(r.d_eta->data(), r.d_eta->data() + r.d_eta->size());
    out.names.push_back("B");
    out.values.emplace_back(r.d_B->data(), r.d_B->data() + r.d_B->size());
  }
  if (mode != GradMode::Phase1) {
    out.names.push_back("w");
    out.values.emplace_back(r.d_w->data(), r.d_w->data() + r.d_w->size());
  }
  out.names.push_back("sigma2");
  out.values.push_back({*r.d_sigma2});
  return out;
}

// Pointers to the raw parameters in the same order as flatten().
std::vector<std::vector<double *>> slots(HyperParams &t, GradMode mode) {
  std::vector<std::vector<double *>> out;
  if (mode != GradMode::Phase2) {
    out.push_back({&t.kernel.a0});
    std::vector<double *> eta, B;
    for (Index d = 0; d < t.kernel.eta.size(); ++d)
      eta.push_back(&t.kernel.eta(d));
    // column-major to match Matrix::data()
    for (Index d = 0; d < t.inducing.points.cols(); ++d)
      for (Index i = 0; i < t.inducing.points.rows(); ++i)
        B.push_back(&t.inducing.points(i, d));
    out.push_back(eta);
    out.push_back(B);
  }
  if (mode != GradMode::Phase1) {
    std::vector<double *> w;
    for (Index j = 0; j < t.w.size(); ++j)
      w.push_back(&t.w(j));
    out.push_back(w);
  }
  out.push_back({&t.sigma2});
  return out;
}

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kGradCheckFloor});
}

// Max relative error of one parameter's central difference at the given step.
double check_entry(const HyperParams &theta, const Matrix &X, const Vector &y,
                   ModelVariant variant, GradMode mode, std::size_t block, std::size_t entry,
                   double analytic, double step) {
  HyperParams tp = theta, tm = theta;
  double *p = slots(tp, mode)[block][entry];
  double *m = slots(tm, mode)[block][entry];
  const double h = step * std::max(std::abs(*p), 1e-2);
  // keep a0 / sigma2 / eta / w inside their domain
  const bool nonnegative = !(mode != GradMode::Phase2 && block == 2);
  double hm = h;
  if (nonnegative && *m - h < 0.0)
    hm = 0.0;
  *p += h;
  *m -= hm;
  const double fd = (log_evidence(tp, X, y, variant, mode) - log_evidence(tm, X, y, variant, mode)) /
                    (h + hm);
  return rel_error(analytic, fd);
}

} // namespace

GradCheckReport finite_diff_check(const HyperParams &theta, const Matrix &X, const Vector &y,
                                  ModelVariant variant, GradMode mode, double step) {
  GradCheckReport report;
  EvidenceResult r;
  try {
    r = evidence_and_grad(theta, X, y, variant, mode);
  } catch (const Error &e) {
    if (e.kind() != ErrorKind::EigengapTooSmall)
      throw;
    report.eigengap_path = true;
    report.passed = false;
    report.message = e.what();
    return report;
  }
  const GradientBlocks g = flatten(r, mode);
  report.passed = true;
  bool all_artifacts = true;
  for (std::size_t b = 0; b < g.names.size(); ++b) {
    BlockCheck bc;
    bc.block = g.names[b];
    bool artifact = true;
    for (std::size_t e = 0; e < g.values[b].size(); ++e) {
      const double err = check_entry(theta, X, y, variant, mode, b, e, g.values[b][e], step);
      bc.max_rel_error = std::max(bc.max_rel_error, err);
      if (err >= kGradCheckTolerance) {
        bool vanishes = false;
        for (double s : {1e-3, 1e-4, 1e-5, 1e-6, 1e-7})
          if (s != step && !vanishes)
            vanishes = check_entry(theta, X, y, variant, mode, b, e, g.values[b][e], s) <
                       kGradCheckTolerance;
        artifact = artifact && vanishes;
      }
    }
    bc.passed = bc.max_rel_error < kGradCheckTolerance;
    if (!bc.passed) {
      report.passed = false;
      all_artifacts = all_artifacts && artifact;
    }
    report.blocks.push_back(bc);
  }
  report.step_size_artifact = !report.passed && all_artifacts;
  report.message = report.passed ? "all blocks within tolerance"
                   : report.step_size_artifact
                       ? "failures vanish at a different step size"
                       : "gradient mismatch";
  return report;
}

} // namespace eigengp
