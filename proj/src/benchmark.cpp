#include "eigengp/benchmark.hpp"

#include "eigengp/digest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace eigengp {

const char *to_string(Method m) {
  switch (m) {
  case Method::EigenGP: return "eigengp";
  case Method::EigenGPStar: return "eigengp-star";
  case Method::EigenGPPlus: return "eigengp-plus";
  case Method::Nystrom: return "nystrom";
  case Method::NystromStar: return "nystrom-star";
  case Method::FullGP: return "full-gp";
  }
  return "?";
}

const std::vector<Method> &all_methods() {
  static const std::vector<Method> m{Method::EigenGP, Method::EigenGPStar, Method::EigenGPPlus,
                                     Method::Nystrom, Method::NystromStar, Method::FullGP};
  return m;
}

Method method_from_string(const std::string &s) {
  for (Method m : all_methods())
    if (s == to_string(m))
      return m;
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + s + "'");
}

// --- JSON helpers -----------------------------------------------------------

Json to_json(const Matrix &m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j)
      row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const Vector &v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Matrix matrix_from_json(const Json &j) {
  EIGENGP_REQUIRE(j.is_array(), ErrorKind::SchemaMismatch, "matrix must be an array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const Json &row = j.at(static_cast<std::size_t>(i));
    EIGENGP_REQUIRE(row.is_array() && static_cast<Index>(row.size()) == cols,
                    ErrorKind::SchemaMismatch, "ragged matrix");
    for (Index c = 0; c < cols; ++c)
      m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Vector vector_from_json(const Json &j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

Json to_json(const Kernel &k) { return {{"a0", k.a0}, {"eta", to_json(k.eta)}}; }

Kernel kernel_from_json(const Json &j) {
  Kernel k;
  k.a0 = j.at("a0").get<double>();
  k.eta = vector_from_json(j.at("eta"));
  return k;
}

Json to_json(const HyperParams &theta) {
  return {{"kernel", to_json(theta.kernel)},
          {"inducing", to_json(theta.inducing.points)},
          {"w", to_json(theta.w)},
          {"sigma2", theta.sigma2}};
}

HyperParams hyperparams_from_json(const Json &j) {
  HyperParams t;
  t.kernel = kernel_from_json(j.at("kernel"));
  t.inducing.points = matrix_from_json(j.at("inducing"));
  t.w = vector_from_json(j.at("w"));
  t.sigma2 = j.at("sigma2").get<double>();
  return t;
}

Json to_json(const OptTrace &t) {
  Json e = Json::array();
  for (const auto &x : t.entries)
    e.push_back({x.eval_index, x.objective, x.grad_norm, x.accepted});
  return {{"termination", t.termination}, {"evaluations", t.evaluations()}, {"entries", e}};
}

Json to_json(const EvalReport &r) {
  return {{"nmse", r.nmse},
          {"nmse_denominator", to_string(r.denominator)},
          {"mnlp", r.mnlp},
          {"n_test", r.n_test},
          {"train_seconds", r.train_seconds},
          {"predict_seconds", r.predict_seconds}};
}

// --- RunConfig --------------------------------------------------------------

void RunConfig::validate() const {
  EIGENGP_REQUIRE(m_ind >= 1, ErrorKind::InvalidArgument, "M_ind must be >= 1");
  EIGENGP_REQUIRE(m_basis >= 0 && m_basis <= m_ind, ErrorKind::InvalidArgument,
                  "M_basis must lie in [1, M_ind] (0 means M_ind)");
  EIGENGP_REQUIRE(subset_fraction > 0.0 && subset_fraction <= 1.0, ErrorKind::InvalidArgument,
                  "subset fraction must lie in (0, 1]");
  EIGENGP_REQUIRE(train.cycles >= 1, ErrorKind::InvalidArgument, "cycles must be >= 1");
  EIGENGP_REQUIRE(train.sigma2_floor_rel >= 0.0, ErrorKind::InvalidArgument,
                  "sigma2 floor must be >= 0");
  train.opt.validate();
  if (init) {
    EIGENGP_REQUIRE(init->kernel.valid() && init->kernel.dim() >= 1, ErrorKind::InvalidArgument,
                    "explicit kernel is invalid");
    EIGENGP_REQUIRE(init->sigma2 > 0.0, ErrorKind::NonPositiveNoise,
                    "explicit sigma2 must be positive");
  }
}

Json RunConfig::to_json() const {
  const OptOptions &o = train.opt;
  Json j = {{"method", to_string(method)},
            {"m_ind", m_ind},
            {"m_basis", basis_size()},
            {"seed", seed},
            {"subset_fraction", subset_fraction},
            {"optimizer",
             {{"max_evals", o.max_evals},
              {"cg_restart", o.cg_restart},
              {"rho", o.rho},
              {"sig", o.sig},
              {"max_line_evals", o.max_line_evals},
              {"interp_guard", o.interp_guard},
              {"extrap_limit", o.extrap_limit},
              {"slope_ratio", o.slope_ratio},
              {"cycles", train.cycles},
              {"sigma2_floor_rel", train.sigma2_floor_rel}}},
            {"nystrom_cross", to_string(cross)},
            {"nmse_denominator", to_string(denominator)}};
  if (init)
    j["init"] = {{"kind", "explicit"},
                 {"kernel", eigengp::to_json(init->kernel)},
                 {"sigma2", init->sigma2}};
  else
    j["init"] = {{"kind", "subset-gp"}};
  return j;
}

namespace {

void reject_unknown(const Json &j, std::initializer_list<const char *> known,
                    const std::string &where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char *k : known)
      ok = ok || it.key() == k;
    EIGENGP_REQUIRE(ok, ErrorKind::InvalidArgument,
                    "unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T> void read_opt(const Json &j, const char *key, T &out) {
  if (j.contains(key))
    out = j.at(key).get<T>();
}

} // namespace

RunConfig RunConfig::from_json(const Json &j, const RunConfig &base) {
  EIGENGP_REQUIRE(j.is_object(), ErrorKind::InvalidArgument, "config must be a JSON object");
  reject_unknown(j,
                 {"schema_version", "method", "m_ind", "m_basis", "seed", "subset_fraction",
                  "optimizer", "nystrom_cross", "nmse_denominator", "init", "dataset"},
                 "config");
  if (j.contains("schema_version"))
    EIGENGP_REQUIRE(j.at("schema_version").get<int>() == kSchemaVersion,
                    ErrorKind::SchemaMismatch, "config schema_version is not " +
                                                   std::to_string(kSchemaVersion));
  RunConfig c = base;
  if (j.contains("method"))
    c.method = method_from_string(j.at("method").get<std::string>());
  read_opt(j, "m_ind", c.m_ind);
  read_opt(j, "m_basis", c.m_basis);
  read_opt(j, "seed", c.seed);
  read_opt(j, "subset_fraction", c.subset_fraction);
  if (j.contains("optimizer")) {
    const Json &o = j.at("optimizer");
    reject_unknown(o,
                   {"max_evals", "cg_restart", "rho", "sig", "max_line_evals", "interp_guard",
                    "extrap_limit", "slope_ratio", "cycles", "sigma2_floor_rel"},
                   "optimizer");
    read_opt(o, "max_evals", c.train.opt.max_evals);
    read_opt(o, "cg_restart", c.train.opt.cg_restart);
    read_opt(o, "rho", c.train.opt.rho);
    read_opt(o, "sig", c.train.opt.sig);
    read_opt(o, "max_line_evals", c.train.opt.max_line_evals);
    read_opt(o, "interp_guard", c.train.opt.interp_guard);
    read_opt(o, "extrap_limit", c.train.opt.extrap_limit);
    read_opt(o, "slope_ratio", c.train.opt.slope_ratio);
    read_opt(o, "cycles", c.train.cycles);
    read_opt(o, "sigma2_floor_rel", c.train.sigma2_floor_rel);
  }
  if (j.contains("nystrom_cross"))
    c.cross = nystrom_cross_from_string(j.at("nystrom_cross").get<std::string>());
  if (j.contains("nmse_denominator"))
    c.denominator = nmse_denominator_from_string(j.at("nmse_denominator").get<std::string>());
  if (j.contains("init")) {
    const Json &i = j.at("init");
    const std::string kind = i.value("kind", "subset-gp");
    if (kind == "subset-gp") {
      c.init.reset();
    } else if (kind == "explicit") {
      c.init = ExplicitInit{kernel_from_json(i.at("kernel")), i.at("sigma2").get<double>()};
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown init kind '" + kind + "'");
    }
  }
  c.train.opt.seed = c.seed;
  return c;
}

RunConfig RunConfig::from_json(const Json &j) { return from_json(j, RunConfig{}); }

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()).substr(0, 16); }

// --- MethodModel ------------------------------------------------------------

PredictiveDistribution MethodModel::predict(const Matrix &Xstar, Index *negatives) const {
  if (negatives)
    *negatives = 0;
  switch (method) {
  case Method::EigenGP:
  case Method::EigenGPStar:
  case Method::EigenGPPlus:
    if (!fitted_)
      fitted_ = fit(X, y, theta, variant());
    return eigengp::predict(*fitted_, Xstar);
  case Method::Nystrom:
  case Method::NystromStar: {
    NystromPrediction p = nystrom_gp_predict(X, y, theta.inducing.points, theta.kernel,
                                             theta.sigma2, Xstar, cross);
    if (negatives)
      *negatives = p.negative_count;
    if (p.negative_count > 0)
      p.dist.warnings.push_back(std::to_string(p.negative_count) +
                                " negative raw variances clamped to " +
                                std::to_string(kVarianceClamp));
    return p.dist;
  }
  case Method::FullGP:
    if (!full_)
      full_ = full_gp_fit(X, y, theta.kernel, theta.sigma2);
    return full_gp_predict(*full_, Xstar);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown method");
}

std::optional<double> MethodModel::log_evidence() const {
  switch (method) {
  case Method::EigenGP:
  case Method::EigenGPStar:
  case Method::EigenGPPlus:
    return eigengp::log_evidence(theta, X, y, variant(), GradMode::Joint);
  case Method::NystromStar:
    return eigengp::log_evidence(theta, X, y, ModelVariant::Finite, GradMode::Phase1);
  case Method::FullGP:
    return full_gp_evidence(X, y, theta.kernel, theta.sigma2).value;
  case Method::Nystrom:
    return std::nullopt;
  }
  return std::nullopt;
}

Json MethodModel::to_json() const {
  Json j = {{"method", to_string(method)},
            {"variant", eigengp::to_string(variant())},
            {"theta", eigengp::to_json(theta)},
            {"nystrom_cross", to_string(cross)},
            {"train_digest", train_digest},
            {"train",
             {{"X", eigengp::to_json(X)}, {"y", eigengp::to_json(y)}}}};
  return j;
}

MethodModel MethodModel::from_json(const Json &j) {
  MethodModel m;
  m.method = method_from_string(j.at("method").get<std::string>());
  m.theta = hyperparams_from_json(j.at("theta"));
  m.cross = nystrom_cross_from_string(j.at("nystrom_cross").get<std::string>());
  m.X = matrix_from_json(j.at("train").at("X"));
  m.y = vector_from_json(j.at("train").at("y"));
  m.train_digest = j.at("train_digest").get<std::string>();
  EIGENGP_REQUIRE(m.train_digest == data_digest(m.X, m.y), ErrorKind::ProvenanceMismatch,
                  "embedded training data does not match its recorded digest");
  return m;
}

// --- training ---------------------------------------------------------------

TrainOutcome train_method(const RunConfig &cfg, const Dataset &train) {
  cfg.validate();
  train.validate();
  const Stopwatch clock;
  TrainOutcome out;
  TrainOptions topts = cfg.train;
  topts.opt.seed = cfg.seed;

  HyperParams init;
  if (cfg.init) {
    EIGENGP_REQUIRE(cfg.init->kernel.dim() == train.dim(), ErrorKind::DimensionMismatch,
                    "explicit kernel has D=" + std::to_string(cfg.init->kernel.dim()) +
                        ", data has D=" + std::to_string(train.dim()));
    init.kernel = cfg.init->kernel;
    init.sigma2 = cfg.init->sigma2;
    init.inducing.points =
        kmeans(train.X, cfg.m_ind, derive_seed(cfg.seed, 1)).centers;
    const Basis b = build_basis(init.inducing, init.kernel, cfg.basis_size());
    init.w = Vector::Zero(cfg.basis_size());
    init.w.head(b.m_basis()) = default_weights(b);
  } else {
    init = initialize_hyperparams(train.X, train.y, cfg.m_ind, cfg.basis_size(), cfg.seed,
                                  cfg.subset_fraction, topts);
  }
  out.init = init;

  MethodModel &m = out.model;
  m.method = cfg.method;
  m.cross = cfg.cross;
  m.X = train.X;
  m.y = train.y;
  m.train_digest = train.digest();

  TrainResult r;
  switch (cfg.method) {
  case Method::EigenGP:
  case Method::EigenGPPlus:
    r = train_sequential(train.X, train.y, init, m.variant(), topts);
    m.theta = r.model.theta;
    out.optimizer_invoked = true;
    break;
  case Method::EigenGPStar:
    r = train_joint(train.X, train.y, init, ModelVariant::Finite, topts);
    m.theta = r.model.theta;
    out.optimizer_invoked = true;
    break;
  case Method::NystromStar:
    r = train_phase1(train.X, train.y, init, ModelVariant::Finite, topts);
    m.theta = r.model.theta;
    out.optimizer_invoked = true;
    break;
  case Method::Nystrom:
    m.theta = init;
    break;
  case Method::FullGP: {
    FullGpTrainResult f = full_gp_train(train.X, train.y, init.kernel, init.sigma2, topts);
    m.theta = init;
    m.theta.kernel = f.model.kernel;
    m.theta.sigma2 = f.model.sigma2;
    PhaseTrace p;
    p.name = "full-gp";
    p.trace = f.trace;
    if (!f.trace.entries.empty()) {
      p.start_objective = f.trace.entries.front().objective;
      p.final_objective = f.trace.entries.back().objective;
    }
    r.phases.push_back(std::move(p));
    out.optimizer_invoked = true;
    break;
  }
  }
  out.phases = std::move(r.phases);
  out.seconds = clock.seconds();
  return out;
}

CellResult run_cell(const RunConfig &cfg, const DatasetPair &data, const std::string &dataset) {
  CellResult c;
  c.config = cfg;
  c.dataset = dataset;
  try {
    TrainOutcome t = train_method(cfg, data.train);
    c.phases = t.phases;
    const Stopwatch clock;
    const PredictiveDistribution pred = t.model.predict(data.test.X, &c.negative_variances);
    const double predict_seconds = clock.seconds();
    c.report = evaluate(data.test.y, pred, t.model.ybar_train(), cfg.denominator);
    c.report.train_seconds = t.seconds;
    c.report.predict_seconds = predict_seconds;
    c.log_evidence = t.model.log_evidence();
    c.ok = std::isfinite(c.report.nmse) && std::isfinite(c.report.mnlp);
    if (!c.ok)
      c.error = "non-finite metric";
  } catch (const Error &e) {
    c.ok = false;
    c.error = e.what();
    c.error_kind = e.kind();
  } catch (const std::exception &e) {
    c.ok = false;
    c.error = e.what();
  }
  return c;
}

std::vector<CellResult> run_benchmark(const BenchmarkSpec &spec, int jobs) {
  struct Job {
    Method method;
    Index m;
    std::uint64_t seed;
  };
  std::vector<Job> work;
  for (Method method : spec.methods)
    for (Index m : spec.ms)
      for (std::uint64_t seed : spec.seeds)
        work.push_back({method, m, seed});

  std::vector<CellResult> out(work.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      RunConfig cfg = spec.base;
      cfg.method = work[i].method;
      cfg.m_ind = work[i].m;
      if (cfg.m_basis > cfg.m_ind)
        cfg.m_basis = 0;
      cfg.seed = work[i].seed;
      cfg.train.opt.seed = work[i].seed;
      try {
        out[i] = run_cell(cfg, spec.make_data(work[i].seed), spec.dataset);
      } catch (const std::exception &e) {
        out[i].config = cfg;
        out[i].dataset = spec.dataset;
        out[i].error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(work.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t)
      pool.emplace_back(worker);
    for (auto &t : pool)
      t.join();
  }
  std::stable_sort(out.begin(), out.end(), [](const CellResult &a, const CellResult &b) {
    const auto key = [](const CellResult &c) {
      return std::make_tuple(std::string(to_string(c.config.method)), c.config.m_ind,
                             c.config.seed);
    };
    return key(a) < key(b);
  });
  return out;
}

std::string benchmark_csv(const std::vector<CellResult> &cells) {
  std::ostringstream s;
  s << std::setprecision(17);
  s << "method,M,seed,nmse,mnlp,train_seconds,status,error\n";
  for (const auto &c : cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    s << to_string(c.config.method) << ',' << c.config.m_ind << ',' << c.config.seed << ',';
    if (c.ok)
      s << c.report.nmse << ',' << c.report.mnlp << ',' << c.report.train_seconds << ",ok,";
    else
      s << ",,,failed,\"" << err << '"';
    s << '\n';
  }
  return s.str();
}

std::vector<CellSummary> summarize(const std::vector<CellResult> &cells) {
  std::vector<CellSummary> out;
  for (const auto &c : cells) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CellSummary &s) {
      return s.method == c.config.method && s.m == c.config.m_ind;
    });
    if (it == out.end()) {
      out.push_back({c.config.method, c.config.m_ind});
      it = out.end() - 1;
    }
    ++it->runs;
    if (!c.ok)
      ++it->failures;
  }
  for (auto &s : out) {
    std::vector<const CellResult *> ok;
    for (const auto &c : cells)
      if (c.ok && c.config.method == s.method && c.config.m_ind == s.m)
        ok.push_back(&c);
    const double n = static_cast<double>(ok.size());
    if (ok.empty()) {
      s.nmse_mean = s.mnlp_mean = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double sn = 0, sm = 0, st = 0;
    for (auto *c : ok) {
      sn += c->report.nmse;
      sm += c->report.mnlp;
      st += c->report.train_seconds;
    }
    s.nmse_mean = sn / n;
    s.mnlp_mean = sm / n;
    s.train_seconds_mean = st / n;
    if (ok.size() > 1) {
      double vn = 0, vm = 0;
      for (auto *c : ok) {
        vn += std::pow(c->report.nmse - s.nmse_mean, 2);
        vm += std::pow(c->report.mnlp - s.mnlp_mean, 2);
      }
      s.nmse_se = std::sqrt(vn / (n - 1.0) / n);
      s.mnlp_se = std::sqrt(vm / (n - 1.0) / n);
    }
  }
  return out;
}

Json summary_json(const std::vector<CellSummary> &s) {
  Json out = Json::array();
  const auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  for (const auto &c : s)
    out.push_back({{"method", to_string(c.method)},
                   {"M", c.m},
                   {"runs", c.runs},
                   {"failures", c.failures},
                   {"nmse_mean", num(c.nmse_mean)},
                   {"nmse_se", num(c.nmse_se)},
                   {"mnlp_mean", num(c.mnlp_mean)},
                   {"mnlp_se", num(c.mnlp_se)},
                   {"train_seconds_mean", num(c.train_seconds_mean)}});
  return out;
}

// --- benchmark data ---------------------------------------------------------

DatasetPair xsinx3_data(std::uint64_t seed) { return gen_xsinx3(200, 500, 0.5, 0.0, 3.0, seed); }

DatasetPair snelson_like_data(std::uint64_t seed, Index n_train, Index n_test) {
  DatasetPair out;
  out.train = gen_snelson_like(n_train, seed);
  const SubsetInit init = subset_gp_init(out.train.X, out.train.y, 0.1, derive_seed(seed, 0));
  const FullGpTrainResult ref =
      full_gp_train(out.train.X, out.train.y, init.kernel, init.sigma2);
  out.test.X = grid_inputs(n_test, 0.0, 6.0);
  out.test.y = full_gp_predict(ref.model, out.test.X).mean;
  out.test.feature_names = {"x"};
  out.test.provenance = {{"source", "full-gp labels"},
                         {"train_digest", out.train.digest()},
                         {"grid", {0.0, 6.0, n_test}},
                         {"label_kernel", to_json(ref.model.kernel)},
                         {"label_sigma2", ref.model.sigma2},
                         {"digest", out.test.digest()}};
  return out;
}

} // namespace eigengp
