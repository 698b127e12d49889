#include "eigengp/dataio.hpp"

#include "eigengp/digest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace eigengp {

void Dataset::validate() const {
  EIGENGP_REQUIRE(X.rows() == y.size(), ErrorKind::DimensionMismatch,
                  "dataset has " + std::to_string(X.rows()) + " input rows and " +
                      std::to_string(y.size()) + " targets");
  EIGENGP_REQUIRE(X.allFinite() && y.allFinite(), ErrorKind::InvalidArgument,
                  "dataset contains non-finite values");
  EIGENGP_REQUIRE(feature_names.empty() ||
                      static_cast<Index>(feature_names.size()) == X.cols(),
                  ErrorKind::DimensionMismatch, "feature name count does not match columns");
}

double xsinx3(double x) { return x * std::sin(x * x * x); }

DatasetPair gen_xsinx3(Index n_train, Index n_test, double noise_sd, double lo, double hi,
                       std::uint64_t seed) {
  EIGENGP_REQUIRE(n_train >= 1 && n_test >= 1, ErrorKind::InvalidArgument,
                  "n_train and n_test must be >= 1");
  EIGENGP_REQUIRE(lo < hi && noise_sd >= 0.0, ErrorKind::InvalidArgument,
                  "need lo < hi and noise_sd >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(lo, hi);
  std::normal_distribution<double> noise(0.0, 1.0);

  DatasetPair out;
  out.train.X.resize(n_train, 1);
  out.train.y.resize(n_train);
  for (Index i = 0; i < n_train; ++i) {
    const double x = ux(rng);
    out.train.X(i, 0) = x;
    out.train.y(i) = xsinx3(x) + noise_sd * noise(rng);
  }
  out.test.X.resize(n_test, 1);
  out.test.y.resize(n_test);
  for (Index i = 0; i < n_test; ++i) {
    const double x = ux(rng);
    out.test.X(i, 0) = x;
    out.test.y(i) = xsinx3(x);
  }
  const Json params = {{"n_train", n_train}, {"n_test", n_test}, {"noise_sd", noise_sd},
                       {"x_range", {lo, hi}}};
  for (Dataset *d : {&out.train, &out.test}) {
    d->feature_names = {"x"};
    d->provenance = {{"source", "generator"}, {"generator", "xsinx3"}, {"params", params},
                     {"rng", kRngName},       {"seed", seed},         {"digest", d->digest()},
                     {"part", d == &out.train ? "train" : "test"}};
  }
  return out;
}

double snelson_like_mean(double x) {
  return 0.9 * std::sin(1.7 * x) + 0.6 * std::cos(3.3 * x + 0.4) * std::exp(-0.15 * (x - 3.0) * (x - 3.0)) -
         0.3;
}

Dataset gen_snelson_like(Index n_train, std::uint64_t seed) {
  EIGENGP_REQUIRE(n_train >= 1, ErrorKind::InvalidArgument, "n_train must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 6.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset d;
  d.X.resize(n_train, 1);
  d.y.resize(n_train);
  for (Index i = 0; i < n_train; ++i) {
    const double x = ux(rng);
    d.X(i, 0) = x;
    d.y(i) = snelson_like_mean(x) + kSnelsonLikeNoiseSd * noise(rng);
  }
  d.feature_names = {"x"};
  d.provenance = {{"source", "generator"},
                  {"generator", "snelson_like"},
                  {"synthetic", true},
                  {"params", {{"n_train", n_train}, {"noise_sd", kSnelsonLikeNoiseSd}, {"x_range", {0.0, 6.0}}}},
                  {"rng", kRngName},
                  {"seed", seed},
                  {"digest", d.digest()}};
  return d;
}

Matrix grid_inputs(Index n, double lo, double hi) {
  EIGENGP_REQUIRE(n >= 1, ErrorKind::InvalidArgument, "grid needs at least one point");
  Matrix X(n, 1);
  for (Index i = 0; i < n; ++i)
    X(i, 0) = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return X;
}

namespace {

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  EIGENGP_REQUIRE(in.good(), ErrorKind::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.front()))
    s.remove_prefix(1);
  while (!s.empty() && ws(s.back()))
    s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double &out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  if (s.empty())
    return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::vector<double>> read_numeric_rows(const std::filesystem::path &path) {
  const std::string text = read_file(path);
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view t = trim(line);
    if (t.empty())
      continue;
    std::vector<double> row;
    std::istringstream fields{std::string(t)};
    std::string tok;
    while (fields >> tok) {
      double v;
      if (!parse_double(tok, v))
        throw Error(ErrorKind::FileFormatError, path.string() + ": line " +
                                                    std::to_string(lineno) +
                                                    ": not a number: '" + tok + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorKind::FileFormatError,
                  path.string() + ": line " + std::to_string(lineno) + ": expected " +
                      std::to_string(rows.front().size()) + " columns, found " +
                      std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace

std::string file_sha256(const std::filesystem::path &path) {
  return sha256_hex(read_file(path));
}

Dataset load_columns(const std::filesystem::path &inputs, const std::filesystem::path &outputs) {
  const auto xr = read_numeric_rows(inputs);
  const auto yr = read_numeric_rows(outputs);
  EIGENGP_REQUIRE(!xr.empty(), ErrorKind::FileFormatError, inputs.string() + ": no data");
  EIGENGP_REQUIRE(xr.size() == yr.size(), ErrorKind::FileFormatError,
                  "inputs have " + std::to_string(xr.size()) + " rows, outputs have " +
                      std::to_string(yr.size()));
  EIGENGP_REQUIRE(yr.front().size() == 1, ErrorKind::FileFormatError,
                  outputs.string() + ": expected a single column");
  Dataset d;
  const Index n = static_cast<Index>(xr.size());
  const Index D = static_cast<Index>(xr.front().size());
  d.X.resize(n, D);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < D; ++j)
      d.X(i, j) = xr[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    d.y(i) = yr[static_cast<std::size_t>(i)][0];
  }
  d.provenance = {{"source", "columns"},
                  {"inputs", inputs.string()},
                  {"outputs", outputs.string()},
                  {"inputs_sha256", file_sha256(inputs)},
                  {"outputs_sha256", file_sha256(outputs)},
                  {"digest", d.digest()}};
  return d;
}

std::vector<std::vector<std::string>> parse_csv(const std::string &text, char delimiter) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  const auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  const auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record.front().empty()))
      records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // CRLF: handled on '\n'
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  EIGENGP_REQUIRE(!in_quotes, ErrorKind::FileFormatError, "unterminated quoted field");
  if (!field.empty() || !record.empty())
    end_record();
  return records;
}

Dataset load_csv(const std::filesystem::path &path, const CsvOptions &opts) {
  const std::string text = read_file(path);
  const auto records = parse_csv(text, opts.delimiter);
  const std::size_t first_data = opts.header ? 1 : 0;
  EIGENGP_REQUIRE(records.size() > first_data, ErrorKind::FileFormatError,
                  path.string() + ": no data rows");
  const std::size_t ncol = records.front().size();
  EIGENGP_REQUIRE(ncol >= 2, ErrorKind::FileFormatError,
                  path.string() + ": need at least two columns");

  // resolve the target column
  long long target = 0;
  bool found = false;
  {
    long long idx = 0;
    const std::string &t = opts.target;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), idx);
    if (ec == std::errc() && ptr == t.data() + t.size()) {
      const long long n = static_cast<long long>(ncol);
      if (idx < 0)
        idx += n;
      found = idx >= 0 && idx < n;
      target = idx;
    }
    if (!found && opts.header) {
      const auto &names = records.front();
      const auto it = std::find(names.begin(), names.end(), t);
      if (it != names.end()) {
        found = true;
        target = it - names.begin();
      }
    }
  }
  EIGENGP_REQUIRE(found, ErrorKind::MissingTarget,
                  path.string() + ": target column '" + opts.target + "' not found");

  const Index n = static_cast<Index>(records.size() - first_data);
  Dataset d;
  d.X.resize(n, static_cast<Index>(ncol - 1));
  d.y.resize(n);
  for (Index r = 0; r < n; ++r) {
    const auto &rec = records[static_cast<std::size_t>(r) + first_data];
    const std::size_t row_no = static_cast<std::size_t>(r) + 1;
    if (rec.size() != ncol)
      throw Error(ErrorKind::FileFormatError,
                  path.string() + ": row " + std::to_string(row_no) + ": expected " +
                      std::to_string(ncol) + " columns, found " + std::to_string(rec.size()));
    Index out_col = 0;
    for (std::size_t c = 0; c < ncol; ++c) {
      double v;
      if (!parse_double(rec[c], v))
        throw Error(ErrorKind::NonNumericCell,
                    path.string() + ": row " + std::to_string(row_no) + ", column " +
                        std::to_string(c + 1) + ": '" + rec[c] + "'");
      if (static_cast<long long>(c) == target)
        d.y(r) = v;
      else
        d.X(r, out_col++) = v;
    }
  }
  if (opts.header)
    for (std::size_t c = 0; c < ncol; ++c)
      if (static_cast<long long>(c) != target)
        d.feature_names.push_back(records.front()[c]);
  d.provenance = {{"source", "csv"},
                  {"path", path.string()},
                  {"sha256", sha256_hex(text)},
                  {"target", opts.target},
                  {"target_index", target},
                  {"header", opts.header},
                  {"delimiter", std::string(1, opts.delimiter)},
                  {"digest", d.digest()}};
  return d;
}

namespace {

Dataset take_rows(const Dataset &d, const std::vector<Index> &rows) {
  Dataset out;
  const Index n = static_cast<Index>(rows.size());
  out.X.resize(n, d.dim());
  out.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    out.X.row(i) = d.X.row(rows[static_cast<std::size_t>(i)]);
    out.y(i) = d.y(rows[static_cast<std::size_t>(i)]);
  }
  out.feature_names = d.feature_names;
  return out;
}

} // namespace

DatasetPair split_counts(const Dataset &d, Index n_train, Index n_test, std::uint64_t seed) {
  EIGENGP_REQUIRE(n_train >= 0 && n_test >= 0, ErrorKind::InvalidArgument,
                  "split counts must be nonnegative");
  EIGENGP_REQUIRE(n_train + n_test <= d.size(), ErrorKind::CountsExceedN,
                  "split counts " + std::to_string(n_train) + " + " + std::to_string(n_test) +
                      " exceed N=" + std::to_string(d.size()));
  std::vector<Index> perm(static_cast<std::size_t>(d.size()));
  std::iota(perm.begin(), perm.end(), Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  DatasetPair out;
  out.train = take_rows(d, {perm.begin(), perm.begin() + n_train});
  out.test = take_rows(d, {perm.begin() + n_train, perm.begin() + n_train + n_test});
  if (n_test == 0)
    out.warnings.push_back("test set is empty");
  const Json split = {{"parent_digest", d.digest()},
                      {"rng", kRngName},
                      {"seed", seed},
                      {"n_train", n_train},
                      {"n_test", n_test},
                      {"train_digest", out.train.digest()},
                      {"test_digest", out.test.digest()}};
  out.train.provenance = {{"source", "split"}, {"part", "train"}, {"parent", d.provenance},
                          {"split", split}, {"digest", out.train.digest()}};
  out.test.provenance = {{"source", "split"}, {"part", "test"}, {"parent", d.provenance},
                         {"split", split}, {"digest", out.test.digest()}};
  return out;
}

DatasetPair split_fraction(const Dataset &d, double train_fraction, std::uint64_t seed) {
  EIGENGP_REQUIRE(train_fraction >= 0.0 && train_fraction <= 1.0, ErrorKind::InvalidArgument,
                  "train fraction must lie in [0, 1]");
  const Index n_train = static_cast<Index>(std::llround(train_fraction * static_cast<double>(d.size())));
  return split_counts(d, n_train, d.size() - n_train, seed);
}

Standardizer Standardizer::fit(const Dataset &train) {
  EIGENGP_REQUIRE(train.size() >= 1, ErrorKind::InvalidArgument,
                  "cannot standardize an empty dataset");
  Standardizer s;
  const double n = static_cast<double>(train.size());
  s.x_mean_ = train.X.colwise().mean().transpose();
  s.x_scale_.resize(train.dim());
  s.constant_.assign(static_cast<std::size_t>(train.dim()), false);
  for (Index d = 0; d < train.dim(); ++d) {
    const double sd = std::sqrt((train.X.col(d).array() - s.x_mean_(d)).square().sum() / n);
    if (sd > 0.0) {
      s.x_scale_(d) = sd;
    } else {
      s.x_scale_(d) = 1.0;
      s.constant_[static_cast<std::size_t>(d)] = true;
    }
  }
  s.y_mean_ = train.y.mean();
  const double ysd = std::sqrt((train.y.array() - s.y_mean_).square().sum() / n);
  s.y_scale_ = ysd > 0.0 ? ysd : 1.0;
  s.fitted_on_ = train.digest();
  s.fitted_ = true;
  return s;
}

void Standardizer::require_fitted() const {
  EIGENGP_REQUIRE(fitted_, ErrorKind::NotFitted, "standardizer has not been fitted");
}

Matrix Standardizer::apply_inputs(const Matrix &X) const {
  require_fitted();
  EIGENGP_REQUIRE(X.cols() == x_mean_.size(), ErrorKind::DimensionMismatch,
                  "standardizer was fitted on " + std::to_string(x_mean_.size()) + " columns");
  return ((X.rowwise() - x_mean_.transpose()).array().rowwise() / x_scale_.transpose().array())
      .matrix();
}

Vector Standardizer::apply_targets(const Vector &y) const {
  require_fitted();
  return (y.array() - y_mean_) / y_scale_;
}

Dataset Standardizer::apply(const Dataset &d) const {
  Dataset out = d;
  out.X = apply_inputs(d.X);
  out.y = apply_targets(d.y);
  out.provenance = {{"source", "standardized"}, {"parent", d.provenance}, {"fitted_on", fitted_on_},
                    {"digest", out.digest()}};
  return out;
}

PredictiveDistribution Standardizer::invert(const PredictiveDistribution &p) const {
  require_fitted();
  PredictiveDistribution out = p;
  out.mean = (p.mean.array() * y_scale_ + y_mean_).matrix();
  out.variance = p.variance * (y_scale_ * y_scale_);
  return out;
}

Json Standardizer::to_json() const {
  require_fitted();
  return {{"feature_mean", std::vector<double>(x_mean_.data(), x_mean_.data() + x_mean_.size())},
          {"feature_scale", std::vector<double>(x_scale_.data(), x_scale_.data() + x_scale_.size())},
          {"constant_features", constant_},
          {"target_mean", y_mean_},
          {"target_scale", y_scale_},
          {"fitted_on", fitted_on_}};
}

Standardizer Standardizer::from_json(const Json &j) {
  Standardizer s;
  const auto xm = j.at("feature_mean").get<std::vector<double>>();
  const auto xs = j.at("feature_scale").get<std::vector<double>>();
  EIGENGP_REQUIRE(xm.size() == xs.size(), ErrorKind::SchemaMismatch,
                  "standardizer feature vectors differ in length");
  s.x_mean_ = Eigen::Map<const Vector>(xm.data(), static_cast<Index>(xm.size()));
  s.x_scale_ = Eigen::Map<const Vector>(xs.data(), static_cast<Index>(xs.size()));
  s.constant_ = j.at("constant_features").get<std::vector<bool>>();
  s.y_mean_ = j.at("target_mean").get<double>();
  s.y_scale_ = j.at("target_scale").get<double>();
  s.fitted_on_ = j.at("fitted_on").get<std::string>();
  s.fitted_ = true;
  return s;
}

} // namespace eigengp
