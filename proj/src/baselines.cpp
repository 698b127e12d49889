#include "eigengp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>

namespace eigengp {

namespace {

constexpr Index kPredictChunk = 512;

void check_data(const Matrix &X, const Vector &y, const Kernel &kernel, double sigma2,
                Index max_n) {
  EIGENGP_REQUIRE(X.rows() == y.size() && X.rows() >= 1, ErrorKind::DimensionMismatch,
                  "X rows and y length must match and be positive");
  EIGENGP_REQUIRE(X.cols() == kernel.dim(), ErrorKind::DimensionMismatch,
                  "inputs have " + std::to_string(X.cols()) + " columns, kernel has D=" +
                      std::to_string(kernel.dim()));
  EIGENGP_REQUIRE(X.rows() <= max_n, ErrorKind::SizeGuardExceeded,
                  "full GP refused for N=" + std::to_string(X.rows()) + " > " +
                      std::to_string(max_n));
  EIGENGP_REQUIRE(kernel.valid(), ErrorKind::InvalidArgument, "invalid kernel parameters");
  EIGENGP_REQUIRE(sigma2 > 0.0 && std::isfinite(sigma2), ErrorKind::NonPositiveNoise,
                  "sigma2 must be positive");
}

PsdFactor<double> factor_covariance(const Matrix &X, const Kernel &kernel, double sigma2,
                                    Matrix *K_out = nullptr) {
  Matrix C = kernel_matrix(X, X, kernel);
  if (K_out)
    *K_out = C;
  C.diagonal().array() += sigma2;
  return chol_psd(C, default_jitter(C));
}

double variance(const Vector &v) {
  return (v.array() - v.mean()).square().mean();
}

} // namespace

FullGpEvidence full_gp_evidence(const Matrix &X, const Vector &y, const Kernel &kernel,
                                double sigma2, Index max_n) {
  check_data(X, y, kernel, sigma2, max_n);
  Matrix K;
  const PsdFactor<double> F = factor_covariance(X, kernel, sigma2, &K);
  const Vector alpha = solve_psd(F, y);
  const Index n = X.rows();

  FullGpEvidence out;
  out.value = -0.5 * F.log_determinant() - 0.5 * y.dot(alpha) -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  Matrix G = -solve_psd(F, Matrix::Identity(n, n));
  G.noalias() += alpha * alpha.transpose();
  G *= 0.5;
  const KernelGrads<double> grads(X, X, kernel);
  out.d_a0 = grads.contract_a0(G);
  out.d_eta = grads.contract_eta(G);
  out.d_sigma2 = G.trace();
  return out;
}

FullGpModel full_gp_fit(const Matrix &X, const Vector &y, const Kernel &kernel, double sigma2,
                        Index max_n) {
  check_data(X, y, kernel, sigma2, max_n);
  FullGpModel m;
  m.kernel = kernel;
  m.sigma2 = sigma2;
  m.X = X;
  PsdFactor<double> F = factor_covariance(X, kernel, sigma2);
  m.alpha = solve_psd(F, y);
  m.chol_lower = std::move(F.lower_triangular);
  return m;
}

FullGpTrainResult full_gp_train(const Matrix &X, const Vector &y, const Kernel &kernel0,
                                double sigma2_0, const TrainOptions &opts, Index max_n) {
  check_data(X, y, kernel0, sigma2_0, max_n);
  std::vector<Index> eta_active;
  for (Index d = 0; d < kernel0.dim(); ++d)
    if (kernel0.eta(d) > 0.0)
      eta_active.push_back(d);
  const Index na = static_cast<Index>(eta_active.size());
  const double floor = sigma2_floor(y, opts.sigma2_floor_rel);

  const auto unpack = [&](const Vector &v, Kernel &k, double &s2) {
    k = kernel0;
    k.a0 = std::exp(v(0));
    for (Index i = 0; i < na; ++i)
      k.eta(eta_active[static_cast<std::size_t>(i)]) = std::exp(v(1 + i));
    s2 = std::max(std::exp(v(1 + na)), floor);
  };
  const Objective objective = [&](const Vector &v, Vector &grad) {
    Kernel k;
    double s2;
    unpack(v, k, s2);
    const FullGpEvidence e = full_gp_evidence(X, y, k, s2, max_n);
    grad.resize(v.size());
    grad(0) = -k.a0 * e.d_a0;
    for (Index i = 0; i < na; ++i) {
      const Index d = eta_active[static_cast<std::size_t>(i)];
      grad(1 + i) = -k.eta(d) * e.d_eta(d);
    }
    grad(1 + na) = s2 <= floor ? 0.0 : -s2 * e.d_sigma2;
    return -e.value;
  };

  Vector v0(na + 2);
  v0(0) = std::log(kernel0.a0);
  for (Index i = 0; i < na; ++i)
    v0(1 + i) = std::log(kernel0.eta(eta_active[static_cast<std::size_t>(i)]));
  v0(1 + na) = std::log(std::max(sigma2_0, floor));

  const OptResult r = minimize_cg(objective, v0, opts.opt);
  FullGpTrainResult out;
  Kernel k;
  double s2;
  unpack(r.x, k, s2);
  out.model = full_gp_fit(X, y, k, s2, max_n);
  out.trace = r.trace;
  return out;
}

PredictiveDistribution full_gp_predict(const FullGpModel &m, const Matrix &Xstar) {
  EIGENGP_REQUIRE(Xstar.cols() == m.X.cols(), ErrorKind::DimensionMismatch,
                  "test inputs have " + std::to_string(Xstar.cols()) + " columns, model expects " +
                      std::to_string(m.X.cols()));
  PredictiveDistribution out;
  out.mean.resize(Xstar.rows());
  out.variance.resize(Xstar.rows());
  const auto L = m.chol_lower.triangularView<Eigen::Lower>();
  for (Index start = 0; start < Xstar.rows(); start += kPredictChunk) {
    const Index c = std::min(kPredictChunk, Xstar.rows() - start);
    const Matrix Ks = kernel_matrix(Xstar.middleRows(start, c), m.X, m.kernel);
    out.mean.segment(start, c) = Ks * m.alpha;
    Matrix V = Ks.transpose();
    L.solveInPlace(V);
    out.variance.segment(start, c) =
        (m.kernel.a0 - V.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
  }
  out.variance.array() += m.sigma2;
  return out;
}

const char *to_string(NystromCross c) {
  return c == NystromCross::Exact ? "exact" : "lowrank";
}

NystromCross nystrom_cross_from_string(const std::string &s) {
  if (s == "exact")
    return NystromCross::Exact;
  if (s == "lowrank")
    return NystromCross::LowRank;
  throw Error(ErrorKind::InvalidArgument, "unknown Nystrom cross-covariance mode '" + s + "'");
}

NystromPrediction nystrom_gp_predict(const Matrix &X, const Vector &y, const Matrix &B,
                                     const Kernel &p, double sigma2, const Matrix &Xstar,
                                     NystromCross cross) {
  HyperParams theta;
  theta.kernel = p;
  theta.inducing.points = B;
  theta.sigma2 = sigma2;
  const Basis basis = build_basis(theta.inducing, p, B.rows());
  theta.w = Vector::Zero(B.rows());
  theta.w.head(basis.m_basis()) = default_weights(basis);
  theta.validate();
  EIGENGP_REQUIRE(Xstar.cols() == p.dim(), ErrorKind::DimensionMismatch,
                  "test inputs have " + std::to_string(Xstar.cols()) + " columns, kernel has D=" +
                      std::to_string(p.dim()));

  NystromPrediction out;
  if (cross == NystromCross::LowRank) {
    out.dist = predict(fit(X, y, theta, ModelVariant::Finite), Xstar);
    out.raw_variance = out.dist.variance;
  } else {
    EIGENGP_REQUIRE(X.rows() == y.size() && X.cols() == p.dim(), ErrorKind::DimensionMismatch,
                    "training data shape mismatch");
    const Matrix Phi = eval_phi(basis, X);
    const LowRankStats<double> stats = lowrank_stats(Phi, default_weights(basis), sigma2, y);
    out.dist.mean.resize(Xstar.rows());
    out.raw_variance.resize(Xstar.rows());
    for (Index start = 0; start < Xstar.rows(); start += kPredictChunk) {
      const Index c = std::min(kPredictChunk, Xstar.rows() - start);
      const Matrix Ks = kernel_matrix(Xstar.middleRows(start, c), X, p);
      out.dist.mean.segment(start, c) = Ks * stats.alpha;
      const Matrix S = stats.solve(Ks.transpose());
      out.raw_variance.segment(start, c) =
          (p.a0 - (Ks.array() * S.transpose().array()).rowwise().sum()).matrix();
    }
    out.raw_variance.array() += sigma2;
  }
  out.negative = out.raw_variance.array() < 0.0;
  out.negative_count = out.negative.count();
  out.dist.variance = out.raw_variance.array().max(kVarianceClamp);
  if (out.negative_count > 0)
    out.dist.warnings.push_back(std::to_string(out.negative_count) +
                                " test points had negative predictive variance; clamped");
  return out;
}

KMeansResult kmeans(const Matrix &X, Index M, std::uint64_t seed, int max_iters) {
  const Index N = X.rows();
  EIGENGP_REQUIRE(M >= 1 && M <= N, ErrorKind::InvalidArgument,
                  "k-means needs 1 <= M <= N (M=" + std::to_string(M) + ", N=" +
                      std::to_string(N) + ")");
  EIGENGP_REQUIRE(max_iters >= 1, ErrorKind::InvalidArgument, "max_iters must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const auto sqdist_to = [&](const Eigen::RowVectorXd &c) -> Vector {
    return (X.rowwise() - c).rowwise().squaredNorm();
  };

  // k-means++ seeding
  KMeansResult res;
  res.centers.resize(M, X.cols());
  Index first = std::min<Index>(static_cast<Index>(unif(rng) * static_cast<double>(N)), N - 1);
  res.centers.row(0) = X.row(first);
  Vector d2 = sqdist_to(res.centers.row(0));
  for (Index k = 1; k < M; ++k) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      const double target = unif(rng) * total;
      double acc = 0.0;
      pick = N - 1;
      for (Index i = 0; i < N; ++i) {
        acc += d2(i);
        if (acc > target && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::min<Index>(static_cast<Index>(unif(rng) * static_cast<double>(N)), N - 1);
    }
    res.centers.row(k) = X.row(pick);
    d2 = d2.cwiseMin(sqdist_to(res.centers.row(k)));
  }

  // Lloyd
  res.assignment.assign(static_cast<std::size_t>(N), -1);
  Vector best(N);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    double cost = 0.0;
    for (Index i = 0; i < N; ++i) {
      Index arg = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (Index k = 0; k < M; ++k) {
        const double dk = (X.row(i) - res.centers.row(k)).squaredNorm();
        if (dk < bd) {
          bd = dk;
          arg = k;
        }
      }
      best(i) = bd;
      cost += bd;
      if (res.assignment[static_cast<std::size_t>(i)] != arg) {
        res.assignment[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }
    res.objective.push_back(cost);
    res.iterations = it + 1;

    Matrix sums = Matrix::Zero(M, X.cols());
    std::vector<Index> counts(static_cast<std::size_t>(M), 0);
    for (Index i = 0; i < N; ++i) {
      const Index k = res.assignment[static_cast<std::size_t>(i)];
      sums.row(k) += X.row(i);
      ++counts[static_cast<std::size_t>(k)];
    }
    bool reseeded = false;
    for (Index k = 0; k < M; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) {
        res.centers.row(k) = sums.row(k) / static_cast<double>(counts[static_cast<std::size_t>(k)]);
        continue;
      }
      // empty cluster: move it onto the point farthest from its center
      Index far = 0;
      best.maxCoeff(&far);
      res.centers.row(k) = X.row(far);
      best(far) = 0.0;
      reseeded = true;
    }
    if (!changed && !reseeded && it > 0)
      break;
  }
  return res;
}

SubsetInit subset_gp_init(const Matrix &X, const Vector &y, double fraction, std::uint64_t seed,
                          const TrainOptions &opts) {
  EIGENGP_REQUIRE(X.rows() == y.size(), ErrorKind::DimensionMismatch,
                  "X rows and y length must match");
  EIGENGP_REQUIRE(fraction > 0.0 && fraction <= 1.0, ErrorKind::InvalidArgument,
                  "subset fraction must lie in (0, 1]");
  const Index N = X.rows();
  const Index n_sub = static_cast<Index>(std::llround(fraction * static_cast<double>(N)));
  EIGENGP_REQUIRE(n_sub >= 10, ErrorKind::SubsetTooSmall,
                  "subset of " + std::to_string(n_sub) + " points (fraction " +
                      std::to_string(fraction) + " of N=" + std::to_string(N) +
                      ") is below the minimum of 10");

  std::vector<Index> idx(static_cast<std::size_t>(N));
  std::iota(idx.begin(), idx.end(), Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(n_sub));
  std::sort(idx.begin(), idx.end());

  Matrix Xs(n_sub, X.cols());
  Vector ys(n_sub);
  for (Index i = 0; i < n_sub; ++i) {
    Xs.row(i) = X.row(idx[static_cast<std::size_t>(i)]);
    ys(i) = y(idx[static_cast<std::size_t>(i)]);
  }

  const double vy = variance(ys);
  Kernel k0;
  k0.a0 = vy > 0.0 ? vy : 1.0;
  k0.eta.resize(X.cols());
  for (Index d = 0; d < X.cols(); ++d) {
    const double vd = variance(Xs.col(d));
    k0.eta(d) = vd > 0.0 ? 0.5 / vd : 1.0;
  }
  const double s0 = 0.1 * k0.a0;

  // a handful of shorter starting lengthscales; keep the best evidence
  std::optional<FullGpTrainResult> best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (double mult : kSubsetEtaMultipliers) {
    Kernel k = k0;
    k.eta *= mult;
    FullGpTrainResult r = full_gp_train(Xs, ys, k, s0, opts);
    const double value = full_gp_evidence(Xs, ys, r.model.kernel, r.model.sigma2).value;
    if (value > best_value) {
      best_value = value;
      best = std::move(r);
    }
  }
  EIGENGP_REQUIRE(best.has_value(), ErrorKind::NonFiniteObjective,
                  "subset GP evidence is not finite at any start");
  const FullGpTrainResult &r = *best;
  SubsetInit out;
  out.kernel = r.model.kernel;
  out.sigma2 = r.model.sigma2;
  out.subset = std::move(idx);
  return out;
}

HyperParams initialize_hyperparams(const Matrix &X, const Vector &y, Index m_ind, Index m_basis,
                                   std::uint64_t seed, double subset_fraction,
                                   const TrainOptions &opts) {
  EIGENGP_REQUIRE(m_basis >= 1 && m_basis <= m_ind, ErrorKind::InvalidArgument,
                  "M_basis must lie in [1, M_ind]");
  const SubsetInit init = subset_gp_init(X, y, subset_fraction, derive_seed(seed, 0), opts);
  HyperParams theta;
  theta.kernel = init.kernel;
  theta.sigma2 = init.sigma2;
  theta.inducing.points = kmeans(X, m_ind, derive_seed(seed, 1)).centers;
  const Basis basis = build_basis(theta.inducing, theta.kernel, m_basis);
  theta.w = Vector::Zero(m_basis);
  theta.w.head(basis.m_basis()) = default_weights(basis);
  return theta;
}

} // namespace eigengp
