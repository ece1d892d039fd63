#pragma once

// Infinite Feature Selection: features are nodes of an affinity graph and
// are scored by the summed weight of all paths through them, evaluated in
// closed form as row sums of (I - rA)^-1 - I.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "rfg/error.hpp"

namespace rfg {

/// Samples in rows, features in columns. Labels are carried for downstream
/// stages; feature selection never reads them.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<int> labels;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

struct IfsResult {
  std::vector<double> scores;
  std::vector<std::size_t> ranking;  // descending score, ties by ascending index
  double spectral_radius = 0.0;
  bool zero_graph = false;  // A == 0: no paths, every score is 0
  int solver_iterations = 0;
};

namespace detail {

// Neumaier-compensated dot product. The result is, to within rounding of
// the final sum, independent of the order of the terms.
inline double dot_compensated(const double* a, const double* b, Eigen::Index n) {
  double s = 0.0, c = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = a[i] * b[i];
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

inline double dot_compensated(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return dot_compensated(a.data(), b.data(), a.size());
}

// y = A v for symmetric A, reading contiguous columns.
inline void symmetric_matvec(const Eigen::MatrixXd& a, const Eigen::VectorXd& v,
                             Eigen::VectorXd& y) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i) y[i] = dot_compensated(a.col(i).data(), v.data(), n);
}

// Average ranks (1-based), ties share the mean of their positions.
inline Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index m = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  Eigen::VectorXd ranks(m);
  Eigen::Index i = 0;
  while (i < m) {
    Eigen::Index j = i;
    while (j + 1 < m && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

constexpr Eigen::Index kTile = 64;

// Copies the strict lower triangle onto the upper one, tile by tile.
inline void mirror_lower(Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index jb = 0; jb < n; jb += kTile)
    for (Eigen::Index ib = jb; ib < n; ib += kTile)
      for (Eigen::Index j = jb; j < std::min(jb + kTile, n); ++j)
        for (Eigen::Index i = std::max(ib, j + 1); i < std::min(ib + kTile, n); ++i)
          a(j, i) = a(i, j);
}

inline bool is_symmetric(const Eigen::MatrixXd& a, double tol) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index jb = 0; jb < n; jb += kTile)
    for (Eigen::Index ib = jb; ib < n; ib += kTile)
      for (Eigen::Index j = jb; j < std::min(jb + kTile, n); ++j)
        for (Eigen::Index i = std::max(ib, j + 1); i < std::min(ib + kTile, n); ++i)
          if (std::abs(a(i, j) - a(j, i)) > tol) return false;
  return true;
}

struct CompactAffinity {
  Eigen::MatrixXd a;                   // over the kept features only
  std::vector<Eigen::Index> features;  // original column of each kept feature
};

// Affinity restricted to non-constant features (optionally the
// `max_features` with the largest spread). Dropped features are isolated
// graph nodes.
inline CompactAffinity compact_affinity(const Eigen::MatrixXd& data, double alpha,
                                        std::size_t max_features = 0) {
  const Eigen::Index m = data.rows(), n = data.cols();
  if (m < 2 || n < 2) throw Error(Errc::InvalidArgument, "affinity needs >= 2 samples and features");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::InvalidArgument, "alpha must be in [0,1]");
  if (!data.allFinite()) throw Error(Errc::InvalidArgument, "feature matrix has NaN/Inf");

  Eigen::VectorXd sd(n);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto col = data.col(j);
    const double mean = col.mean();
    sd[j] = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(m));
    if (col.maxCoeff() != col.minCoeff()) kept.push_back(j);
  }
  if (kept.empty()) throw Error(Errc::DegenerateData, "all features are constant");
  if (max_features > 0 && kept.size() > max_features) {
    std::stable_sort(kept.begin(), kept.end(), [&](auto a, auto b) { return sd[a] > sd[b]; });
    kept.resize(max_features);
    std::sort(kept.begin(), kept.end());
  }
  const auto k = static_cast<Eigen::Index>(kept.size());
  double sd_max = 0.0;
  for (auto j : kept) sd_max = std::max(sd_max, sd[j]);

  // Spearman correlation = Pearson correlation of the rank vectors.
  Eigen::MatrixXd z(m, k);
  Eigen::VectorXd sd_hat(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd r = average_ranks(data.col(kept[static_cast<std::size_t>(c)]));
    r.array() -= r.mean();
    z.col(c) = r / r.norm();
    sd_hat[c] = sd[kept[static_cast<std::size_t>(c)]] / sd_max;
  }
  CompactAffinity out{Eigen::MatrixXd::Zero(k, k), std::move(kept)};
  out.a.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose());
  for (Eigen::Index j = 0; j < k; ++j) {
    out.a(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < k; ++i) {
      const double rho = std::min(1.0, std::abs(out.a(i, j)));
      out.a(i, j) = alpha * std::max(sd_hat[i], sd_hat[j]) + (1.0 - alpha) * (1.0 - rho);
    }
  }
  mirror_lower(out.a);
  return out;
}

}  // namespace detail

/// A[i][j] = alpha * max(sd_i, sd_j) / max_sd + (1 - alpha) * (1 - |spearman_ij|),
/// zero diagonal. Constant features are isolated nodes (zero rows/columns).
inline Eigen::MatrixXd affinity_matrix(const Eigen::MatrixXd& data, double alpha) {
  auto compact = detail::compact_affinity(data, alpha);
  const Eigen::Index n = data.cols();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const auto k = static_cast<Eigen::Index>(compact.features.size());
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < k; ++i)
      a(compact.features[static_cast<std::size_t>(i)], compact.features[static_cast<std::size_t>(j)]) =
          compact.a(i, j);
  return a;
}

inline std::vector<std::size_t> rank_descending(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return scores[a] > scores[b]; });
  return order;
}

inline constexpr int kPowerIterations = 100;
inline constexpr double kPowerTolerance = 1e-10;
inline constexpr double kSolverTolerance = 1e-13;

/// Largest eigenvalue magnitude of a symmetric non-negative matrix by power
/// iteration from the all-ones vector.
inline double spectral_radius(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  if (n == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Eigen::VectorXd w(n);
  double lambda = 0.0;
  for (int it = 0; it < kPowerIterations; ++it) {
    detail::symmetric_matvec(a, v, w);
    const double next = std::sqrt(detail::dot_compensated(w, w));
    if (next == 0.0) return 0.0;
    v = w / next;
    const bool done = std::abs(next - lambda) <= kPowerTolerance * next;
    lambda = next;
    if (done) break;
  }
  return lambda;
}

inline void check_affinity(const Eigen::MatrixXd& a) {
  double scale = 1.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double v = a.data()[i];
    if (!(v >= 0.0) || !std::isfinite(v))
      throw Error(Errc::InvalidArgument, "affinity must be finite and non-negative");
    scale = std::max(scale, v);
  }
  if (!detail::is_symmetric(a, 1e-12 * scale))
    throw Error(Errc::InvalidArgument, "affinity must be symmetric");
}

/// Path-integral scores of a symmetric, non-negative, zero-diagonal
/// affinity matrix. With r = r_factor / rho(A), scores are the row sums of
/// sum_{l>=1} (rA)^l, obtained by solving (I - rA) x = 1 with conjugate
/// gradients (the system is SPD because r * rho(A) < 1).
inline IfsResult ifs_scores(const Eigen::MatrixXd& a, double r_factor, bool validate = true) {
  if (a.rows() != a.cols()) throw Error(Errc::InvalidArgument, "affinity must be square");
  if (!(r_factor > 0.0 && r_factor < 1.0))
    throw Error(Errc::InvalidArgument, "r_factor must be in (0,1)");
  const Eigen::Index n = a.rows();
  if (validate) check_affinity(a);

  IfsResult res;
  res.scores.assign(static_cast<std::size_t>(n), 0.0);
  res.spectral_radius = spectral_radius(a);
  if (res.spectral_radius == 0.0) {
    res.zero_graph = true;
    res.ranking = rank_descending(res.scores);
    return res;
  }
  const double r = r_factor / res.spectral_radius;

  const Eigen::VectorXd b = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd resid = b, p = b, ap(n);
  double rs = detail::dot_compensated(resid, resid);
  const double stop = kSolverTolerance * kSolverTolerance * static_cast<double>(n);
  const int max_iter = 10 * static_cast<int>(n) + 100;
  int it = 0;
  for (; it < max_iter && rs > stop; ++it) {
    detail::symmetric_matvec(a, p, ap);
    ap = p - r * ap;
    const double pap = detail::dot_compensated(p, ap);
    if (!(pap > 0.0)) throw Error(Errc::SingularSystem, "I - rA is not positive definite");
    const double step = rs / pap;
    x += step * p;
    resid -= step * ap;
    const double rs_next = detail::dot_compensated(resid, resid);
    p = resid + (rs_next / rs) * p;
    rs = rs_next;
  }
  if (rs > stop) throw Error(Errc::SingularSystem, "path-sum solve did not converge");
  res.solver_iterations = it;
  for (Eigen::Index i = 0; i < n; ++i)
    res.scores[static_cast<std::size_t>(i)] = std::max(0.0, x[i] - 1.0);
  res.ranking = rank_descending(res.scores);
  return res;
}

/// First l entries of the ranking.
inline std::vector<std::size_t> select_top(const IfsResult& result, std::size_t l) {
  if (l < 1 || l > result.ranking.size())
    throw Error(Errc::BadCount, "cannot select " + std::to_string(l) + " of " +
                                    std::to_string(result.ranking.size()) + " features");
  return {result.ranking.begin(), result.ranking.begin() + static_cast<std::ptrdiff_t>(l)};
}

struct SelectorConfig {
  double alpha = 0.5;
  double r_factor = 0.9;
  double keep_fraction = 0.2;
  /// Cap on graph nodes; beyond it only the highest-spread features enter
  /// the graph. 0 = unlimited.
  std::size_t max_graph_features = 0;
};

/// Fitted column projection. Holds only column indices, so applying it can
/// never depend on labels.
class FeatureSelector {
 public:
  FeatureSelector() = default;
  FeatureSelector(std::size_t input_columns, std::vector<std::size_t> selected)
      : input_columns_(input_columns), selected_(std::move(selected)) {
    for (auto c : selected_)
      if (c >= input_columns_) throw Error(Errc::InvalidArgument, "selected column out of range");
  }

  std::size_t input_columns() const noexcept { return input_columns_; }
  const std::vector<std::size_t>& selected() const noexcept { return selected_; }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != input_columns_)
      throw Error(Errc::ColumnMismatch, "expected " + std::to_string(input_columns_) +
                                            " columns, got " + std::to_string(x.cols()));
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(selected_.size()));
    for (std::size_t c = 0; c < selected_.size(); ++c)
      out.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(selected_[c]));
    return out;
  }

  Eigen::VectorXd transform_row(const std::vector<double>& row) const {
    if (row.size() != input_columns_)
      throw Error(Errc::ColumnMismatch, "expected " + std::to_string(input_columns_) +
                                            " columns, got " + std::to_string(row.size()));
    Eigen::VectorXd out(static_cast<Eigen::Index>(selected_.size()));
    for (std::size_t c = 0; c < selected_.size(); ++c)
      out[static_cast<Eigen::Index>(c)] = row[selected_[c]];
    return out;
  }

 private:
  std::size_t input_columns_ = 0;
  std::vector<std::size_t> selected_;
};

inline std::size_t kept_feature_count(std::size_t cols, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw Error(Errc::InvalidArgument, "keep_fraction must be in (0,1]");
  const auto l = static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(cols)));
  return std::clamp<std::size_t>(l, 1, cols);
}

/// Full IFS over a data matrix: scores for every column (isolated columns
/// score 0).
inline IfsResult ifs_rank(const Eigen::MatrixXd& data, const SelectorConfig& cfg) {
  auto compact = detail::compact_affinity(data, cfg.alpha, cfg.max_graph_features);
  // Symmetric and non-negative by construction.
  IfsResult sub = ifs_scores(compact.a, cfg.r_factor, false);
  IfsResult res;
  res.spectral_radius = sub.spectral_radius;
  res.zero_graph = sub.zero_graph;
  res.solver_iterations = sub.solver_iterations;
  res.scores.assign(static_cast<std::size_t>(data.cols()), 0.0);
  for (std::size_t i = 0; i < compact.features.size(); ++i)
    res.scores[static_cast<std::size_t>(compact.features[i])] = sub.scores[i];
  res.ranking = rank_descending(res.scores);
  return res;
}

inline FeatureSelector fit_selector(const Eigen::MatrixXd& train, const SelectorConfig& cfg) {
  const auto l = kept_feature_count(static_cast<std::size_t>(train.cols()), cfg.keep_fraction);
  const IfsResult res = ifs_rank(train, cfg);
  return FeatureSelector(static_cast<std::size_t>(train.cols()), select_top(res, l));
}

inline FeatureSelector fit_selector(const FeatureMatrix& train, const SelectorConfig& cfg) {
  return fit_selector(train.values, cfg);
}

}  // namespace rfg
