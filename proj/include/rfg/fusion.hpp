#pragma once

// Weighted fusion of region scores, genetic-algorithm weight learning and
// the feature-concatenation baseline.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rfg/classify.hpp"
#include "rfg/corpus.hpp"
#include "rfg/error.hpp"
#include "rfg/random.hpp"
#include "rfg/selection.hpp"

namespace rfg {

/// Region-major: table[r][i] is region r's score for sample i.
using ScoreTable = std::vector<std::vector<ScorePair>>;

/// One weight per region, each in [0, 1], not all zero.
using FusionWeights = std::vector<double>;

namespace detail {
inline std::size_t check_table(const ScoreTable& table, std::size_t weights) {
  if (table.empty()) throw Error(Errc::LengthMismatch, "no regions to fuse");
  if (weights != table.size())
    throw Error(Errc::LengthMismatch, std::to_string(weights) + " weights for " +
                                          std::to_string(table.size()) + " regions");
  const std::size_t n = table.front().size();
  for (const auto& col : table)
    if (col.size() != n) throw Error(Errc::LengthMismatch, "regions cover different sample counts");
  return n;
}

inline void check_weights(std::span<const double> w) {
  bool any = false;
  for (double a : w) {
    if (!(a >= 0.0 && a <= 1.0)) throw Error(Errc::InvalidArgument, "fusion weight outside [0,1]");
    any = any || a > 0.0;
  }
  if (!any) throw Error(Errc::AllZeroWeights, "all fusion weights are zero");
}
}  // namespace detail

/// Fused (male, female) scores: sum_i a_i * p_i per class.
inline std::vector<ScorePair> fused_scores(const ScoreTable& table, std::span<const double> weights) {
  const std::size_t n = detail::check_table(table, weights.size());
  detail::check_weights(weights);
  std::vector<ScorePair> out(n, ScorePair{0.0, 0.0});
  for (std::size_t r = 0; r < table.size(); ++r)
    for (std::size_t i = 0; i < n; ++i) {
      out[i].p_male += weights[r] * table[r][i].p_male;
      out[i].p_female += weights[r] * table[r][i].p_female;
    }
  return out;
}

/// Predicted class per sample; ties go to male.
inline std::vector<int> fuse(const ScoreTable& table, std::span<const double> weights) {
  const auto fused = fused_scores(table, weights);
  std::vector<int> out;
  out.reserve(fused.size());
  for (const auto& s : fused) out.push_back(predicted_class(s));
  return out;
}

/// Fraction of samples whose fused prediction differs from the label.
inline double fitness(std::span<const double> weights, const ScoreTable& table,
                      std::span<const int> labels) {
  const auto pred = fuse(table, weights);
  if (pred.size() != labels.size()) throw Error(Errc::LengthMismatch, "labels/scores length mismatch");
  if (pred.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != labels[i];
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

struct GaConfig {
  int population_size = 50;
  int generations = 100;
  double crossover_prob = 0.80;
  double mutation_prob = 0.01;
  int elitism_count = 2;
  std::uint64_t seed = 0;
};

struct GaResult {
  FusionWeights weights;
  double best_error = 1.0;
  double initial_best_error = 1.0;
  /// Best-ever error after initialisation and after each generation.
  std::vector<double> best_history;
  /// Lowest error present in each population (initial one first).
  std::vector<double> population_best;
};

inline void validate(const GaConfig& cfg) {
  if (cfg.population_size < 2) throw Error(Errc::InvalidArgument, "GA population must be >= 2");
  if (cfg.generations < 0) throw Error(Errc::InvalidArgument, "GA generations must be >= 0");
  if (!(cfg.crossover_prob >= 0.0 && cfg.crossover_prob <= 1.0))
    throw Error(Errc::InvalidArgument, "crossover probability outside [0,1]");
  if (!(cfg.mutation_prob >= 0.0 && cfg.mutation_prob <= 1.0))
    throw Error(Errc::InvalidArgument, "mutation probability outside [0,1]");
  if (cfg.elitism_count < 0 || cfg.elitism_count >= cfg.population_size)
    throw Error(Errc::InvalidArgument, "elitism count must be in [0, population)");
}

inline constexpr double kRouletteFloor = 1e-6;

/// Real-coded GA minimising fused classification error: elitism, roulette
/// selection on (1 - error), single-point crossover, per-gene uniform reset
/// mutation. All random draws happen in the sequential breeding stage.
/// `initial` replaces the random initial population when given.
inline GaResult ga_optimize(const ScoreTable& table, std::span<const int> labels, const GaConfig& cfg,
                            const std::vector<FusionWeights>* initial = nullptr) {
  validate(cfg);
  const std::size_t regions = table.size();
  if (regions < 2) throw Error(Errc::InvalidArgument, "GA fusion needs at least two regions");
  const std::size_t n = detail::check_table(table, regions);
  if (n == 0 || n != labels.size())
    throw Error(Errc::DegenerateFitnessSet, "fitness set is empty or misaligned");
  {
    bool pos = false, neg = false;
    for (int y : labels) (y == kMale ? pos : neg) = true;
    if (!pos || !neg) throw Error(Errc::DegenerateFitnessSet, "fitness set has a single class");
  }

  Rng rng(cfg.seed);
  const auto pop_size = static_cast<std::size_t>(cfg.population_size);
  std::vector<FusionWeights> pop;
  if (initial) {
    if (initial->size() != pop_size) throw Error(Errc::InvalidArgument, "initial population size");
    pop = *initial;
    for (const auto& c : pop)
      if (c.size() != regions) throw Error(Errc::LengthMismatch, "initial chromosome length");
  } else {
    pop.assign(pop_size, FusionWeights(regions));
    for (auto& c : pop)
      for (auto& g : c) g = rng.uniform();
  }

  auto error_of = [&](const FusionWeights& c) {
    if (std::all_of(c.begin(), c.end(), [](double g) { return g == 0.0; })) return 1.0;
    return fitness(c, table, labels);
  };
  std::vector<double> err(pop_size);
  auto evaluate = [&] {
    for (std::size_t i = 0; i < pop_size; ++i) err[i] = error_of(pop[i]);
  };

  GaResult res;
  evaluate();
  {
    const auto best = static_cast<std::size_t>(std::min_element(err.begin(), err.end()) - err.begin());
    res.weights = pop[best];
    res.best_error = err[best];
    res.initial_best_error = err[best];
    res.best_history.push_back(res.best_error);
    res.population_best.push_back(err[best]);
  }

  std::vector<std::size_t> order(pop_size);
  std::vector<double> wheel(pop_size);
  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return err[a] < err[b]; });

    const bool flat = std::all_of(err.begin(), err.end(), [&](double e) { return e == err.front(); });
    double total = 0.0;
    for (std::size_t i = 0; i < pop_size; ++i) {
      total += flat ? 1.0 : std::max(1.0 - err[i], kRouletteFloor);
      wheel[i] = total;
    }
    auto spin = [&] {
      const double u = rng.uniform() * total;
      const auto it = std::upper_bound(wheel.begin(), wheel.end(), u);
      return std::min<std::size_t>(static_cast<std::size_t>(it - wheel.begin()), pop_size - 1);
    };

    std::vector<FusionWeights> next;
    next.reserve(pop_size);
    for (int e = 0; e < cfg.elitism_count; ++e) next.push_back(pop[order[static_cast<std::size_t>(e)]]);
    while (next.size() < pop_size) {
      FusionWeights a = pop[spin()];
      FusionWeights b = pop[spin()];
      if (rng.uniform() < cfg.crossover_prob) {
        const auto cut = 1 + static_cast<std::size_t>(rng.below(regions - 1));
        std::swap_ranges(a.begin() + static_cast<std::ptrdiff_t>(cut), a.end(),
                         b.begin() + static_cast<std::ptrdiff_t>(cut));
      }
      for (auto* child : {&a, &b})
        for (auto& g : *child) {
          if (rng.uniform() < cfg.mutation_prob) g = rng.uniform();
          g = std::clamp(g, 0.0, 1.0);
        }
      next.push_back(std::move(a));
      if (next.size() < pop_size) next.push_back(std::move(b));
    }
    pop = std::move(next);
    evaluate();
    const auto best = static_cast<std::size_t>(std::min_element(err.begin(), err.end()) - err.begin());
    if (err[best] < res.best_error) {
      res.best_error = err[best];
      res.weights = pop[best];
    }
    res.best_history.push_back(res.best_error);
    res.population_best.push_back(err[best]);
  }
  return res;
}

// ---- feature-concatenation baseline ----------------------------------------

struct BaselineResult {
  std::vector<Accuracy> per_fold;
  Confusion confusion;  // pooled over folds
  double mean_overall = 0.0;
  std::size_t width = 0;
};

/// Column-wise concatenation of row-aligned region matrices.
inline Eigen::MatrixXd concatenate_columns(std::span<const Eigen::MatrixXd> blocks) {
  if (blocks.empty()) throw Error(Errc::InvalidArgument, "nothing to concatenate");
  const Eigen::Index rows = blocks.front().rows();
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) throw Error(Errc::RowMismatch, "region matrices have different row counts");
    cols += b.cols();
  }
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return out;
}

/// k-fold accuracy of one selection + SVM pipeline over a single matrix.
/// Fold f holds out `folds.test_indices(f)`; the calibration holdout of
/// each training fold is drawn with derive_seed(seed, "calibration", {f}).
inline BaselineResult evaluate_standalone(const Eigen::MatrixXd& x, std::span<const int> labels,
                                          const FoldSplit& folds, const RegionTrainConfig& cfg,
                                          std::uint64_t seed) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw Error(Errc::RowMismatch, "feature rows do not match labels");
  BaselineResult res;
  res.width = static_cast<std::size_t>(x.cols());
  double sum = 0.0;
  for (int f = 0; f < folds.k; ++f) {
    const auto train = folds.train_indices(f);
    const auto test = folds.test_indices(f);
    const auto split = stratified_holdout(train, labels, cfg.calibration_fraction,
                                          derive_seed(seed, "calibration", {static_cast<std::uint64_t>(f)}));
    const LinearModel model = train_region_model(x, labels, split.fit, split.holdout, cfg);
    const auto scores = score_raw(model, x, test);
    const Confusion c = confusion_of(scores, take(labels, test));
    res.confusion += c;
    res.per_fold.push_back(accuracy_from(c));
    sum += res.per_fold.back().overall;
  }
  res.mean_overall = sum / folds.k;
  return res;
}

/// Equal-weight baseline: all region descriptors side by side, then one
/// selection + SVM pipeline.
inline BaselineResult concat_baseline(std::span<const Eigen::MatrixXd> region_features,
                                      std::span<const int> labels, const FoldSplit& folds,
                                      const RegionTrainConfig& cfg, std::uint64_t seed) {
  return evaluate_standalone(concatenate_columns(region_features), labels, folds, cfg, seed);
}

}  // namespace rfg
