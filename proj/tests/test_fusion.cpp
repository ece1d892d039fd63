#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rfg/fusion.hpp"
#include "support.hpp"

using namespace rfg;
using oracle::balanced_labels;
using oracle::noisy_regions;

namespace {

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::InvalidArgument;
}

}  // namespace

TEST(Fuse, WorkedExample) {
  const ScoreTable t{{{0.9, 0.1}}, {{0.2, 0.8}}};
  const auto s = fused_scores(t, std::vector<double>{0.25, 0.75});
  EXPECT_NEAR(s[0].p_male, 0.375, 1e-15);
  EXPECT_NEAR(s[0].p_female, 0.625, 1e-15);
  EXPECT_EQ(fuse(t, std::vector<double>{0.25, 0.75})[0], kFemale);
}

TEST(Fuse, OneHotEqualsSingleRegion) {
  Rng rng(31);
  const auto y = balanced_labels(rng, 200);
  const ScoreTable t = noisy_regions(rng, y, {0.7, 0.8, 0.6, 0.9});
  for (std::size_t k = 0; k < t.size(); ++k) {
    std::vector<double> w(t.size(), 0.0);
    w[k] = 1.0;
    const auto fused = fuse(t, w);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(fused[i], predicted_class(t[k][i]));
  }
}

TEST(Fuse, UnanimousRegionsWin) {
  const ScoreTable t{{{0.6, 0.4}, {0.3, 0.7}}, {{0.9, 0.1}, {0.45, 0.55}}, {{0.51, 0.49}, {0.0, 1.0}}};
  const auto p = fuse(t, std::vector<double>(3, 1.0 / 3.0));
  EXPECT_EQ(p[0], kMale);
  EXPECT_EQ(p[1], kFemale);
}

TEST(Fuse, ScalingWeightsKeepsDecisions) {
  Rng rng(32);
  const auto y = balanced_labels(rng, 100);
  const ScoreTable t = noisy_regions(rng, y, {0.7, 0.6, 0.8});
  const std::vector<double> w{0.8, 0.4, 0.6};
  for (double c : {0.5, 0.25, 1.0 / 1024}) {
    std::vector<double> scaled;
    for (double a : w) scaled.push_back(c * a);
    EXPECT_EQ(fuse(t, w), fuse(t, scaled));
  }
}

TEST(Fuse, Errors) {
  const ScoreTable t{{{0.9, 0.1}}, {{0.2, 0.8}}};
  EXPECT_EQ(error_of([&] { fuse(t, std::vector<double>{0.0, 0.0}); }), Errc::AllZeroWeights);
  EXPECT_EQ(error_of([&] { fuse(t, std::vector<double>{1.0}); }), Errc::LengthMismatch);
  const ScoreTable ragged{{{0.9, 0.1}}, {}};
  EXPECT_EQ(error_of([&] { fuse(ragged, std::vector<double>{1.0, 1.0}); }), Errc::LengthMismatch);
  EXPECT_EQ(error_of([&] { fuse(t, std::vector<double>{1.5, 0.0}); }), Errc::InvalidArgument);
}

TEST(Fitness, PerfectFlippedAndRecount) {
  Rng rng(33);
  const auto y = balanced_labels(rng, 60);
  ScoreTable t = noisy_regions(rng, y, {1.0, 0.5});
  EXPECT_EQ(fitness(std::vector<double>{1.0, 0.0}, t, y), 0.0);
  std::vector<int> flipped = y;
  for (auto& v : flipped) v = 1 - v;
  EXPECT_EQ(fitness(std::vector<double>{1.0, 0.0}, t, flipped), 1.0);
  for (int k = 0; k < 50; ++k) {
    const std::vector<double> w{rng.uniform(), rng.uniform()};
    EXPECT_DOUBLE_EQ(fitness(w, t, y), oracle::recount_error(w, t, y));
  }
}

TEST(Ga, PerfectRegionPlusNoiseReachesZero) {
  Rng rng(34);
  const auto y = balanced_labels(rng, 80);
  // The reliable region is always right with confidence >= 0.75, so every
  // weight pair with a_noise < a_perfect / 2 fuses without error.
  ScoreTable t = noisy_regions(rng, y, {1.0, 0.5});
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double conf = rng.uniform(0.75, 1.0);
    const double pm = y[i] == kMale ? conf : 1.0 - conf;
    t[0][i] = {pm, 1.0 - pm};
  }
  EXPECT_EQ(oracle::grid_search_error(t, y, 0.1), 0.0);
  GaConfig cfg;
  cfg.seed = 3;
  const GaResult r = ga_optimize(t, y, cfg);
  EXPECT_EQ(fitness(r.weights, t, y), 0.0);
  EXPECT_EQ(r.best_error, 0.0);
}

TEST(Ga, ElitismMonotoneAndNeverWorseThanStart) {
  Rng rng(35);
  for (int run = 0; run < 10; ++run) {
    const auto y = balanced_labels(rng, 60);
    const ScoreTable t = noisy_regions(rng, y, {0.6, 0.7, 0.65, 0.55, 0.75});
    GaConfig cfg;
    cfg.generations = 40;
    cfg.seed = rng.next();
    const GaResult r = ga_optimize(t, y, cfg);
    ASSERT_EQ(r.population_best.size(), 41u);
    for (std::size_t g = 1; g < r.population_best.size(); ++g) {
      EXPECT_LE(r.population_best[g], r.population_best[g - 1]);
      EXPECT_LE(r.best_history[g], r.best_history[g - 1]);
    }
    EXPECT_LE(r.best_error, r.initial_best_error);
    EXPECT_DOUBLE_EQ(fitness(r.weights, t, y), r.best_error);
    for (double w : r.weights) {
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, 1.0);
    }
  }
}

TEST(Ga, IdenticalPopulationWithoutMutationIsStatic) {
  Rng rng(36);
  const auto y = balanced_labels(rng, 40);
  const ScoreTable t = noisy_regions(rng, y, {0.6, 0.7, 0.8});
  GaConfig cfg;
  cfg.mutation_prob = 0.0;
  cfg.generations = 20;
  const std::vector<FusionWeights> same(static_cast<std::size_t>(cfg.population_size), FusionWeights{0.2, 0.5, 0.9});
  const GaResult r = ga_optimize(t, y, cfg, &same);
  for (double e : r.population_best) EXPECT_EQ(e, r.population_best.front());
  EXPECT_EQ(r.weights, same.front());
}

TEST(Ga, CloseToGridSearchOptimum) {
  Rng rng(37);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t regions = 2 + static_cast<std::size_t>(trial % 2);
    const auto y = balanced_labels(rng, 100);
    std::vector<double> rel;
    for (std::size_t r = 0; r < regions; ++r) rel.push_back(rng.uniform(0.55, 0.85));
    const ScoreTable t = noisy_regions(rng, y, rel);
    GaConfig cfg;
    cfg.seed = rng.next();
    const GaResult r = ga_optimize(t, y, cfg);
    EXPECT_LE(r.best_error, oracle::grid_search_error(t, y, 0.05) + 0.02);
  }
}

TEST(Ga, SeedDeterminism) {
  Rng rng(38);
  const auto y = balanced_labels(rng, 50);
  const ScoreTable t = noisy_regions(rng, y, {0.6, 0.7, 0.8, 0.65});
  GaConfig cfg;
  cfg.seed = 77;
  const GaResult a = ga_optimize(t, y, cfg), b = ga_optimize(t, y, cfg);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.best_history, b.best_history);
}

TEST(Ga, Preconditions) {
  const ScoreTable one{{{0.9, 0.1}, {0.1, 0.9}}};
  EXPECT_EQ(error_of([&] { ga_optimize(one, std::vector<int>{1, 0}, GaConfig{}); }), Errc::InvalidArgument);
  const ScoreTable two{{{0.9, 0.1}, {0.1, 0.9}}, {{0.9, 0.1}, {0.1, 0.9}}};
  EXPECT_EQ(error_of([&] { ga_optimize(two, std::vector<int>{1, 1}, GaConfig{}); }), Errc::DegenerateFitnessSet);
  const ScoreTable empty{{}, {}};
  EXPECT_EQ(error_of([&] { ga_optimize(empty, std::vector<int>{}, GaConfig{}); }), Errc::DegenerateFitnessSet);
  GaConfig bad;
  bad.elitism_count = 50;
  EXPECT_EQ(error_of([&] { validate(bad); }), Errc::InvalidArgument);
  bad = GaConfig{};
  bad.crossover_prob = 1.2;
  EXPECT_EQ(error_of([&] { validate(bad); }), Errc::InvalidArgument);
}

TEST(Concat, WidthAndRowChecks) {
  const std::vector<Eigen::MatrixXd> blocks{Eigen::MatrixXd::Ones(4, 3), Eigen::MatrixXd::Zero(4, 5)};
  const auto c = concatenate_columns(blocks);
  EXPECT_EQ(c.cols(), 8);
  EXPECT_EQ(c(2, 2), 1.0);
  EXPECT_EQ(c(2, 3), 0.0);
  const std::vector<Eigen::MatrixXd> bad{Eigen::MatrixXd::Ones(4, 3), Eigen::MatrixXd::Zero(3, 5)};
  EXPECT_EQ(error_of([&] { concatenate_columns(bad); }), Errc::RowMismatch);
}

TEST(Concat, SingleRegionEqualsStandalone) {
  Rng rng(39);
  Eigen::MatrixXd x(40, 20);
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    y.push_back(i % 2);
    for (int c = 0; c < 20; ++c) x(i, c) = rng.normal() + (c < 4 && i % 2 ? 1.5 : 0.0);
  }
  const FoldSplit folds = make_folds(y, 4, 5);
  const RegionTrainConfig cfg;
  const std::vector<Eigen::MatrixXd> one{x};
  const auto a = concat_baseline(one, y, folds, cfg, 9);
  const auto b = evaluate_standalone(x, y, folds, cfg, 9);
  EXPECT_EQ(a.confusion, b.confusion);
  EXPECT_EQ(a.width, 20u);
  EXPECT_GE(a.mean_overall, 0.0);
  EXPECT_LE(a.mean_overall, 100.0);
}
