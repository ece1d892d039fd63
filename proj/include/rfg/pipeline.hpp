#pragma once

// End-to-end orchestration: descriptors for every sample and region,
// per-fold training (selection, SVM, calibration, GA weights), fused
// evaluation, model bundles, prediction and timing.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <locale>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfg/classify.hpp"
#include "rfg/corpus.hpp"
#include "rfg/error.hpp"
#include "rfg/fusion.hpp"
#include "rfg/image.hpp"
#include "rfg/parallel.hpp"
#include "rfg/random.hpp"
#include "rfg/regions.hpp"
#include "rfg/selection.hpp"
#include "rfg/texture.hpp"

namespace rfg {

enum class RunMode { Fusion, Concat, PerRegion };

inline const char* mode_name(RunMode m) {
  switch (m) {
    case RunMode::Fusion: return "fusion";
    case RunMode::Concat: return "concat";
    case RunMode::PerRegion: return "per-region";
  }
  return "?";
}

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir = "rfg_out";
  int grid = 4;
  HistogramMode histogram = HistogramMode::Uniform;
  double keep_fraction = 0.2;
  double alpha = 0.5;
  double r_factor = 0.9;
  double svm_c = 1.0;
  double calibration_fraction = 0.2;
  GaConfig ga;
  int folds = 5;
  std::uint64_t seed = 42;
  RunMode mode = RunMode::Fusion;
  bool global_weights = false;
  bool leak_check = false;
  bool final_bundle = false;  // extra model trained on every sample
  std::size_t concat_max_graph_features = 8192;
  unsigned threads = default_thread_count();

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(Errc::InvalidArgument, what); };
    if (grid < 2 || grid > 4) bad("grid must be 2, 3 or 4");
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) bad("keep-fraction must be in (0,1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) bad("alpha must be in [0,1]");
    if (!(r_factor > 0.0 && r_factor < 1.0)) bad("r-factor must be in (0,1)");
    if (!(svm_c > 0.0)) bad("svm-c must be positive");
    if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0))
      bad("calibration fraction must be in (0,1)");
    if (folds < 2) bad("folds must be >= 2");
    if (threads < 1) bad("threads must be >= 1");
    validate_ga();
  }

  void validate_ga() const { rfg::validate(ga); }

  RegionTrainConfig region_config() const {
    RegionTrainConfig c;
    c.selector = SelectorConfig{alpha, r_factor, keep_fraction, 0};
    c.svm.c = svm_c;
    c.calibration_fraction = calibration_fraction;
    return c;
  }
};

// ---- descriptors -----------------------------------------------------------

using RegionDescriptors = std::array<std::optional<std::vector<double>>, kRegionCount>;

/// Descriptors for the ten regions of one face. A region whose box is empty
/// after clipping or too small for the grid yields nullopt.
inline RegionDescriptors region_descriptors(const GrayImage& img, const LandmarkSet& lm,
                                            GridSpec grid, HistogramMode mode) {
  RegionDescriptors out;
  const auto boxes = unclipped_region_boxes(lm);
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    const RegionBox box = clip_box(boxes[r], img.width(), img.height());
    if (box.width() < 3 * grid.n() || box.height() < 3 * grid.n()) continue;
    out[r] = colbp_descriptor(crop(img, box), grid, mode);
  }
  return out;
}

struct DatasetFeatures {
  std::vector<SampleRecord> records;
  std::vector<int> labels;
  std::array<Eigen::MatrixXd, kRegionCount> region;       // rows = samples
  std::array<std::vector<char>, kRegionCount> valid;      // per sample
  std::size_t region_failures = 0;
  double extraction_ms = 0.0;
};

inline DatasetFeatures extract_features(const std::vector<SampleRecord>& records,
                                        const std::filesystem::path& manifest, GridSpec grid,
                                        HistogramMode mode, unsigned threads) {
  DatasetFeatures ds;
  ds.records = records;
  for (const auto& r : records) ds.labels.push_back(r.label);
  const std::size_t n = records.size();
  std::vector<RegionDescriptors> per_sample(n);
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& rec = records[i];
    try {
      const GrayImage img = load_gray_image(resolve_path(manifest, rec.image_path));
      const LandmarkSet lm = load_landmarks(resolve_path(manifest, rec.landmark_path));
      per_sample[i] = region_descriptors(img, lm, grid, mode);
    } catch (const Error& e) {
      throw Error(e.code(), "sample " + rec.sample_id + ": " + e.what(), e.detail());
    }
  });
  ds.extraction_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  const auto width = static_cast<Eigen::Index>(descriptor_length(grid, mode));
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    ds.region[r] = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), width);
    ds.valid[r].assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!per_sample[i][r]) {
        ++ds.region_failures;
        continue;
      }
      ds.valid[r][i] = 1;
      ds.region[r].row(static_cast<Eigen::Index>(i)) =
          Eigen::Map<const Eigen::RowVectorXd>(per_sample[i][r]->data(), width);
    }
  }
  return ds;
}

// ---- per-fold training -----------------------------------------------------

struct FoldModels {
  std::array<LinearModel, kRegionCount> models;
  std::vector<std::size_t> holdout;  // calibration rows, shared by all regions
  ScoreTable holdout_scores;
  std::optional<GaResult> ga;
};

inline std::vector<std::size_t> valid_rows(std::span<const std::size_t> rows,
                                           const std::vector<char>& valid) {
  std::vector<std::size_t> out;
  for (auto r : rows)
    if (valid[r]) out.push_back(r);
  return out;
}

/// Scores for `rows`; a region without a descriptor scores (0.5, 0.5).
inline ScoreTable score_rows(const DatasetFeatures& ds,
                             const std::array<LinearModel, kRegionCount>& models,
                             std::span<const std::size_t> rows) {
  ScoreTable table(kRegionCount);
  std::vector<double> buf;
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    table[r].reserve(rows.size());
    buf.resize(static_cast<std::size_t>(ds.region[r].cols()));
    for (auto i : rows) {
      if (!ds.valid[r][i]) {
        table[r].push_back(kNeutralScore);
        continue;
      }
      Eigen::Map<Eigen::RowVectorXd>(buf.data(), ds.region[r].cols()) =
          ds.region[r].row(static_cast<Eigen::Index>(i));
      table[r].push_back(score_descriptor(models[r], buf));
    }
  }
  return table;
}

/// Trains one fold from `train` rows only; no other label is read.
/// `fold_tag` names the fold in derived seeds.
inline FoldModels train_fold(const DatasetFeatures& ds, std::span<const int> labels,
                             std::span<const std::size_t> train, std::uint64_t fold_tag,
                             const RunConfig& cfg, bool learn_weights) {
  FoldModels fm;
  const auto split = stratified_holdout(train, labels, cfg.calibration_fraction,
                                        derive_seed(cfg.seed, "calibration", {fold_tag}));
  fm.holdout = split.holdout;
  const RegionTrainConfig base = cfg.region_config();
  parallel_for(kRegionCount, cfg.threads, [&](std::size_t r) {
    RegionTrainConfig rc = base;
    rc.svm.seed = derive_seed(cfg.seed, "svm", {fold_tag, r});
    try {
      LinearModel m = train_region_model(ds.region[r], labels, valid_rows(split.fit, ds.valid[r]),
                                         valid_rows(split.holdout, ds.valid[r]), rc);
      m.region = kAllRegions[r];
      m.grid = cfg.grid;
      m.histogram = cfg.histogram;
      fm.models[r] = std::move(m);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("region ") + region_name(kAllRegions[r]) + ": " + e.what(),
                  e.detail());
    }
  });
  fm.holdout_scores = score_rows(ds, fm.models, fm.holdout);
  if (learn_weights) {
    GaConfig ga = cfg.ga;
    ga.seed = derive_seed(cfg.seed, "ga", {fold_tag});
    fm.ga = ga_optimize(fm.holdout_scores, take(labels, fm.holdout), ga);
  }
  return fm;
}

inline std::vector<unsigned char> fold_fingerprint(const FoldModels& fm) {
  std::vector<unsigned char> bytes;
  for (const auto& m : fm.models) {
    const auto b = model_to_bytes(m);
    bytes.insert(bytes.end(), b.begin(), b.end());
  }
  if (fm.ga)
    for (double w : fm.ga->weights) {
      const auto bits = std::bit_cast<std::uint64_t>(w);
      for (int k = 0; k < 8; ++k) bytes.push_back(static_cast<unsigned char>(bits >> (8 * k)));
    }
  return bytes;
}

// ---- bundles -----------------------------------------------------------------

struct Bundle {
  int grid = 4;
  HistogramMode histogram = HistogramMode::Uniform;
  std::array<LinearModel, kRegionCount> models;
  FusionWeights weights;
};

inline std::string format_fixed(double v, int digits) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string model_file_name(std::size_t region) {
  std::ostringstream os;
  os << "region_" << std::setw(2) << std::setfill('0') << region << ".rfgm";
  return os.str();
}

/// Writes one model file per region plus bundle.tsv listing them and the
/// fusion weights as `region_id TAB weight` lines.
inline void save_bundle(const Bundle& b, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string());
  std::ofstream out(dir / "bundle.tsv");
  if (!out) throw Error(Errc::IoError, "cannot write bundle in " + dir.string());
  out << "# rfg ensemble bundle\n";
  out << "version\t1\n";
  out << "grid\t" << b.grid << '\n';
  out << "histogram\t" << (b.histogram == HistogramMode::Uniform ? "uniform" : "full") << '\n';
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    save_model(b.models[r], dir / model_file_name(r));
    out << "model\t" << r << '\t' << model_file_name(r) << '\n';
  }
  for (std::size_t r = 0; r < b.weights.size(); ++r)
    out << r << '\t' << format_fixed(b.weights[r], 6) << '\n';
  if (!out) throw Error(Errc::IoError, "short write to bundle in " + dir.string());
}

inline Bundle load_bundle(const std::filesystem::path& dir) {
  const auto path = dir / "bundle.tsv";
  std::ifstream in(path);
  if (!in) throw Error(Errc::BundleIncomplete, "missing " + path.string());
  Bundle b;
  std::array<bool, kRegionCount> have_model{};
  std::map<std::size_t, double> weights;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = detail::split_tabs(line);
    auto bad = [&] { return Error(Errc::ParseError, path.string() + ": line " + std::to_string(lineno), lineno); };
    try {
      if (f[0] == "version") {
        if (f.size() != 2 || f[1] != "1") throw Error(Errc::VersionMismatch, "bundle version " + f.at(1));
      } else if (f[0] == "grid" && f.size() == 2) {
        b.grid = std::stoi(f[1]);
      } else if (f[0] == "histogram" && f.size() == 2) {
        b.histogram = f[1] == "full" ? HistogramMode::Full : HistogramMode::Uniform;
      } else if (f[0] == "model" && f.size() == 3) {
        const auto r = std::stoul(f[1]);
        if (r >= kRegionCount) throw bad();
        b.models[r] = load_model(dir / f[2]);
        have_model[r] = true;
      } else if (f.size() == 2 && !f[0].empty() && std::isdigit(static_cast<unsigned char>(f[0][0]))) {
        const auto r = std::stoul(f[0]);
        if (r >= kRegionCount) throw bad();
        weights[r] = std::stod(f[1]);
      } else {
        throw bad();
      }
    } catch (const std::invalid_argument&) {
      throw bad();
    } catch (const std::out_of_range&) {
      throw bad();
    }
  }
  for (std::size_t r = 0; r < kRegionCount; ++r)
    if (!have_model[r]) throw Error(Errc::BundleIncomplete, std::string("no model for region ") + region_name(kAllRegions[r]));
  if (weights.size() != kRegionCount) throw Error(Errc::BundleIncomplete, "bundle lacks fusion weights");
  for (auto& [r, w] : weights) b.weights.push_back(w);
  GridSpec check(b.grid);
  (void)check;
  return b;
}

// ---- prediction --------------------------------------------------------------

struct Prediction {
  int label = kMale;
  double p_male = 0.5;
  double p_female = 0.5;
  std::size_t neutral_regions = 0;
};

inline Prediction predict(const Bundle& b, const GrayImage& img, const LandmarkSet& lm) {
  const auto desc = region_descriptors(img, lm, GridSpec(b.grid), b.histogram);
  ScoreTable table(kRegionCount);
  Prediction p;
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    if (desc[r]) {
      table[r].push_back(score_descriptor(b.models[r], *desc[r]));
    } else {
      table[r].push_back(kNeutralScore);
      ++p.neutral_regions;
    }
  }
  const ScorePair fused = fused_scores(table, b.weights).front();
  const double total = fused.p_male + fused.p_female;
  p.p_male = fused.p_male / total;
  p.p_female = fused.p_female / total;
  p.label = predicted_class(fused);
  return p;
}

inline std::string format_prediction(const Prediction& p) {
  return std::string("class=") + (p.label == kMale ? "male" : "female") +
         " p_male=" + format_fixed(p.p_male, 6) + " p_female=" + format_fixed(p.p_female, 6);
}

// ---- evaluation --------------------------------------------------------------

struct FoldReport {
  int fold = 0;
  std::size_t test_size = 0;
  std::array<Confusion, kRegionCount> region;
  Confusion fused;
  FusionWeights weights;
  double holdout_error = 0.0;  // GA fitness on the calibration holdout
  bool leak_check_identical = true;
};

struct Timing {
  double extraction_per_image_ms = 0.0;
  double training_per_fold_ms = 0.0;
  double testing_per_image_ms = 0.0;
};

struct EvaluationReport {
  RunConfig config;
  std::size_t samples = 0;
  std::size_t region_failures = 0;
  std::vector<FoldReport> folds;
  std::optional<BaselineResult> concat;
  bool leak_checked = false;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  Timing timing;

  static Accuracy mean_of(const std::vector<Accuracy>& v) {
    Accuracy m;
    for (const auto& a : v) {
      m.male += a.male;
      m.female += a.female;
      m.overall += a.overall;
    }
    const double n = v.empty() ? 1.0 : static_cast<double>(v.size());
    return {m.male / n, m.female / n, m.overall / n};
  }
  Accuracy region_mean(std::size_t r) const {
    std::vector<Accuracy> v;
    for (const auto& f : folds) v.push_back(accuracy_from(f.region[r]));
    return mean_of(v);
  }
  Accuracy fused_mean() const {
    std::vector<Accuracy> v;
    for (const auto& f : folds) v.push_back(accuracy_from(f.fused));
    return mean_of(v);
  }
  Confusion fused_pooled() const {
    Confusion c;
    for (const auto& f : folds) c += f.fused;
    return c;
  }
  bool has_fusion() const { return config.mode == RunMode::Fusion; }
  bool leak_free() const {
    for (const auto& f : folds)
      if (!f.leak_check_identical) return false;
    return true;
  }
  double best_region_mean() const {
    double best = 0.0;
    for (std::size_t r = 0; r < kRegionCount; ++r) best = std::max(best, region_mean(r).overall);
    return best;
  }
};

/// Runs k-fold evaluation on precomputed features.
inline EvaluationReport evaluate(const DatasetFeatures& ds, const RunConfig& cfg) {
  cfg.validate();
  EvaluationReport rep;
  rep.config = cfg;
  rep.samples = ds.records.size();
  rep.region_failures = ds.region_failures;
  rep.leak_checked = cfg.leak_check;
  const auto n = ds.records.size();
  rep.timing.extraction_per_image_ms = n ? ds.extraction_ms / static_cast<double>(n) : 0.0;

  const std::uint64_t fold_seed = derive_seed(cfg.seed, "folds");
  rep.seeds.emplace_back("folds", fold_seed);
  const FoldSplit folds = make_folds(ds.labels, cfg.folds, fold_seed);

  if (cfg.mode == RunMode::Concat) {
    RegionTrainConfig rc = cfg.region_config();
    rc.selector.max_graph_features = cfg.concat_max_graph_features;
    rc.svm.seed = derive_seed(cfg.seed, "svm-concat");
    rep.seeds.emplace_back("svm-concat", rc.svm.seed);
    for (int f = 0; f < cfg.folds; ++f)
      rep.seeds.emplace_back("calibration/fold" + std::to_string(f),
                             derive_seed(cfg.seed, "calibration", {static_cast<std::uint64_t>(f)}));
    const auto t0 = std::chrono::steady_clock::now();
    rep.concat = concat_baseline(ds.region, ds.labels, folds, rc, cfg.seed);
    rep.timing.training_per_fold_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / cfg.folds;
    return rep;
  }

  const bool per_fold_weights = cfg.mode == RunMode::Fusion && !cfg.global_weights;
  std::vector<FoldModels> trained;
  std::vector<ScoreTable> test_scores;
  std::vector<std::vector<std::size_t>> test_rows;
  double train_ms = 0.0, test_ms = 0.0;
  for (int f = 0; f < cfg.folds; ++f) {
    const auto tag = static_cast<std::uint64_t>(f);
    rep.seeds.emplace_back("calibration/fold" + std::to_string(f), derive_seed(cfg.seed, "calibration", {tag}));
    for (std::size_t r = 0; r < kRegionCount; ++r)
      rep.seeds.emplace_back("svm/fold" + std::to_string(f) + "/" + region_name(kAllRegions[r]),
                             derive_seed(cfg.seed, "svm", {tag, r}));
    if (per_fold_weights)
      rep.seeds.emplace_back("ga/fold" + std::to_string(f), derive_seed(cfg.seed, "ga", {tag}));

    const auto train = folds.train_indices(f);
    const auto test = folds.test_indices(f);
    const auto t0 = std::chrono::steady_clock::now();
    FoldModels fm = train_fold(ds, ds.labels, train, tag, cfg, per_fold_weights);
    const auto t1 = std::chrono::steady_clock::now();
    ScoreTable ts = score_rows(ds, fm.models, test);
    if (per_fold_weights) (void)fused_scores(ts, fm.ga->weights);
    const auto t2 = std::chrono::steady_clock::now();
    train_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    test_ms += std::chrono::duration<double, std::milli>(t2 - t1).count();

    FoldReport fr;
    fr.fold = f;
    fr.test_size = test.size();
    if (cfg.leak_check) {
      // Flip every test label: nothing fitted on the training rows may change.
      std::vector<int> scrambled = ds.labels;
      for (auto i : test) scrambled[i] = 1 - scrambled[i];
      const FoldModels again = train_fold(ds, scrambled, train, tag, cfg, per_fold_weights);
      fr.leak_check_identical = fold_fingerprint(again) == fold_fingerprint(fm);
    }
    rep.folds.push_back(std::move(fr));
    trained.push_back(std::move(fm));
    test_scores.push_back(std::move(ts));
    test_rows.push_back(test);
  }
  rep.timing.training_per_fold_ms = train_ms / cfg.folds;
  rep.timing.testing_per_image_ms = n ? test_ms / static_cast<double>(n) : 0.0;

  std::optional<GaResult> global;
  if (cfg.mode == RunMode::Fusion && cfg.global_weights) {
    ScoreTable pooled(kRegionCount);
    std::vector<int> pooled_labels;
    for (const auto& fm : trained) {
      for (std::size_t r = 0; r < kRegionCount; ++r)
        pooled[r].insert(pooled[r].end(), fm.holdout_scores[r].begin(), fm.holdout_scores[r].end());
      const auto y = take(ds.labels, fm.holdout);
      pooled_labels.insert(pooled_labels.end(), y.begin(), y.end());
    }
    GaConfig ga = cfg.ga;
    ga.seed = derive_seed(cfg.seed, "ga-global");
    rep.seeds.emplace_back("ga/global", ga.seed);
    global = ga_optimize(pooled, pooled_labels, ga);
  }

  for (int f = 0; f < cfg.folds; ++f) {
    auto& fr = rep.folds[static_cast<std::size_t>(f)];
    const auto y = take(ds.labels, test_rows[static_cast<std::size_t>(f)]);
    const auto& ts = test_scores[static_cast<std::size_t>(f)];
    for (std::size_t r = 0; r < kRegionCount; ++r) fr.region[r] = confusion_of(ts[r], y);
    if (cfg.mode == RunMode::Fusion) {
      const GaResult& ga = global ? *global : *trained[static_cast<std::size_t>(f)].ga;
      fr.weights = ga.weights;
      fr.holdout_error = ga.best_error;
      const auto pred = fuse(ts, fr.weights);
      for (std::size_t i = 0; i < pred.size(); ++i) fr.fused.add(y[i], pred[i]);
    }
    if (cfg.mode == RunMode::Fusion) {
      Bundle b{cfg.grid, cfg.histogram, trained[static_cast<std::size_t>(f)].models, fr.weights};
      save_bundle(b, cfg.out_dir / ("fold_" + std::to_string(f)));
    }
  }

  if (cfg.mode == RunMode::Fusion && cfg.final_bundle) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto tag = static_cast<std::uint64_t>(cfg.folds);
    rep.seeds.emplace_back("calibration/final", derive_seed(cfg.seed, "calibration", {tag}));
    rep.seeds.emplace_back("ga/final", derive_seed(cfg.seed, "ga", {tag}));
    const FoldModels fm = train_fold(ds, ds.labels, all, tag, cfg, true);
    save_bundle(Bundle{cfg.grid, cfg.histogram, fm.models, fm.ga->weights}, cfg.out_dir / "final");
  }
  return rep;
}

// ---- report files --------------------------------------------------------------

/// Checks that every emitted accuracy follows from its confusion matrix.
inline void check_report_consistency(const EvaluationReport& rep) {
  std::size_t total = 0;
  for (const auto& f : rep.folds) {
    total += f.test_size;
    for (const auto& c : f.region)
      if (static_cast<std::size_t>(c.total()) != f.test_size)
        throw Error(Errc::InvalidArgument, "region confusion does not cover the test fold");
    if (rep.has_fusion() && static_cast<std::size_t>(f.fused.total()) != f.test_size)
      throw Error(Errc::InvalidArgument, "fused confusion does not cover the test fold");
  }
  if (!rep.folds.empty() && total != rep.samples)
    throw Error(Errc::InvalidArgument, "folds do not cover the corpus");
  if (rep.has_fusion()) {
    const Confusion c = rep.fused_pooled();
    const Accuracy a = accuracy_from(c);
    const double recomputed = 100.0 * static_cast<double>(c.male_as_male + c.female_as_female) /
                              static_cast<double>(c.total());
    if (std::abs(a.overall - recomputed) > 1e-9)
      throw Error(Errc::InvalidArgument, "pooled accuracy inconsistent with confusion matrix");
  }
}

/// Machine-readable report: `metric TAB scope TAB value` per line. Contains
/// no wall-clock values, so identical runs produce identical bytes.
inline std::string report_tsv(const EvaluationReport& rep) {
  check_report_consistency(rep);
  std::ostringstream os;
  os.imbue(std::locale::classic());
  const auto& c = rep.config;
  auto line = [&](const std::string& metric, const std::string& scope, const std::string& value) {
    os << metric << '\t' << scope << '\t' << value << '\n';
  };
  auto num = [](double v) { return format_fixed(v, 4); };
  line("config", "mode", mode_name(c.mode));
  line("config", "grid", std::to_string(c.grid));
  line("config", "histogram", c.histogram == HistogramMode::Uniform ? "uniform" : "full");
  line("config", "keep_fraction", num(c.keep_fraction));
  line("config", "alpha", num(c.alpha));
  line("config", "r_factor", num(c.r_factor));
  line("config", "svm_c", num(c.svm_c));
  line("config", "calibration_fraction", num(c.calibration_fraction));
  line("config", "ga_population", std::to_string(c.ga.population_size));
  line("config", "ga_generations", std::to_string(c.ga.generations));
  line("config", "ga_crossover", num(c.ga.crossover_prob));
  line("config", "ga_mutation", num(c.ga.mutation_prob));
  line("config", "ga_elitism", std::to_string(c.ga.elitism_count));
  line("config", "global_weights", c.global_weights ? "1" : "0");
  line("config", "folds", std::to_string(c.folds));
  line("config", "seed", std::to_string(c.seed));
  line("data", "samples", std::to_string(rep.samples));
  line("data", "region_failures", std::to_string(rep.region_failures));

  if (rep.concat) {
    for (std::size_t f = 0; f < rep.concat->per_fold.size(); ++f) {
      const auto& a = rep.concat->per_fold[f];
      const std::string scope = "concat/fold" + std::to_string(f);
      line("accuracy_male", scope, num(a.male));
      line("accuracy_female", scope, num(a.female));
      line("accuracy_overall", scope, num(a.overall));
    }
    const Accuracy m = EvaluationReport::mean_of(rep.concat->per_fold);
    line("accuracy_male", "concat/mean", num(m.male));
    line("accuracy_female", "concat/mean", num(m.female));
    line("accuracy_overall", "concat/mean", num(m.overall));
    line("feature_width", "concat", std::to_string(rep.concat->width));
    const auto& cm = rep.concat->confusion;
    line("confusion", "concat/male_as_male", std::to_string(cm.male_as_male));
    line("confusion", "concat/male_as_female", std::to_string(cm.male_as_female));
    line("confusion", "concat/female_as_female", std::to_string(cm.female_as_female));
    line("confusion", "concat/female_as_male", std::to_string(cm.female_as_male));
    return os.str();
  }

  for (const auto& f : rep.folds) {
    const std::string fold = "fold" + std::to_string(f.fold);
    line("test_size", fold, std::to_string(f.test_size));
    for (std::size_t r = 0; r < kRegionCount; ++r) {
      const Accuracy a = accuracy_from(f.region[r]);
      const std::string scope = std::string(region_name(kAllRegions[r])) + "/" + fold;
      line("accuracy_male", scope, num(a.male));
      line("accuracy_female", scope, num(a.female));
      line("accuracy_overall", scope, num(a.overall));
    }
    if (rep.has_fusion()) {
      const Accuracy a = accuracy_from(f.fused);
      line("accuracy_male", "fused/" + fold, num(a.male));
      line("accuracy_female", "fused/" + fold, num(a.female));
      line("accuracy_overall", "fused/" + fold, num(a.overall));
      line("confusion", "fused/" + fold + "/male_as_male", std::to_string(f.fused.male_as_male));
      line("confusion", "fused/" + fold + "/male_as_female", std::to_string(f.fused.male_as_female));
      line("confusion", "fused/" + fold + "/female_as_female", std::to_string(f.fused.female_as_female));
      line("confusion", "fused/" + fold + "/female_as_male", std::to_string(f.fused.female_as_male));
      line("ga_holdout_error", fold, num(f.holdout_error));
      for (std::size_t r = 0; r < f.weights.size(); ++r)
        line("weight", fold + "/" + region_name(kAllRegions[r]), format_fixed(f.weights[r], 6));
    }
    if (rep.leak_checked) line("leak_check", fold, f.leak_check_identical ? "identical" : "DIFFERENT");
  }
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    const Accuracy a = rep.region_mean(r);
    const std::string scope = std::string(region_name(kAllRegions[r])) + "/mean";
    line("accuracy_male", scope, num(a.male));
    line("accuracy_female", scope, num(a.female));
    line("accuracy_overall", scope, num(a.overall));
  }
  if (rep.has_fusion()) {
    const Accuracy a = rep.fused_mean();
    line("accuracy_male", "fused/mean", num(a.male));
    line("accuracy_female", "fused/mean", num(a.female));
    line("accuracy_overall", "fused/mean", num(a.overall));
    const Confusion cm = rep.fused_pooled();
    line("confusion", "fused/pooled/male_as_male", std::to_string(cm.male_as_male));
    line("confusion", "fused/pooled/male_as_female", std::to_string(cm.male_as_female));
    line("confusion", "fused/pooled/female_as_female", std::to_string(cm.female_as_female));
    line("confusion", "fused/pooled/female_as_male", std::to_string(cm.female_as_male));
  }
  return os.str();
}

inline std::string report_text(const EvaluationReport& rep) {
  check_report_consistency(rep);
  std::ostringstream os;
  os.imbue(std::locale::classic());
  const auto& c = rep.config;
  os << "Region-ensemble evaluation\n";
  os << "  mode " << mode_name(c.mode) << ", grid " << c.grid << "x" << c.grid << ", "
     << c.folds << " folds, seed " << c.seed << ", keep_fraction " << format_fixed(c.keep_fraction, 2)
     << "\n";
  os << "  samples " << rep.samples << ", region failures (neutral scores) " << rep.region_failures << "\n\n";

  auto row = [&](const std::string& name, const Accuracy& a) {
    os << "  " << std::left << std::setw(14) << name << std::right << std::setw(9)
       << format_fixed(a.male, 2) << std::setw(9) << format_fixed(a.female, 2) << std::setw(9)
       << format_fixed(a.overall, 2) << '\n';
  };
  auto confusion = [&](const Confusion& cm) {
    os << "  confusion (rows truth, cols predicted)\n";
    os << "               male  female\n";
    os << "    male   " << std::setw(7) << cm.male_as_male << std::setw(8) << cm.male_as_female << '\n';
    os << "    female " << std::setw(7) << cm.female_as_male << std::setw(8) << cm.female_as_female << '\n';
  };

  if (rep.concat) {
    os << "Feature concatenation baseline (width " << rep.concat->width << ")\n";
    os << "  " << std::left << std::setw(14) << "fold" << std::right << std::setw(9) << "male"
       << std::setw(9) << "female" << std::setw(9) << "overall" << '\n';
    for (std::size_t f = 0; f < rep.concat->per_fold.size(); ++f)
      row("fold " + std::to_string(f), rep.concat->per_fold[f]);
    row("mean", EvaluationReport::mean_of(rep.concat->per_fold));
    confusion(rep.concat->confusion);
    return os.str();
  }

  os << "Mean accuracy over folds (%)\n";
  os << "  " << std::left << std::setw(14) << "region" << std::right << std::setw(9) << "male"
     << std::setw(9) << "female" << std::setw(9) << "overall" << '\n';
  for (std::size_t r = 0; r < kRegionCount; ++r) row(region_name(kAllRegions[r]), rep.region_mean(r));
  if (rep.has_fusion()) {
    row("fused", rep.fused_mean());
    os << '\n';
    os << "Fused accuracy per fold (%)\n";
    for (const auto& f : rep.folds) row("fold " + std::to_string(f.fold), accuracy_from(f.fused));
    os << '\n';
    confusion(rep.fused_pooled());
    os << "\nLearned weights\n";
    os << "  " << std::left << std::setw(14) << "region" << std::right;
    for (const auto& f : rep.folds) os << std::setw(10) << ("fold " + std::to_string(f.fold));
    os << '\n';
    for (std::size_t r = 0; r < kRegionCount; ++r) {
      os << "  " << std::left << std::setw(14) << region_name(kAllRegions[r]) << std::right;
      for (const auto& f : rep.folds) os << std::setw(10) << format_fixed(f.weights[r], 4);
      os << '\n';
    }
  }
  if (rep.leak_checked) {
    os << "\nLeak check: ";
    os << (rep.leak_free() ? "all folds identical under scrambled test labels\n"
                           : "FITTED COMPONENTS CHANGED when test labels were scrambled\n");
  }
  return os.str();
}

inline std::string seeds_tsv(const EvaluationReport& rep) {
  std::ostringstream os;
  os << "seed\troot\t" << rep.config.seed << '\n';
  for (const auto& [name, value] : rep.seeds) os << "seed\t" << name << '\t' << value << '\n';
  return os.str();
}

inline std::string timing_tsv(const Timing& t) {
  std::ostringstream os;
  os << "stage\tmilliseconds\n";
  os << "feature_extraction_per_image\t" << format_fixed(t.extraction_per_image_ms, 3) << '\n';
  os << "training_per_fold\t" << format_fixed(t.training_per_fold_ms, 3) << '\n';
  os << "testing_per_image\t" << format_fixed(t.testing_per_image_ms, 3) << '\n';
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

/// Loads the manifest, extracts features, evaluates and writes report.txt,
/// report.tsv, seeds.tsv and timing.tsv (plus model bundles) to out_dir.
inline EvaluationReport train_eval(const RunConfig& cfg) {
  cfg.validate();
  const auto records = load_manifest(cfg.manifest);
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + cfg.out_dir.string());
  const DatasetFeatures ds =
      extract_features(records, cfg.manifest, GridSpec(cfg.grid), cfg.histogram, cfg.threads);
  EvaluationReport rep = evaluate(ds, cfg);
  write_text(cfg.out_dir / "report.txt", report_text(rep));
  write_text(cfg.out_dir / "report.tsv", report_tsv(rep));
  write_text(cfg.out_dir / "seeds.tsv", seeds_tsv(rep));
  write_text(cfg.out_dir / "timing.tsv", timing_tsv(rep.timing));
  return rep;
}

// ---- grid-size comparison ----------------------------------------------------

struct GridTrendRow {
  int grid = 0;
  Accuracy fused;
  double best_region = 0.0;
  std::string best_region_name;
};

/// Runs the fusion evaluation at each grid size (into out_dir/grid_N) and
/// writes grid_trend.tsv and grid_trend.txt.
inline std::vector<GridTrendRow> grid_trend(const RunConfig& base, const std::vector<int>& grids) {
  std::vector<GridTrendRow> rows;
  for (int g : grids) {
    RunConfig cfg = base;
    cfg.grid = g;
    cfg.mode = RunMode::Fusion;
    cfg.final_bundle = false;
    cfg.out_dir = base.out_dir / ("grid_" + std::to_string(g));
    const EvaluationReport rep = train_eval(cfg);
    GridTrendRow row{g, rep.fused_mean(), 0.0, ""};
    for (std::size_t r = 0; r < kRegionCount; ++r) {
      const double a = rep.region_mean(r).overall;
      if (a > row.best_region) {
        row.best_region = a;
        row.best_region_name = region_name(kAllRegions[r]);
      }
    }
    rows.push_back(row);
  }
  std::ostringstream tsv, txt;
  tsv << "grid\tfused_male\tfused_female\tfused_overall\tbest_region\tbest_region_overall\n";
  txt << "Fused accuracy vs grid size\n";
  for (const auto& r : rows) {
    tsv << r.grid << 'x' << r.grid << '\t' << format_fixed(r.fused.male, 4) << '\t'
        << format_fixed(r.fused.female, 4) << '\t' << format_fixed(r.fused.overall, 4) << '\t'
        << r.best_region_name << '\t' << format_fixed(r.best_region, 4) << '\n';
    const int bar = static_cast<int>(std::lround(r.fused.overall / 2.0));
    txt << "  " << r.grid << 'x' << r.grid << "  " << std::string(static_cast<std::size_t>(bar), '#')
        << ' ' << format_fixed(r.fused.overall, 2) << "%\n";
  }
  std::filesystem::create_directories(base.out_dir);
  write_text(base.out_dir / "grid_trend.tsv", tsv.str());
  write_text(base.out_dir / "grid_trend.txt", txt.str());
  return rows;
}

}  // namespace rfg
