// Acceptance runner: one PASS/FAIL line per criterion. Exit status is 0 only
// when every criterion passes.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "rfg/rfg.hpp"
#include "support.hpp"

using namespace rfg;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "failed: ";
      else detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

int failures = 0;

void report(int id, const std::string& title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double s = seconds_since(t0);
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " ("
            << o.detail.str() << (o.detail.str().empty() ? "" : ", ") << format_fixed(s, 2) << " s)"
            << std::endl;
}

// ---- 2 -----------------------------------------------------------------------

void lbp_oracle(Outcome& o) {
  const auto t0 = Clock::now();
  Rng rng(1001);
  long mismatches = 0;
  for (int k = 0; k < 200; ++k) {
    const int w = 3 + static_cast<int>(rng.below(30));
    const int h = 3 + static_cast<int>(rng.below(30));
    // Narrow intensity ranges on some images force plenty of ties.
    const int hi = k % 3 == 0 ? 3 : 255;
    const GrayImage img = test::random_image(rng, w, h, 0, hi);
    const GrayImage codes = lbp_image(img);
    for (int y = 1; y + 1 < h; ++y)
      for (int x = 1; x + 1 < w; ++x) mismatches += codes(x - 1, y - 1) != oracle::naive_lbp(img, x, y);
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " mismatching codes");
  // Worked 3x3 example: centre 29, signs 1,1,1,0,1,1,0,0 clockwise from the top-left.
  const std::array<int, 9> window{40, 35, 29, 10, 29, 12, 28, 30, 50};
  const std::string bits = lbp_bits_clockwise(lbp_code(window));
  o.require(bits == "11101100", "worked example gave " + bits);
  const double s = seconds_since(t0);
  o.require(s < 5.0, "took " + format_fixed(s, 2) + " s");
  o.detail << "0 mismatches over 200 images, example " << bits;
}

// ---- 3 -----------------------------------------------------------------------

void uniform_count(Outcome& o) {
  int uniform = 0;
  for (unsigned code = 0; code < 256; ++code) {
    // Count transitions bit by bit, independent of the library helper.
    int t = 0;
    for (int p = 0; p < 8; ++p) t += ((code >> p) & 1u) != ((code >> ((p + 1) % 8)) & 1u);
    uniform += t <= 2;
  }
  const auto& m = uniform_map();
  o.require(uniform == 58, "enumeration found " + std::to_string(uniform));
  o.require(m.uniform_count == 58, "map reports " + std::to_string(m.uniform_count));
  o.require(m.bins == 59 && histogram_bins(HistogramMode::Uniform) == 59, "histogram dimension is not 59");
  o.detail << uniform << " uniform codes, " << m.bins << " bins";
}

// ---- 4 -----------------------------------------------------------------------

void convolution_oracle(Outcome& o) {
  Rng rng(1004);
  const auto masks = kirsch_masks();
  long mismatches = 0;
  for (int k = 0; k < 100; ++k) {
    const GrayImage img = test::random_image(rng, 12, 12);
    for (const auto& m : masks) {
      const EdgeResponse r = convolve_edge_response(img, m);
      for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) mismatches += r(x, y) != oracle::naive_correlation(img, m.coefficients, x, y);
    }
  }
  long nonzero = 0;
  for (int v : {0, 1, 77, 255}) {
    GrayImage flat(12, 12);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) flat(x, y) = static_cast<std::uint8_t>(v);
    for (const auto& m : masks)
      for (auto e : convolve_edge_response(flat, m).values) nonzero += e != 0;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " mismatching responses");
  o.require(nonzero == 0, std::to_string(nonzero) + " nonzero responses on constant images");
  o.detail << "0 mismatches over 100 images x 8 masks";
}

// ---- 5 -----------------------------------------------------------------------

void descriptor_contract(Outcome& o) {
  Rng rng(1005);
  for (int n : {2, 3, 4}) {
    const GridSpec grid(n);
    o.require(descriptor_length(grid) == static_cast<std::size_t>(n * n * 472),
              "length formula at n=" + std::to_string(n));
    for (int k = 0; k < 10; ++k) {
      const int w = 3 * n + static_cast<int>(rng.below(50));
      const int h = 3 * n + static_cast<int>(rng.below(50));
      const GrayImage img = test::random_image(rng, w, h, 0, 200);
      const auto d = colbp_descriptor(img, grid);
      o.require(d.size() == static_cast<std::size_t>(n * n * 472), "descriptor length at n=" + std::to_string(n));
      for (std::size_t b = 0; b + 59 <= d.size(); b += 59) {
        const double sum = std::accumulate(d.begin() + static_cast<std::ptrdiff_t>(b),
                                           d.begin() + static_cast<std::ptrdiff_t>(b + 59), 0.0);
        if (std::abs(sum - 1.0) > 1e-9) {
          o.require(false, "block sum " + format_fixed(sum, 12));
          break;
        }
      }
      GrayImage shifted = img;
      const int offset = 1 + static_cast<int>(rng.below(55));
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) shifted(x, y) = static_cast<std::uint8_t>(img(x, y) + offset);
      o.require(colbp_descriptor(shifted, grid) == d, "offset changed the descriptor at n=" + std::to_string(n));
    }
  }
  o.detail << "lengths 1888/4248/7552";
}

// ---- 6 -----------------------------------------------------------------------

void ifs_oracle(Outcome& o) {
  Rng rng(1006);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(7));
    const auto a = oracle::random_affinity(rng, n);
    const double rf = rng.uniform(0.1, 0.6);
    const auto res = ifs_scores(a, rf);
    const auto ref = oracle::truncated_path_sum(a, rf / res.spectral_radius, 40);
    for (Eigen::Index i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(res.scores[static_cast<std::size_t>(i)] - ref[static_cast<std::size_t>(i)]));

    const double c = rng.uniform(0.01, 100.0);
    o.require(ifs_scores(c * a, rf).ranking == res.ranking, "scaling changed the ranking");

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    rng.shuffle(perm);
    Eigen::MatrixXd b(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) b(i, j) = a(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    const auto pb = ifs_scores(b, rf);
    for (Eigen::Index i = 0; i < n; ++i)
      if (pb.scores[static_cast<std::size_t>(i)] != res.scores[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]) {
        o.require(false, "permutation changed a score");
        break;
      }
  }
  o.require(worst <= 1e-6, "max deviation " + std::to_string(worst));
  o.detail << "max deviation " << worst;
}

// ---- 7 -----------------------------------------------------------------------

void svm_checks(Outcome& o) {
  Rng rng(1007);
  double worst_ratio = 1.0;
  for (int k = 0; k < 20; ++k) {
    const int dims = 2 + k % 2;
    const auto t = oracle::separable(rng, 10 + static_cast<int>(rng.below(30)), dims, 0.4);
    const LinearModel m = train_linear_svm(t.x, t.y, SvmConfig{1e4});
    int right = 0;
    for (Eigen::Index i = 0; i < t.x.rows(); ++i)
      right += (m.decision(t.x.row(i).transpose()) >= 0 ? kMale : kFemale) == t.y[static_cast<std::size_t>(i)];
    o.require(right == t.x.rows(), "set " + std::to_string(k) + " not separated");
    const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(m.w.data(), static_cast<Eigen::Index>(m.w.size()));
    const double svm = oracle::geometric_margin(t.x, t.y, w, m.b);
    const double best = oracle::exhaustive_margin(t.x, t.y, dims == 2 ? 20000 : 100000);
    worst_ratio = std::min(worst_ratio, svm / best);
    o.require(std::abs(svm - best) <= 0.05 * best, "set " + std::to_string(k) + " margin " + std::to_string(svm) +
                                                       " vs " + std::to_string(best));
  }
  const auto t = oracle::separable(rng, 60, 5, 0.0);
  SvmConfig cfg{1.0};
  cfg.seed = 99;
  o.require(model_to_bytes(train_linear_svm(t.x, t.y, cfg)) == model_to_bytes(train_linear_svm(t.x, t.y, cfg)),
            "model bytes differ between identical runs");
  o.detail << "20/20 separated, worst margin ratio " << format_fixed(worst_ratio, 4);
}

// ---- 8 -----------------------------------------------------------------------

void ga_checks(Outcome& o) {
  Rng rng(1008);
  // (a) elitism
  for (int run = 0; run < 10; ++run) {
    const auto y = oracle::balanced_labels(rng, 60);
    const ScoreTable t = oracle::noisy_regions(rng, y, {0.6, 0.7, 0.65, 0.55, 0.75});
    GaConfig cfg;
    cfg.seed = rng.next();
    const GaResult r = ga_optimize(t, y, cfg);
    for (std::size_t g = 1; g < r.population_best.size(); ++g)
      if (r.population_best[g] > r.population_best[g - 1]) {
        o.require(false, "(a) best error rose at generation " + std::to_string(g));
        break;
      }
  }
  // (b) one-hot weights
  {
    const auto y = oracle::balanced_labels(rng, 200);
    const ScoreTable t = oracle::noisy_regions(rng, y, {0.7, 0.8, 0.6, 0.9});
    for (std::size_t k = 0; k < t.size(); ++k) {
      std::vector<double> w(t.size(), 0.0);
      w[k] = 1.0;
      const auto fused = fuse(t, w);
      for (std::size_t i = 0; i < y.size(); ++i)
        if (fused[i] != predicted_class(t[k][i])) {
          o.require(false, "(b) one-hot fusion disagrees with region " + std::to_string(k));
          break;
        }
    }
  }
  // (c) grid search, R = 2 and 3
  double worst_gap = -1.0;
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t regions = 2 + static_cast<std::size_t>(trial % 2);
    const auto y = oracle::balanced_labels(rng, 100);
    std::vector<double> rel;
    for (std::size_t r = 0; r < regions; ++r) rel.push_back(rng.uniform(0.55, 0.85));
    const ScoreTable t = oracle::noisy_regions(rng, y, rel);
    GaConfig cfg;  // roulette, crossover 0.80, mutation 0.01
    cfg.seed = rng.next();
    const GaResult r = ga_optimize(t, y, cfg);
    const double gap = r.best_error - oracle::grid_search_error(t, y, 0.05);
    worst_gap = std::max(worst_gap, gap);
    o.require(gap <= 0.02, "(c) GA " + format_fixed(gap, 3) + " above grid search");
  }
  // (d) seed determinism
  {
    const auto y = oracle::balanced_labels(rng, 50);
    const ScoreTable t = oracle::noisy_regions(rng, y, {0.6, 0.7, 0.8, 0.65});
    GaConfig cfg;
    cfg.seed = 77;
    const GaResult a = ga_optimize(t, y, cfg), b = ga_optimize(t, y, cfg);
    o.require(a.weights == b.weights && a.best_history == b.best_history, "(d) same seed, different result");
  }
  o.detail << "worst GA minus grid-search error " << format_fixed(worst_gap, 3);
}

// ---- 9-11 ----------------------------------------------------------------------

RunConfig corpus_config(const fs::path& corpus, const fs::path& out) {
  RunConfig cfg;
  cfg.manifest = corpus / "manifest.tsv";
  cfg.out_dir = out;
  return cfg;
}

void end_to_end(Outcome& o, const fs::path& corpus, const fs::path& work) {
  const auto t0 = Clock::now();
  const EvaluationReport rep = train_eval(corpus_config(corpus, work / "run_a"));
  const double s = seconds_since(t0);
  train_eval(corpus_config(corpus, work / "run_b"));

  const double fused = rep.fused_mean().overall;
  const double best = rep.best_region_mean();
  o.require(rep.samples == 120, std::to_string(rep.samples) + " samples");
  o.require(fused >= 90.0, "fused accuracy " + format_fixed(fused, 2));
  o.require(fused >= best - 2.0, "fused " + format_fixed(fused, 2) + " below best region " + format_fixed(best, 2));
  o.require(s < 180.0, "run took " + format_fixed(s, 1) + " s");
  for (const char* f : {"report.tsv", "report.txt"})
    o.require(test::read_file(work / "run_a" / f) == test::read_file(work / "run_b" / f),
              std::string(f) + " differs between identical runs");
  o.detail << "fused " << format_fixed(fused, 2) << "%, best region " << format_fixed(best, 2) << "%, run "
           << format_fixed(s, 1) << " s, reports byte-identical";
}

void leak_check(Outcome& o, const fs::path& corpus, const fs::path& work) {
  RunConfig cfg = corpus_config(corpus, work / "leak");
  cfg.leak_check = true;
  const EvaluationReport rep = train_eval(cfg);
  int identical = 0;
  for (const auto& f : rep.folds) identical += f.leak_check_identical;
  o.require(rep.leak_checked, "leak check did not run");
  o.require(identical == static_cast<int>(rep.folds.size()),
            std::to_string(rep.folds.size() - static_cast<std::size_t>(identical)) + " folds changed");
  o.detail << identical << "/" << rep.folds.size() << " folds identical";
}

void grid_trend_check(Outcome& o, const fs::path& corpus, const fs::path& work) {
  const RunConfig cfg = corpus_config(corpus, work / "trend");
  const auto rows = grid_trend(cfg, {2, 3, 4});
  o.require(rows.size() == 3, std::to_string(rows.size()) + " rows");
  const std::string tsv = test::read_file(work / "trend" / "grid_trend.tsv");
  const std::string txt = test::read_file(work / "trend" / "grid_trend.txt");
  for (const char* g : {"2x2", "3x3", "4x4"}) {
    o.require(tsv.find(std::string("\n") + g + "\t") != std::string::npos, std::string(g) + " missing from tsv");
    o.require(txt.find(g) != std::string::npos, std::string(g) + " missing from chart");
  }
  for (const auto& r : rows) o.detail << r.grid << "x" << r.grid << " " << format_fixed(r.fused.overall, 2) << "% ";
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "rfg_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) work = argv[++i];
    else {
      std::cerr << "usage: rfg_acceptance [--work DIR]\n";
      return 2;
    }
  }
  fs::remove_all(work);
  fs::create_directories(work);

  std::cout << "NOTE criterion 1: published dataset accuracies are reference numbers only; "
               "criteria 2-11 are the checks run here"
            << std::endl;
  report(2, "LBP matches naive reference", lbp_oracle);
  report(3, "58 uniform codes, 59 bins", uniform_count);
  report(4, "Kirsch correlation matches naive reference", convolution_oracle);
  report(5, "descriptor length, block sums, offset invariance", descriptor_contract);
  report(6, "IFS vs truncated path sum, scaling, permutation", ifs_oracle);
  report(7, "SVM separation, margin, determinism", svm_checks);
  report(8, "GA elitism, one-hot, grid search, determinism", ga_checks);

  const fs::path corpus = work / "corpus";
  generate_synthetic_corpus(60, 96, 7, corpus);
  report(9, "end-to-end synthetic corpus", [&](Outcome& o) { end_to_end(o, corpus, work); });
  report(10, "leak check under scrambled test labels", [&](Outcome& o) { leak_check(o, corpus, work); });
  report(11, "grid-size trend harness", [&](Outcome& o) { grid_trend_check(o, corpus, work); });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
