#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rfg/rfg.hpp"

namespace {

using rfg::RunConfig;

void add_run_options(CLI::App* cmd, RunConfig& cfg, std::string& mode, std::string& histogram) {
  cmd->add_option("--manifest", cfg.manifest, "Tab-separated sample manifest")->required();
  cmd->add_option("--out", cfg.out_dir, "Output directory");
  cmd->add_option("--grid", cfg.grid, "Grid size per region")->check(CLI::IsMember({2, 3, 4}));
  cmd->add_option("--histogram", histogram, "LBP histogram: uniform (59 bins) or full (256)")
      ->check(CLI::IsMember({"uniform", "full"}));
  cmd->add_option("--keep-fraction", cfg.keep_fraction, "Fraction of features kept after ranking");
  cmd->add_option("--alpha", cfg.alpha, "Variance/correlation mix of the feature graph");
  cmd->add_option("--r-factor", cfg.r_factor, "Path decay as a fraction of 1/spectral radius");
  cmd->add_option("--svm-c", cfg.svm_c, "SVM penalty C");
  cmd->add_option("--calibration-fraction", cfg.calibration_fraction,
                  "Training share held out for calibration and weight learning");
  cmd->add_option("--ga-pop", cfg.ga.population_size, "GA population size");
  cmd->add_option("--ga-gens", cfg.ga.generations, "GA generations");
  cmd->add_option("--ga-crossover", cfg.ga.crossover_prob, "GA crossover probability");
  cmd->add_option("--ga-mutation", cfg.ga.mutation_prob, "GA per-gene mutation probability");
  cmd->add_option("--ga-elitism", cfg.ga.elitism_count, "Chromosomes copied unchanged");
  cmd->add_option("--folds", cfg.folds, "Number of stratified folds");
  cmd->add_option("--seed", cfg.seed, "Root seed");
  cmd->add_option("--mode", mode, "fusion, concat or per-region")
      ->check(CLI::IsMember({"fusion", "concat", "per-region"}));
  cmd->add_option("--threads", cfg.threads, "Worker threads");
  cmd->add_option("--concat-graph-cap", cfg.concat_max_graph_features,
                  "Max columns entering the feature graph in concat mode");
  cmd->add_flag("--global-weights", cfg.global_weights, "Learn one weight vector over all folds");
  cmd->add_flag("--leak-check", cfg.leak_check,
                "Retrain each fold with scrambled test labels and compare fitted state");
}

void apply_names(RunConfig& cfg, const std::string& mode, const std::string& histogram) {
  if (mode == "concat") cfg.mode = rfg::RunMode::Concat;
  else if (mode == "per-region") cfg.mode = rfg::RunMode::PerRegion;
  else cfg.mode = rfg::RunMode::Fusion;
  cfg.histogram = histogram == "full" ? rfg::HistogramMode::Full : rfg::HistogramMode::Uniform;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Region-wise compass LBP gender classification with GA-weighted fusion"};
  app.set_config("--config", "", "TOML config file (command-line flags take precedence)");
  app.require_subcommand(1);

  int synth_n = 60, synth_size = 96;
  std::uint64_t synth_seed = 7;
  std::string synth_out = "synthetic";
  auto* synth = app.add_subcommand("synth", "Write a synthetic labelled face corpus");
  synth->add_option("--n-per-class", synth_n, "Samples per class");
  synth->add_option("--size", synth_size, "Image side in pixels (>= 64)");
  synth->add_option("--seed", synth_seed, "Corpus seed");
  synth->add_option("--out", synth_out, "Output directory");

  RunConfig cfg;
  std::string mode = "fusion", histogram = "uniform";
  bool final_bundle = false;
  auto* train = app.add_subcommand("train-eval", "k-fold train and evaluate, then write reports and models");
  add_run_options(train, cfg, mode, histogram);
  train->add_flag("--final-bundle", final_bundle,
                  "Also train a bundle on the whole corpus (written to <out>/final)");

  auto* timing = app.add_subcommand("timing", "Per-stage wall-clock times in milliseconds");
  add_run_options(timing, cfg, mode, histogram);

  std::vector<int> grids{2, 3, 4};
  auto* trend = app.add_subcommand("grid-trend", "Fused accuracy for several grid sizes");
  add_run_options(trend, cfg, mode, histogram);
  trend->add_option("--grids", grids, "Grid sizes to compare")->check(CLI::IsMember({2, 3, 4}));

  std::string bundle, image, landmarks;
  auto* pred = app.add_subcommand("predict", "Classify one image with a trained bundle");
  pred->add_option("--bundle", bundle, "Bundle directory (contains bundle.tsv)")->required();
  pred->add_option("--image", image, "Image file (PGM/PPM)")->required();
  pred->add_option("--landmarks", landmarks, "49-point landmark file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      const auto recs = rfg::generate_synthetic_corpus(synth_n, synth_size, synth_seed, synth_out);
      std::cout << "wrote " << recs.size() << " samples to " << synth_out << "/manifest.tsv\n";
      return 0;
    }
    if (*pred) {
      const rfg::Bundle b = rfg::load_bundle(bundle);
      const rfg::GrayImage img = rfg::load_gray_image(image);
      const rfg::LandmarkSet lm = rfg::load_landmarks(landmarks);
      std::cout << rfg::format_prediction(rfg::predict(b, img, lm)) << '\n';
      return 0;
    }

    apply_names(cfg, mode, histogram);
    if (*train) {
      cfg.final_bundle = final_bundle;
      const auto rep = rfg::train_eval(cfg);
      std::cout << rfg::report_text(rep);
      std::cout << "\nreports written to " << cfg.out_dir.string() << '\n';
      if (cfg.leak_check && !rep.leak_free()) {
        std::cerr << "error: leak check failed\n";
        return 4;
      }
      return 0;
    }
    if (*timing) {
      cfg.final_bundle = false;
      const auto rep = rfg::train_eval(cfg);
      std::cout << rfg::timing_tsv(rep.timing);
      return 0;
    }
    if (*trend) {
      const auto rows = rfg::grid_trend(cfg, grids);
      std::ifstream in(cfg.out_dir / "grid_trend.txt");
      std::cout << in.rdbuf();
      return 0;
    }
  } catch (const rfg::Error& e) {
    std::cerr << "error [" << rfg::errc_name(e.code()) << "]: " << e.what() << '\n';
    return rfg::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
