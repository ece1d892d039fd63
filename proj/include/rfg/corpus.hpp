#pragma once

// Dataset manifests, stratified fold splitting and the synthetic corpus.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "rfg/error.hpp"
#include "rfg/image.hpp"
#include "rfg/random.hpp"
#include "rfg/regions.hpp"

namespace rfg {

/// Class labels: 0 = female, 1 = male.
inline constexpr int kFemale = 0;
inline constexpr int kMale = 1;

struct SampleRecord {
  std::string sample_id;
  std::string image_path;
  std::string landmark_path;
  int label = 0;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

namespace detail {
inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}
}  // namespace detail

/// Manifest: `sample_id TAB image_path TAB landmark_path TAB label` per
/// line; '#' comments and blank lines are skipped. Paths are kept verbatim.
inline std::vector<SampleRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingFile, path.string());
  std::vector<SampleRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto f = detail::split_tabs(line);
    auto bad = [&] {
      return Error(Errc::ParseError, path.string() + ": line " + std::to_string(lineno), lineno);
    };
    if (f.size() != 4 || f[0].empty() || f[1].empty() || f[2].empty()) throw bad();
    if (f[3] != "0" && f[3] != "1") throw bad();
    SampleRecord r{f[0], f[1], f[2], f[3] == "1" ? kMale : kFemale};
    if (!seen.insert(r.sample_id).second)
      throw Error(Errc::DuplicateId, r.sample_id, lineno);
    records.push_back(std::move(r));
  }
  return records;
}

inline void save_manifest(const std::vector<SampleRecord>& records,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "# sample_id\timage_path\tlandmark_path\tlabel\n";
  for (const auto& r : records)
    out << r.sample_id << '\t' << r.image_path << '\t' << r.landmark_path << '\t' << r.label
        << '\n';
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

/// Resolves a manifest path entry relative to the manifest's directory.
inline std::filesystem::path resolve_path(const std::filesystem::path& manifest,
                                          const std::string& entry) {
  std::filesystem::path p(entry);
  if (p.is_absolute()) return p;
  return manifest.parent_path() / p;
}

struct FoldSplit {
  int k = 0;
  std::vector<int> fold_of;  // aligned with the record list

  std::vector<std::size_t> test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] != fold) out.push_back(i);
    return out;
  }
};

/// Stratified split: each class is shuffled and dealt round-robin, the
/// second class continuing where the first stopped so that fold sizes
/// differ by at most one overall.
inline FoldSplit make_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw Error(Errc::InvalidArgument, "fold count must be at least 2");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kFemale && labels[i] != kMale)
      throw Error(Errc::InvalidArgument, "label must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (int c = 0; c < 2; ++c)
    if (by_class[c].size() < static_cast<std::size_t>(k))
      throw Error(Errc::TooFewSamples,
                  std::string("class ") + (c == kMale ? "male" : "female") + " has " +
                      std::to_string(by_class[c].size()) + " samples for " +
                      std::to_string(k) + " folds",
                  c);

  FoldSplit split{k, std::vector<int>(labels.size(), -1)};
  Rng rng(seed);
  std::size_t next = 0;
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (auto idx : members) split.fold_of[idx] = static_cast<int>(next++ % k);
  }
  return split;
}

inline FoldSplit make_folds(const std::vector<SampleRecord>& records, int k, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.label);
  return make_folds(labels, k, seed);
}

struct HoldoutSplit {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> holdout;
};

/// Seeded stratified holdout over `indices`: round(fraction * class size)
/// members of each class (at least one, and never the whole class) go to
/// the holdout. Both outputs are sorted.
inline HoldoutSplit stratified_holdout(std::span<const std::size_t> indices,
                                       std::span<const int> labels, double fraction,
                                       std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw Error(Errc::InvalidArgument, "holdout fraction must be in (0,1)");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (auto i : indices) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  HoldoutSplit split;
  Rng rng(seed);
  for (int c = 0; c < 2; ++c) {
    auto& members = by_class[c];
    if (members.size() < 2)
      throw Error(Errc::TooFewSamples, "holdout needs two samples of each class", c);
    rng.shuffle(members);
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    split.holdout.insert(split.holdout.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    split.fit.insert(split.fit.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(split.fit.begin(), split.fit.end());
  std::sort(split.holdout.begin(), split.holdout.end());
  return split;
}

/// Bands of the canonical template (fractions of image height) that carry
/// the class signal in the synthetic corpus.
inline constexpr double kEyeBandTop = 0.22, kEyeBandBottom = 0.46;
inline constexpr double kLipBandTop = 0.66, kLipBandBottom = 0.86;

/// One synthetic face: smooth shading plus sensor noise everywhere, and a
/// striped texture in the eye band (female) or the lip band (male).
inline GrayImage synthesize_face(int size, int label, Rng& rng) {
  const double s = size;
  const double phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double level = rng.uniform(90.0, 140.0);
  const double stripe_amp = rng.uniform(22.0, 38.0);
  const double stripe_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double stripe_period = rng.uniform(3.5, 5.0);
  const double band_top = label == kFemale ? kEyeBandTop : kLipBandTop;
  const double band_bottom = label == kFemale ? kEyeBandBottom : kLipBandBottom;

  GrayImage img(size, size);
  for (int y = 0; y < size; ++y) {
    const double fy = y / s;
    const bool in_band = fy >= band_top && fy < band_bottom;
    for (int x = 0; x < size; ++x) {
      const double fx = x / s;
      double v = level + 25.0 * std::sin(2.0 * std::numbers::pi * fx + phase_x) *
                             std::cos(1.5 * std::numbers::pi * fy + phase_y);
      v += 6.0 * rng.normal();
      if (in_band) v += stripe_amp * std::sin(2.0 * std::numbers::pi * x / stripe_period + stripe_phase);
      img(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

/// Writes images/, landmarks/ and manifest.tsv under out_dir. Manifest paths
/// are relative to out_dir, so output bytes do not depend on its location.
inline std::vector<SampleRecord> generate_synthetic_corpus(int n_per_class, int image_size,
                                                           std::uint64_t seed,
                                                           const std::filesystem::path& out_dir) {
  if (n_per_class < 1) throw Error(Errc::InvalidArgument, "n_per_class must be >= 1");
  if (image_size < 64) throw Error(Errc::InvalidArgument, "image_size must be >= 64");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (!ec) fs::create_directories(out_dir / "landmarks", ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  const LandmarkSet landmarks = canonical_landmarks(image_size);
  std::vector<SampleRecord> records;
  const int total = 2 * n_per_class;
  for (int i = 0; i < total; ++i) {
    const int label = i % 2 == 0 ? kFemale : kMale;
    std::ostringstream id;
    id << "syn_" << std::setw(5) << std::setfill('0') << i;
    Rng rng(derive_seed(seed, "synthetic", {static_cast<std::uint64_t>(i)}));
    const GrayImage img = synthesize_face(image_size, label, rng);
    SampleRecord r{id.str(), "images/" + id.str() + ".pgm", "landmarks/" + id.str() + ".txt",
                   label};
    save_pgm(img, out_dir / r.image_path);
    save_landmarks(landmarks, out_dir / r.landmark_path);
    records.push_back(std::move(r));
  }
  save_manifest(records, out_dir / "manifest.tsv");
  return records;
}

}  // namespace rfg
