#pragma once

// Per-region linear max-margin classifier with sigmoid-calibrated
// probabilities and a checksummed binary model format.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <zlib.h>

#include "rfg/corpus.hpp"
#include "rfg/error.hpp"
#include "rfg/regions.hpp"
#include "rfg/selection.hpp"
#include "rfg/texture.hpp"

namespace rfg {

struct LinearModel {
  RegionId region = RegionId::LeftEye;
  int grid = 4;
  HistogramMode histogram = HistogramMode::Uniform;
  std::uint64_t input_columns = 0;
  std::vector<std::uint32_t> selected_indices;
  std::vector<double> w;
  double b = 0.0;
  // p(male | f) = 1 / (1 + exp(platt_a * f + platt_b))
  double platt_a = -1.0;
  double platt_b = 0.0;
  bool calibrated = false;
  double svm_c = 1.0;
  std::uint64_t seed = 0;
  double calibration_fraction = 0.0;

  double decision(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (static_cast<std::size_t>(x.size()) != w.size())
      throw Error(Errc::ColumnMismatch, "expected " + std::to_string(w.size()) + " features, got " +
                                            std::to_string(x.size()));
    return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())).dot(x) + b;
  }

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

struct SvmConfig {
  double c = 1.0;
  std::uint64_t seed = 0;
  long max_iterations = 100000;
  double tolerance = 1e-6;  // maximal KKT violation at termination
};

namespace detail {
inline void require_both_classes(std::span<const int> labels, const char* what) {
  bool pos = false, neg = false;
  for (int y : labels) (y == kMale ? pos : neg) = true;
  if (!pos || !neg) throw Error(Errc::SingleClass, std::string(what) + " needs both classes");
}
}  // namespace detail

/// Soft-margin linear SVM, min 1/2 |w|^2 + C sum hinge(y (w.x + b)), solved
/// in the dual by two-coordinate descent with second-order working-set
/// selection. Labels 0/1 map to -1/+1. The solver is deterministic; the
/// seed is recorded in the model only.
inline LinearModel train_linear_svm(const Eigen::MatrixXd& x, std::span<const int> labels,
                                    const SvmConfig& cfg = {}) {
  const Eigen::Index m = x.rows();
  if (static_cast<std::size_t>(m) != labels.size())
    throw Error(Errc::LengthMismatch, "label count does not match rows");
  if (!(cfg.c > 0.0)) throw Error(Errc::InvalidArgument, "C must be positive");
  if (!x.allFinite()) throw Error(Errc::InvalidArgument, "features contain NaN/Inf");
  detail::require_both_classes(labels, "SVM training");

  constexpr double tau = 1e-12;
  const double c = cfg.c;
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) y[i] = labels[static_cast<std::size_t>(i)] == kMale ? 1.0 : -1.0;
  Eigen::MatrixXd q = x * x.transpose();
  q = (y * y.transpose()).cwiseProduct(q);
  const Eigen::VectorXd qd = q.diagonal();

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(m, -1.0);
  auto at_upper = [&](Eigen::Index t) { return alpha[t] >= c; };
  auto at_lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };

  long iter = 0;
  for (;; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index t = 0; t < m; ++t) {
      if (y[t] > 0 ? !at_upper(t) : !at_lower(t)) {
        if (-y[t] * grad[t] >= gmax) {
          gmax = -y[t] * grad[t];
          i = t;
        }
      }
    }
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < m && i >= 0; ++t) {
      if (y[t] > 0 ? at_lower(t) : at_upper(t)) continue;
      const double yg = y[t] * grad[t];
      gmax2 = std::max(gmax2, yg);
      const double diff = gmax + yg;
      if (diff > 0.0) {
        double quad = qd[i] + qd[t] - 2.0 * y[i] * y[t] * q(i, t);
        if (quad <= 0.0) quad = tau;
        const double obj = -(diff * diff) / quad;
        if (obj <= best) {
          best = obj;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < cfg.tolerance) break;
    if (iter >= cfg.max_iterations)
      throw Error(Errc::DidNotConverge, "SVM solver hit iteration cap", iter);

    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = qd[i] + qd[j] + 2.0 * q(i, j);
      if (quad <= 0.0) quad = tau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = -diff; }
      }
      if (diff > 0.0) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
      } else {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = c + diff; }
      }
    } else {
      double quad = qd[i] + qd[j] - 2.0 * q(i, j);
      if (quad <= 0.0) quad = tau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
      } else {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = sum; }
      }
      if (sum > c) {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = sum; }
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    grad += q.col(i) * di + q.col(j) * dj;
  }

  // Offset from free support vectors, or the midpoint of the feasible range.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  long n_free = 0;
  for (Eigen::Index t = 0; t < m; ++t) {
    const double yg = y[t] * grad[t];
    if (at_upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (at_lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);

  const Eigen::VectorXd w = x.transpose() * alpha.cwiseProduct(y);
  if (!(w.norm() > 0.0))
    throw Error(Errc::DegenerateData, "SVM produced a zero weight vector");
  LinearModel model;
  model.w.assign(w.data(), w.data() + w.size());
  model.b = -rho;
  model.svm_c = cfg.c;
  model.seed = cfg.seed;
  return model;
}

inline LinearModel train_linear_svm(const FeatureMatrix& data, const SvmConfig& cfg = {}) {
  return train_linear_svm(data.values, data.labels, cfg);
}

/// Numerically stable 1 / (1 + exp(z)).
inline double sigmoid_neg(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

inline double probability_male(const LinearModel& model, double decision) {
  return sigmoid_neg(model.platt_a * decision + model.platt_b);
}

struct PlattFit {
  double a = 0.0;
  double b = 0.0;
  int iterations = 0;
};

/// Sigmoid fit p(y=1|f) = 1/(1+exp(a f + b)) on decision values with
/// regularised targets, by Newton's method with backtracking. A fit with
/// a > 0 would invert the classifier's ordering; it is replaced by the
/// best constant (a = 0).
inline PlattFit fit_platt(std::span<const double> decisions, std::span<const int> labels) {
  if (decisions.size() != labels.size())
    throw Error(Errc::LengthMismatch, "decision/label count mismatch");
  detail::require_both_classes(labels, "calibration");
  const std::size_t n = decisions.size();
  double prior1 = 0, prior0 = 0;
  for (int y : labels) (y == kMale ? prior1 : prior0) += 1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] == kMale ? hi : lo;

  constexpr int max_iter = 100;
  constexpr double min_step = 1e-10, sigma = 1e-12, eps = 1e-5;
  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = decisions[i] * a + b;
      f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };
  PlattFit fit{0.0, std::log((prior0 + 1.0) / (prior1 + 1.0)), 0};
  double fval = objective(fit.a, fit.b);
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = decisions[i] * fit.a + fit.b;
      const double p = sigmoid_neg(z);
      const double q = 1.0 - p;
      const double d2 = p * q;
      h11 += decisions[i] * decisions[i] * d2;
      h22 += d2;
      h21 += decisions[i] * d2;
      const double d1 = t[i] - p;
      g1 += decisions[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < eps && std::abs(g2) < eps) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= min_step) {
      const double na = fit.a + step * da, nb = fit.b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        fit.a = na;
        fit.b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < min_step) break;  // no further decrease possible
  }
  if (iter >= max_iter) throw Error(Errc::DidNotConverge, "calibration did not converge", iter);
  fit.iterations = iter;
  if (fit.a > 0.0) {
    double mean_t = 0.0;
    for (double v : t) mean_t += v;
    mean_t /= static_cast<double>(n);
    fit.a = 0.0;
    fit.b = std::log((1.0 - mean_t) / mean_t);
  }
  return fit;
}

inline LinearModel calibrate_platt(LinearModel model, const Eigen::MatrixXd& holdout,
                                   std::span<const int> labels) {
  if (static_cast<std::size_t>(holdout.rows()) != labels.size())
    throw Error(Errc::LengthMismatch, "label count does not match rows");
  std::vector<double> f(static_cast<std::size_t>(holdout.rows()));
  for (Eigen::Index i = 0; i < holdout.rows(); ++i)
    f[static_cast<std::size_t>(i)] = model.decision(holdout.row(i).transpose());
  const PlattFit fit = fit_platt(f, labels);
  model.platt_a = fit.a;
  model.platt_b = fit.b;
  model.calibrated = true;
  return model;
}

struct ScorePair {
  double p_male = 0.5;
  double p_female = 0.5;
  friend bool operator==(const ScorePair&, const ScorePair&) = default;
};

inline constexpr ScorePair kNeutralScore{0.5, 0.5};

/// Ties (p_male == p_female) resolve to male.
inline int predicted_class(const ScorePair& s) { return s.p_male >= s.p_female ? kMale : kFemale; }

inline ScorePair score_row(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double p = probability_male(model, model.decision(x));
  return {p, 1.0 - p};
}

/// Scores rows already projected onto the model's selected features.
inline std::vector<ScorePair> score(const LinearModel& model, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != model.w.size())
    throw Error(Errc::ColumnMismatch, "expected " + std::to_string(model.w.size()) +
                                          " columns, got " + std::to_string(x.cols()));
  std::vector<ScorePair> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(score_row(model, x.row(i).transpose()));
  return out;
}

/// Confusion counts with male as the positive class.
struct Confusion {
  long male_as_male = 0;
  long male_as_female = 0;
  long female_as_female = 0;
  long female_as_male = 0;

  long total() const { return male_as_male + male_as_female + female_as_female + female_as_male; }
  void add(int truth, int predicted) {
    if (truth == kMale) (predicted == kMale ? male_as_male : male_as_female)++;
    else (predicted == kFemale ? female_as_female : female_as_male)++;
  }
  Confusion& operator+=(const Confusion& o) {
    male_as_male += o.male_as_male;
    male_as_female += o.male_as_female;
    female_as_female += o.female_as_female;
    female_as_male += o.female_as_male;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Percentages; a class with no samples reports 0.
struct Accuracy {
  double male = 0.0;
  double female = 0.0;
  double overall = 0.0;
};

inline Accuracy accuracy_from(const Confusion& c) {
  auto pct = [](long num, long den) { return den == 0 ? 0.0 : 100.0 * num / den; };
  return {pct(c.male_as_male, c.male_as_male + c.male_as_female),
          pct(c.female_as_female, c.female_as_female + c.female_as_male),
          pct(c.male_as_male + c.female_as_female, c.total())};
}

inline Confusion confusion_of(std::span<const ScorePair> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::LengthMismatch, "scores/labels length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) c.add(labels[i], predicted_class(scores[i]));
  return c;
}

inline Accuracy region_accuracy(std::span<const ScorePair> scores, std::span<const int> labels) {
  return accuracy_from(confusion_of(scores, labels));
}

// ---- model files -----------------------------------------------------------

inline constexpr char kModelMagic[4] = {'R', 'F', 'G', 'M'};
inline constexpr std::uint16_t kModelVersion = 1;

namespace detail {

enum ModelTag : std::uint16_t {
  kTagRegion = 1,
  kTagGrid,
  kTagHistogram,
  kTagInputColumns,
  kTagSelected,
  kTagWeights,
  kTagOffset,
  kTagPlattA,
  kTagPlattB,
  kTagCalibrated,
  kTagSvmC,
  kTagSeed,
  kTagCalibrationFraction,
};

class ByteWriter {
 public:
  std::vector<unsigned char> bytes;
  template <class T>
  void put(T v) {
    if constexpr (std::is_same_v<T, double>) {
      put(std::bit_cast<std::uint64_t>(v));
    } else {
      for (std::size_t k = 0; k < sizeof(T); ++k)
        bytes.push_back(static_cast<unsigned char>(static_cast<std::uint64_t>(v) >> (8 * k)));
    }
  }
};

class ByteReader {
 public:
  ByteReader(std::span<const unsigned char> b) : b_(b) {}
  template <class T>
  T get() {
    if constexpr (std::is_same_v<T, double>) {
      return std::bit_cast<double>(get<std::uint64_t>());
    } else {
      if (pos_ + sizeof(T) > b_.size()) throw Error(Errc::ChecksumMismatch, "model file truncated");
      std::uint64_t v = 0;
      for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * k);
      return static_cast<T>(v);
    }
  }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) {
    if (pos_ + n > b_.size()) throw Error(Errc::ChecksumMismatch, "model file truncated");
    pos_ += n;
  }

 private:
  std::span<const unsigned char> b_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const unsigned char> data) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), data.data(), static_cast<uInt>(data.size())));
}

}  // namespace detail

/// RFGM container: magic, u16 version, u32 field count, fields of
/// (u16 tag, u32 length, payload), trailing CRC32 of everything before it.
/// Integers and doubles are little-endian.
inline std::vector<unsigned char> model_to_bytes(const LinearModel& m) {
  using namespace detail;
  std::vector<std::pair<std::uint16_t, ByteWriter>> fields;
  auto field = [&](std::uint16_t tag) -> ByteWriter& {
    fields.emplace_back(tag, ByteWriter{});
    return fields.back().second;
  };
  field(kTagRegion).put<std::uint8_t>(static_cast<std::uint8_t>(region_index(m.region)));
  field(kTagGrid).put<std::uint8_t>(static_cast<std::uint8_t>(m.grid));
  field(kTagHistogram).put<std::uint8_t>(m.histogram == HistogramMode::Uniform ? 0 : 1);
  field(kTagInputColumns).put<std::uint64_t>(m.input_columns);
  {
    auto& f = field(kTagSelected);
    f.put<std::uint32_t>(static_cast<std::uint32_t>(m.selected_indices.size()));
    for (auto v : m.selected_indices) f.put<std::uint32_t>(v);
  }
  {
    auto& f = field(kTagWeights);
    f.put<std::uint32_t>(static_cast<std::uint32_t>(m.w.size()));
    for (double v : m.w) f.put<double>(v);
  }
  field(kTagOffset).put<double>(m.b);
  field(kTagPlattA).put<double>(m.platt_a);
  field(kTagPlattB).put<double>(m.platt_b);
  field(kTagCalibrated).put<std::uint8_t>(m.calibrated ? 1 : 0);
  field(kTagSvmC).put<double>(m.svm_c);
  field(kTagSeed).put<std::uint64_t>(m.seed);
  field(kTagCalibrationFraction).put<double>(m.calibration_fraction);

  ByteWriter out;
  out.bytes.assign(std::begin(kModelMagic), std::end(kModelMagic));
  out.put<std::uint16_t>(kModelVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(fields.size()));
  for (auto& [tag, w] : fields) {
    out.put<std::uint16_t>(tag);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(w.bytes.size()));
    out.bytes.insert(out.bytes.end(), w.bytes.begin(), w.bytes.end());
  }
  out.put<std::uint32_t>(crc32_of(out.bytes));
  return out.bytes;
}

inline LinearModel model_from_bytes(std::span<const unsigned char> bytes) {
  using namespace detail;
  if (bytes.size() < 6 || !std::equal(std::begin(kModelMagic), std::end(kModelMagic), bytes.begin()))
    throw Error(Errc::UnsupportedFormat, "not an RFGM model file");
  ByteReader header(bytes.subspan(4, 2));
  const auto version = header.get<std::uint16_t>();
  if (version != kModelVersion)
    throw Error(Errc::VersionMismatch, "model version " + std::to_string(version), version);
  if (bytes.size() < 14) throw Error(Errc::ChecksumMismatch, "model file truncated");
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader tail(bytes.last(4));
  if (tail.get<std::uint32_t>() != crc32_of(body))
    throw Error(Errc::ChecksumMismatch, "model checksum mismatch");

  ByteReader rd(body);
  rd.skip(6);
  const auto count = rd.get<std::uint32_t>();
  LinearModel m;
  for (std::uint32_t f = 0; f < count; ++f) {
    const auto tag = rd.get<std::uint16_t>();
    const auto len = rd.get<std::uint32_t>();
    const std::size_t start = rd.pos();
    switch (tag) {
      case kTagRegion: {
        const auto r = rd.get<std::uint8_t>();
        if (r >= kRegionCount) throw Error(Errc::ParseError, "bad region id in model");
        m.region = static_cast<RegionId>(r);
        break;
      }
      case kTagGrid: m.grid = rd.get<std::uint8_t>(); break;
      case kTagHistogram:
        m.histogram = rd.get<std::uint8_t>() == 0 ? HistogramMode::Uniform : HistogramMode::Full;
        break;
      case kTagInputColumns: m.input_columns = rd.get<std::uint64_t>(); break;
      case kTagSelected: {
        const auto n = rd.get<std::uint32_t>();
        m.selected_indices.resize(n);
        for (auto& v : m.selected_indices) v = rd.get<std::uint32_t>();
        break;
      }
      case kTagWeights: {
        const auto n = rd.get<std::uint32_t>();
        m.w.resize(n);
        for (auto& v : m.w) v = rd.get<double>();
        break;
      }
      case kTagOffset: m.b = rd.get<double>(); break;
      case kTagPlattA: m.platt_a = rd.get<double>(); break;
      case kTagPlattB: m.platt_b = rd.get<double>(); break;
      case kTagCalibrated: m.calibrated = rd.get<std::uint8_t>() != 0; break;
      case kTagSvmC: m.svm_c = rd.get<double>(); break;
      case kTagSeed: m.seed = rd.get<std::uint64_t>(); break;
      case kTagCalibrationFraction: m.calibration_fraction = rd.get<double>(); break;
      default: rd.skip(len); break;
    }
    if (rd.pos() != start + len) throw Error(Errc::ParseError, "model field length mismatch", tag);
  }
  if (rd.pos() != body.size()) throw Error(Errc::ParseError, "trailing bytes in model");
  if (m.w.size() != m.selected_indices.size())
    throw Error(Errc::ParseError, "weight/selection dimension mismatch");
  return m;
}

inline void save_model(const LinearModel& m, const std::filesystem::path& path) {
  const auto bytes = model_to_bytes(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

inline LinearModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_bytes(bytes);
}

// ---- one region, end to end ------------------------------------------------

struct RegionTrainConfig {
  SelectorConfig selector;
  SvmConfig svm;
  double calibration_fraction = 0.2;
};

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

inline std::vector<int> take(std::span<const int> v, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

/// Feature selection on fit + holdout rows (it is label-free), SVM on the
/// fit rows, sigmoid calibration on the holdout rows. `x` holds raw region
/// descriptors for all samples; only the listed rows are read.
inline LinearModel train_region_model(const Eigen::MatrixXd& x, std::span<const int> labels,
                                      std::span<const std::size_t> fit_rows,
                                      std::span<const std::size_t> holdout_rows,
                                      const RegionTrainConfig& cfg) {
  std::vector<std::size_t> all(fit_rows.begin(), fit_rows.end());
  all.insert(all.end(), holdout_rows.begin(), holdout_rows.end());
  std::sort(all.begin(), all.end());
  const FeatureSelector selector = fit_selector(take_rows(x, all), cfg.selector);

  const auto y_fit = take(labels, fit_rows);
  LinearModel model = train_linear_svm(selector.transform(take_rows(x, fit_rows)), y_fit, cfg.svm);
  model = calibrate_platt(std::move(model), selector.transform(take_rows(x, holdout_rows)),
                          take(labels, holdout_rows));
  model.input_columns = selector.input_columns();
  model.selected_indices.assign(selector.selected().begin(), selector.selected().end());
  model.calibration_fraction = cfg.calibration_fraction;
  return model;
}

/// Scores raw descriptors (full width) by projecting onto the model's
/// selected columns.
inline ScorePair score_descriptor(const LinearModel& model, std::span<const double> descriptor) {
  if (descriptor.size() != model.input_columns)
    throw Error(Errc::ColumnMismatch, "descriptor has " + std::to_string(descriptor.size()) +
                                          " values, model expects " + std::to_string(model.input_columns));
  Eigen::VectorXd x(static_cast<Eigen::Index>(model.selected_indices.size()));
  for (std::size_t c = 0; c < model.selected_indices.size(); ++c)
    x[static_cast<Eigen::Index>(c)] = descriptor[model.selected_indices[c]];
  return score_row(model, x);
}

inline std::vector<ScorePair> score_raw(const LinearModel& model, const Eigen::MatrixXd& x,
                                        std::span<const std::size_t> rows) {
  std::vector<ScorePair> out;
  out.reserve(rows.size());
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (auto r : rows) {
    Eigen::Map<Eigen::RowVectorXd>(row.data(), x.cols()) = x.row(static_cast<Eigen::Index>(r));
    out.push_back(score_descriptor(model, row));
  }
  return out;
}

}  // namespace rfg
