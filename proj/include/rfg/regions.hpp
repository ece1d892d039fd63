#pragma once

// Facial landmark sets and the ten landmark-driven regions.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rfg/error.hpp"
#include "rfg/image.hpp"

namespace rfg {

inline constexpr std::size_t kLandmarkCount = 49;
inline constexpr std::size_t kRegionCount = 10;

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

class LandmarkSet {
 public:
  LandmarkSet() = default;
  explicit LandmarkSet(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.size() != kLandmarkCount)
      throw Error(Errc::WrongPointCount,
                  "expected 49 landmarks, found " + std::to_string(points_.size()),
                  static_cast<std::int64_t>(points_.size()));
    for (const auto& p : points_)
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw Error(Errc::InvalidArgument, "non-finite landmark coordinate");
  }

  const Point& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Point>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }

  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;

 private:
  std::vector<Point> points_;
};

/// Reads a landmark file: exactly 49 lines of "x y". Blank trailing lines
/// are ignored.
inline LandmarkSet load_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingFile, path.string());
  std::vector<Point> pts;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream ss(line);
    ss.imbue(std::locale::classic());
    Point p;
    std::string rest;
    if (!(ss >> p.x >> p.y) || (ss >> rest) || !std::isfinite(p.x) || !std::isfinite(p.y))
      throw Error(Errc::ParseError,
                  path.string() + ": line " + std::to_string(lineno), lineno);
    pts.push_back(p);
  }
  if (pts.size() != kLandmarkCount)
    throw Error(Errc::WrongPointCount,
                path.string() + ": expected 49 points, found " + std::to_string(pts.size()),
                static_cast<std::int64_t>(pts.size()));
  return LandmarkSet(std::move(pts));
}

inline void save_landmarks(const LandmarkSet& lm, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.imbue(std::locale::classic());
  out << std::fixed << std::setprecision(3);
  for (const auto& p : lm.points()) out << p.x << ' ' << p.y << '\n';
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

enum class RegionId : int {
  LeftEye = 0,
  RightEye,
  CompleteEye,
  Forehead,
  Lip,
  Nose,
  LowerNose,
  LeftFace,
  UpperNose,
  RightFace,
};

inline constexpr std::array<RegionId, kRegionCount> kAllRegions = {
    RegionId::LeftEye,   RegionId::RightEye, RegionId::CompleteEye, RegionId::Forehead,
    RegionId::Lip,       RegionId::Nose,     RegionId::LowerNose,   RegionId::LeftFace,
    RegionId::UpperNose, RegionId::RightFace};

inline const char* region_name(RegionId r) {
  switch (r) {
    case RegionId::LeftEye: return "left_eye";
    case RegionId::RightEye: return "right_eye";
    case RegionId::CompleteEye: return "complete_eye";
    case RegionId::Forehead: return "forehead";
    case RegionId::Lip: return "lip";
    case RegionId::Nose: return "nose";
    case RegionId::LowerNose: return "lower_nose";
    case RegionId::LeftFace: return "left_face";
    case RegionId::UpperNose: return "upper_nose";
    case RegionId::RightFace: return "right_face";
  }
  return "unknown";
}

inline int region_index(RegionId r) { return static_cast<int>(r); }

/// Pixel bounds, inclusive-exclusive.
struct RegionBox {
  RegionId region = RegionId::LeftEye;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  friend bool operator==(const RegionBox&, const RegionBox&) = default;
};

class GridSpec {
 public:
  explicit GridSpec(int n = 4) : n_(n) {
    if (n < 2 || n > 4) throw Error(Errc::InvalidArgument, "grid side must be 2, 3 or 4");
  }
  int n() const noexcept { return n_; }
  int cells() const noexcept { return n_ * n_; }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  int n_;
};

/// 0-based landmark groups of the 49-point layout: brows 0-9, nose bridge
/// 10-13, nose base 14-18, eyes 19-30, mouth 31-48. "Left" is image-left.
namespace landmark_groups {
struct Range {
  std::size_t first, last;  // inclusive
};
inline constexpr Range kLeftBrow{0, 4};
inline constexpr Range kRightBrow{5, 9};
inline constexpr Range kNoseBridge{10, 13};
inline constexpr Range kNoseBase{14, 18};
inline constexpr Range kLeftEye{19, 24};
inline constexpr Range kRightEye{25, 30};
inline constexpr Range kMouth{31, 48};
}  // namespace landmark_groups

namespace detail {

struct Hull {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool empty = true;

  void add(const Point& p) {
    if (empty) {
      x0 = x1 = p.x;
      y0 = y1 = p.y;
      empty = false;
    } else {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  }
  void add(const LandmarkSet& lm, landmark_groups::Range r) {
    for (auto i = r.first; i <= r.last; ++i) add(lm[i]);
  }
  void add(const Hull& h) {
    if (h.empty) return;
    add(Point{h.x0, h.y0});
    add(Point{h.x1, h.y1});
  }
};

inline Point centroid(const LandmarkSet& lm, landmark_groups::Range r) {
  Point c;
  for (auto i = r.first; i <= r.last; ++i) {
    c.x += lm[i].x;
    c.y += lm[i].y;
  }
  const auto n = static_cast<double>(r.last - r.first + 1);
  return {c.x / n, c.y / n};
}

inline double mean_x(const LandmarkSet& lm, landmark_groups::Range r) {
  return centroid(lm, r).x;
}

// Widens a side symmetrically about its centre up to `min_extent`, then
// pads by 10% of the resulting extent on each side.
inline void grow(double& lo, double& hi, double min_extent) {
  double extent = hi - lo;
  if (extent < min_extent) {
    const double c = 0.5 * (lo + hi);
    lo = c - 0.5 * min_extent;
    hi = c + 0.5 * min_extent;
    extent = min_extent;
  }
  const double pad = 0.1 * extent;
  lo -= pad;
  hi += pad;
}

}  // namespace detail

/// Minimum region side, as a fraction of the inter-ocular distance, applied
/// before padding. Keeps near-collinear groups (nose bridge, lip line) usable.
inline constexpr double kMinRegionExtent = 0.35;
inline constexpr double kForeheadHeight = 0.6;

/// Region boxes before clipping to the image. Coordinates may be negative or
/// exceed the image.
inline std::array<RegionBox, kRegionCount> unclipped_region_boxes(const LandmarkSet& lm) {
  namespace g = landmark_groups;
  using detail::Hull;
  if (lm.size() != kLandmarkCount)
    throw Error(Errc::WrongPointCount, "landmark set must have 49 points",
                static_cast<std::int64_t>(lm.size()));

  const Point le = detail::centroid(lm, g::kLeftEye);
  const Point re = detail::centroid(lm, g::kRightEye);
  const double iod = std::hypot(re.x - le.x, re.y - le.y);
  const double min_extent = kMinRegionExtent * iod;

  std::array<Hull, kRegionCount> hulls{};
  auto& left_eye = hulls[region_index(RegionId::LeftEye)];
  left_eye.add(lm, g::kLeftEye);
  left_eye.add(lm, g::kLeftBrow);
  auto& right_eye = hulls[region_index(RegionId::RightEye)];
  right_eye.add(lm, g::kRightEye);
  right_eye.add(lm, g::kRightBrow);
  auto& complete_eye = hulls[region_index(RegionId::CompleteEye)];
  complete_eye.add(left_eye);
  complete_eye.add(right_eye);

  Hull brows;
  brows.add(lm, g::kLeftBrow);
  brows.add(lm, g::kRightBrow);
  auto& forehead = hulls[region_index(RegionId::Forehead)];
  forehead.add(Point{brows.x0, brows.y0 - kForeheadHeight * iod});
  forehead.add(Point{brows.x1, brows.y0});

  hulls[region_index(RegionId::Lip)].add(lm, g::kMouth);
  hulls[region_index(RegionId::UpperNose)].add(lm, g::kNoseBridge);
  hulls[region_index(RegionId::LowerNose)].add(lm, g::kNoseBase);
  auto& nose = hulls[region_index(RegionId::Nose)];
  nose.add(lm, g::kNoseBridge);
  nose.add(lm, g::kNoseBase);

  // Face halves split the mouth and nose at their mean x; points on the
  // split line belong to both halves.
  const double mouth_mid = detail::mean_x(lm, g::kMouth);
  const double nose_mid = detail::mean_x(lm, {g::kNoseBridge.first, g::kNoseBase.last});
  auto& left_face = hulls[region_index(RegionId::LeftFace)];
  auto& right_face = hulls[region_index(RegionId::RightFace)];
  left_face.add(lm, g::kLeftBrow);
  left_face.add(lm, g::kLeftEye);
  right_face.add(lm, g::kRightBrow);
  right_face.add(lm, g::kRightEye);
  for (auto i = g::kMouth.first; i <= g::kMouth.last; ++i) {
    if (lm[i].x <= mouth_mid) left_face.add(lm[i]);
    if (lm[i].x >= mouth_mid) right_face.add(lm[i]);
  }
  for (auto i = g::kNoseBridge.first; i <= g::kNoseBase.last; ++i) {
    if (lm[i].x <= nose_mid) left_face.add(lm[i]);
    if (lm[i].x >= nose_mid) right_face.add(lm[i]);
  }

  std::array<RegionBox, kRegionCount> boxes{};
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    Hull h = hulls[r];
    detail::grow(h.x0, h.x1, min_extent);
    detail::grow(h.y0, h.y1, min_extent);
    boxes[r] = RegionBox{kAllRegions[r], static_cast<int>(std::floor(h.x0)),
                         static_cast<int>(std::floor(h.y0)), static_cast<int>(std::ceil(h.x1)),
                         static_cast<int>(std::ceil(h.y1))};
  }
  return boxes;
}

inline RegionBox clip_box(RegionBox b, int width, int height) {
  b.x0 = std::clamp(b.x0, 0, width);
  b.x1 = std::clamp(b.x1, 0, width);
  b.y0 = std::clamp(b.y0, 0, height);
  b.y1 = std::clamp(b.y1, 0, height);
  return b;
}

/// The ten region boxes clipped to the image, in RegionId order.
inline std::array<RegionBox, kRegionCount> extract_region_boxes(const LandmarkSet& lm,
                                                                 const GrayImage& img) {
  auto boxes = unclipped_region_boxes(lm);
  for (auto& b : boxes) {
    b = clip_box(b, img.width(), img.height());
    if (b.x1 <= b.x0 || b.y1 <= b.y0)
      throw Error(Errc::DegenerateRegion, std::string("empty region ") + region_name(b.region),
                  region_index(b.region));
  }
  return boxes;
}

inline GrayImage crop(const GrayImage& img, const RegionBox& box) {
  if (box.x0 < 0 || box.y0 < 0 || box.x1 > img.width() || box.y1 > img.height())
    throw Error(Errc::OutOfBounds, "crop box exceeds image bounds");
  if (box.x1 <= box.x0 || box.y1 <= box.y0)
    throw Error(Errc::OutOfBounds, "crop box is empty");
  GrayImage out(box.width(), box.height());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out(x, y) = img(box.x0 + x, box.y0 + y);
  return out;
}

/// Offsets splitting [0, length) into n parts; the first (length % n) parts
/// get one extra element.
inline std::vector<int> grid_offsets(int length, int n) {
  std::vector<int> off(static_cast<std::size_t>(n) + 1, 0);
  const int base = length / n;
  const int extra = length % n;
  for (int i = 0; i < n; ++i) off[i + 1] = off[i] + base + (i < extra ? 1 : 0);
  return off;
}

/// n*n cells in row-major order tiling the image.
inline std::vector<GrayImage> grid_cells(const GrayImage& img, GridSpec grid) {
  const int n = grid.n();
  if (img.width() < n || img.height() < n)
    throw Error(Errc::RegionTooSmall, "region smaller than grid");
  const auto xs = grid_offsets(img.width(), n);
  const auto ys = grid_offsets(img.height(), n);
  std::vector<GrayImage> cells;
  cells.reserve(static_cast<std::size_t>(grid.cells()));
  for (int gy = 0; gy < n; ++gy)
    for (int gx = 0; gx < n; ++gx)
      cells.push_back(crop(img, RegionBox{RegionId::LeftEye, xs[gx], ys[gy], xs[gx + 1], ys[gy + 1]}));
  return cells;
}

/// Fixed frontal face template for a size x size image, in the 49-point
/// layout. Used by the synthetic corpus.
inline LandmarkSet canonical_landmarks(int size) {
  const double s = size;
  std::vector<Point> p;
  p.reserve(kLandmarkCount);
  const double brow_y[5] = {0.30, 0.28, 0.27, 0.28, 0.30};
  for (int i = 0; i < 5; ++i) p.push_back({(0.20 + 0.05 * i) * s, brow_y[i] * s});
  for (int i = 0; i < 5; ++i) p.push_back({(0.60 + 0.05 * i) * s, brow_y[i] * s});
  for (int i = 0; i < 4; ++i) p.push_back({0.50 * s, (0.38 + 0.05 * i) * s});
  const double base_y[5] = {0.60, 0.61, 0.62, 0.61, 0.60};
  for (int i = 0; i < 5; ++i) p.push_back({(0.43 + 0.035 * i) * s, base_y[i] * s});
  auto eye = [&](double cx, double cy) {
    const double rx = 0.06, ry = 0.025;
    const double dx[6] = {-rx, -rx / 2, rx / 2, rx, rx / 2, -rx / 2};
    const double dy[6] = {0, -ry, -ry, 0, ry, ry};
    for (int i = 0; i < 6; ++i) p.push_back({(cx + dx[i]) * s, (cy + dy[i]) * s});
  };
  eye(0.30, 0.37);
  eye(0.70, 0.37);
  auto ring = [&](int count, double rx, double ry) {
    for (int k = 0; k < count; ++k) {
      const double t = std::numbers::pi - k * 2.0 * std::numbers::pi / count;
      p.push_back({(0.50 + rx * std::cos(t)) * s, (0.76 - ry * std::sin(t)) * s});
    }
  };
  ring(12, 0.14, 0.055);
  ring(6, 0.08, 0.02);
  return LandmarkSet(std::move(p));
}

}  // namespace rfg
