#pragma once

// LBP codes, uniform-pattern histograms, Kirsch compass responses and the
// compass-LBP region descriptor.

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rfg/error.hpp"
#include "rfg/image.hpp"
#include "rfg/regions.hpp"

namespace rfg {

using LbpCode = std::uint8_t;

/// Window offsets (dx, dy) of the eight neighbours, clockwise from the
/// top-left. Neighbour p contributes bit p (weight 2^p).
inline constexpr std::array<std::array<int, 2>, 8> kLbpNeighbours = {{
    {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}}};

/// `window` is a 3x3 block in row-major order; index 4 is the centre.
/// Bit p is set iff neighbour p >= centre.
inline LbpCode lbp_code(const std::array<int, 9>& window) {
  const int c = window[4];
  unsigned code = 0;
  for (unsigned p = 0; p < 8; ++p) {
    const auto [dx, dy] = kLbpNeighbours[p];
    if (window[static_cast<std::size_t>((dy + 1) * 3 + (dx + 1))] >= c) code |= 1u << p;
  }
  return static_cast<LbpCode>(code);
}

/// Bits of a code in neighbour order (bit 0 first), i.e. as read clockwise
/// from the top-left neighbour.
inline std::string lbp_bits_clockwise(LbpCode code) {
  std::string s(8, '0');
  for (int p = 0; p < 8; ++p)
    if (code & (1u << p)) s[static_cast<std::size_t>(p)] = '1';
  return s;
}

/// Codes for every interior pixel; the result is (w-2) x (h-2).
inline GrayImage lbp_image(const GrayImage& img) {
  if (img.width() < 3 || img.height() < 3)
    throw Error(Errc::ImageTooSmall, "LBP needs at least a 3x3 image");
  GrayImage codes(img.width() - 2, img.height() - 2);
  for (int y = 1; y + 1 < img.height(); ++y)
    for (int x = 1; x + 1 < img.width(); ++x) {
      const int c = img(x, y);
      unsigned code = 0;
      for (unsigned p = 0; p < 8; ++p) {
        const auto [dx, dy] = kLbpNeighbours[p];
        if (img(x + dx, y + dy) >= c) code |= 1u << p;
      }
      codes(x - 1, y - 1) = static_cast<std::uint8_t>(code);
    }
  return codes;
}

/// Number of circular 0/1 transitions in an 8-bit pattern.
constexpr int lbp_transitions(unsigned code) {
  const unsigned rotated = ((code >> 1) | (code << 7)) & 0xFFu;
  return std::popcount((code ^ rotated) & 0xFFu);
}

inline constexpr int kUniformBins = 59;
inline constexpr int kFullBins = 256;

struct UniformMap {
  std::array<std::uint8_t, 256> bin{};
  int uniform_count = 0;
  int bins = kUniformBins;
};

/// Uniform codes (at most two transitions) get bins 0..57 in ascending code
/// order; every other code shares bin 58.
inline const UniformMap& uniform_map() {
  static const UniformMap map = [] {
    UniformMap m;
    int next = 0;
    for (unsigned code = 0; code < 256; ++code)
      if (lbp_transitions(code) <= 2) m.bin[code] = static_cast<std::uint8_t>(next++);
    m.uniform_count = next;
    for (unsigned code = 0; code < 256; ++code)
      if (lbp_transitions(code) > 2) m.bin[code] = static_cast<std::uint8_t>(next);
    m.bins = next + 1;
    return m;
  }();
  return map;
}

enum class CompassDirection { North, NorthEast, East, SouthEast, South, SouthWest, West, NorthWest };

inline const char* direction_name(CompassDirection d) {
  static constexpr const char* names[] = {"N", "NE", "E", "SE", "S", "SW", "W", "NW"};
  return names[static_cast<int>(d)];
}

struct KirschMask {
  CompassDirection direction = CompassDirection::North;
  std::array<int, 9> coefficients{};  // row-major 3x3
};

/// The eight Kirsch masks. North has (5,5,5) on the top row; each next
/// direction rotates the outer ring one step clockwise.
inline std::array<KirschMask, 8> kirsch_masks() {
  // Outer ring positions (row-major indices) clockwise from top-left.
  static constexpr std::array<int, 8> ring = {0, 1, 2, 5, 8, 7, 6, 3};
  static constexpr std::array<int, 8> north = {5, 5, 5, -3, -3, -3, -3, -3};
  std::array<KirschMask, 8> masks{};
  for (int d = 0; d < 8; ++d) {
    masks[d].direction = static_cast<CompassDirection>(d);
    for (int k = 0; k < 8; ++k) masks[d].coefficients[ring[(k + d) % 8]] = north[k];
    masks[d].coefficients[4] = 0;
  }
  return masks;
}

struct EdgeResponse {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> values;  // row-major

  std::int32_t operator()(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

/// Correlation (no mask flip) with replicate padding; output has the input size.
inline EdgeResponse convolve_edge_response(const GrayImage& img, const KirschMask& mask) {
  if (img.width() < 3 || img.height() < 3)
    throw Error(Errc::ImageTooSmall, "edge response needs at least a 3x3 image");
  const int w = img.width(), h = img.height();
  EdgeResponse out{w, h, std::vector<std::int32_t>(static_cast<std::size_t>(w) * h)};
  for (int y = 0; y < h; ++y) {
    const int rows[3] = {std::max(y - 1, 0), y, std::min(y + 1, h - 1)};
    for (int x = 0; x < w; ++x) {
      const int cols[3] = {std::max(x - 1, 0), x, std::min(x + 1, w - 1)};
      std::int32_t acc = 0;
      for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) acc += mask.coefficients[j * 3 + i] * img(cols[i], rows[j]);
      out.values[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

/// Affine min/max rescale into [0, 255], rounded half-up in integer
/// arithmetic. A constant response maps to all zeros.
inline GrayImage rescale_response(const EdgeResponse& r) {
  GrayImage out(r.width, r.height);
  if (r.values.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(r.values.begin(), r.values.end());
  const std::int64_t lo = *lo_it, span = static_cast<std::int64_t>(*hi_it) - lo;
  if (span == 0) return out;
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      const std::int64_t v = r(x, y) - lo;
      out(x, y) = static_cast<std::uint8_t>((v * 510 + span) / (2 * span));
    }
  return out;
}

enum class HistogramMode { Uniform, Full };

inline int histogram_bins(HistogramMode mode) {
  return mode == HistogramMode::Uniform ? kUniformBins : kFullBins;
}

inline std::size_t descriptor_length(GridSpec grid, HistogramMode mode = HistogramMode::Uniform) {
  return static_cast<std::size_t>(grid.cells()) * 8 * static_cast<std::size_t>(histogram_bins(mode));
}

/// Compass-LBP descriptor of one region image. For each Kirsch direction the
/// rescaled response is LBP-coded, the code image is split into n x n cells
/// and each cell yields an L1-normalised histogram. Layout is cell-major,
/// direction-minor: values[(cell * 8 + direction) * bins + bin].
inline std::vector<double> colbp_descriptor(const GrayImage& region, GridSpec grid,
                                            HistogramMode mode = HistogramMode::Uniform) {
  const int n = grid.n();
  if (region.width() < 3 * n || region.height() < 3 * n)
    throw Error(Errc::RegionTooSmall,
                "region " + std::to_string(region.width()) + "x" + std::to_string(region.height()) +
                    " too small for a " + std::to_string(n) + "x" + std::to_string(n) + " grid");
  const int bins = histogram_bins(mode);
  const auto& umap = uniform_map();
  std::vector<double> values(descriptor_length(grid, mode), 0.0);
  const auto masks = kirsch_masks();
  for (int d = 0; d < 8; ++d) {
    const GrayImage codes = lbp_image(rescale_response(convolve_edge_response(region, masks[d])));
    const auto xs = grid_offsets(codes.width(), n);
    const auto ys = grid_offsets(codes.height(), n);
    for (int gy = 0; gy < n; ++gy)
      for (int gx = 0; gx < n; ++gx) {
        const int cell = gy * n + gx;
        double* hist = values.data() + (static_cast<std::size_t>(cell) * 8 + d) * bins;
        std::vector<std::uint32_t> counts(static_cast<std::size_t>(bins), 0);
        for (int y = ys[gy]; y < ys[gy + 1]; ++y)
          for (int x = xs[gx]; x < xs[gx + 1]; ++x) {
            const auto code = codes(x, y);
            ++counts[mode == HistogramMode::Uniform ? umap.bin[code] : code];
          }
        const double total = static_cast<double>((xs[gx + 1] - xs[gx]) * (ys[gy + 1] - ys[gy]));
        for (int b = 0; b < bins; ++b) hist[b] = counts[static_cast<std::size_t>(b)] / total;
      }
  }
  return values;
}

}  // namespace rfg
