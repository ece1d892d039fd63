#pragma once

// 8-bit grayscale raster plus Netpbm reading/writing.

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "rfg/error.hpp"

namespace rfg {

class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height),
        pixels_(static_cast<std::size_t>(checked_area(width, height)), fill) {}
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != static_cast<std::size_t>(checked_area(width, height)))
      throw Error(Errc::InvalidArgument, "pixel buffer does not match image size");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t operator()(int x, int y) const { return pixels_[index(x, y)]; }
  std::uint8_t& operator()(int x, int y) { return pixels_[index(x, y)]; }

  const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  static long checked_area(int w, int h) {
    if (w < 0 || h < 0) throw Error(Errc::InvalidArgument, "negative image size");
    return static_cast<long>(w) * h;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// ITU-R BT.601 luma, rounded half-up, in exact integer arithmetic.
constexpr std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

namespace detail {

class NetpbmReader {
 public:
  NetpbmReader(const std::vector<unsigned char>& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  // Header integer, skipping whitespace and '#' comments.
  int header_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) corrupt("bad header");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1L << 30)) corrupt("header value too large");
    }
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates the header from binary data.
  void end_of_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) corrupt("bad header");
    ++pos_;
  }

  std::uint8_t raw_byte() {
    if (pos_ >= bytes_.size()) corrupt("truncated pixel data");
    return bytes_[pos_++];
  }

  int ascii_value(int maxval) {
    const int v = header_int();
    if (v > maxval) corrupt("sample exceeds maxval");
    return v;
  }

  [[noreturn]] void corrupt(const std::string& why) const {
    throw Error(Errc::CorruptImage, path_ + ": " + why);
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  const std::string& path_;
  std::size_t pos_ = 2;
};

inline std::uint8_t rescale_sample(int v, int maxval) {
  if (maxval == 255) return static_cast<std::uint8_t>(v);
  return static_cast<std::uint8_t>((v * 255 * 2 + maxval) / (2 * maxval));
}

}  // namespace detail

/// Loads a grayscale image. Supports PGM (P2/P5) directly and PPM (P3/P6)
/// through luma conversion; maxval up to 255.
inline GrayImage load_gray_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 2 || bytes[0] != 'P')
    throw Error(Errc::UnsupportedFormat, name + ": not a Netpbm file");
  const char kind = static_cast<char>(bytes[1]);
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6')
    throw Error(Errc::UnsupportedFormat, name + ": unsupported Netpbm variant P" + std::string(1, kind));

  detail::NetpbmReader rd(bytes, name);
  const int w = rd.header_int();
  const int h = rd.header_int();
  const int maxval = rd.header_int();
  if (w <= 0 || h <= 0) rd.corrupt("non-positive dimensions");
  if (maxval <= 0) rd.corrupt("bad maxval");
  if (maxval > 255) throw Error(Errc::UnsupportedFormat, name + ": 16-bit samples");
  const bool binary = kind == '5' || kind == '6';
  const bool color = kind == '3' || kind == '6';
  if (binary) rd.end_of_header();

  auto sample = [&]() -> std::uint8_t {
    const int v = binary ? rd.raw_byte() : rd.ascii_value(maxval);
    if (v > maxval) rd.corrupt("sample exceeds maxval");
    return detail::rescale_sample(v, maxval);
  };

  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (color) {
        const auto r = sample();
        const auto g = sample();
        const auto b = sample();
        img(x, y) = luma(r, g, b);
      } else {
        img(x, y) = sample();
      }
    }
  return img;
}

/// Writes binary PGM (P5).
inline void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels().data()),
            static_cast<std::streamsize>(img.pixels().size()));
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

}  // namespace rfg
