#include <gtest/gtest.h>

#include <numeric>

#include "rfg/regions.hpp"
#include "support.hpp"

using namespace rfg;
using rfg::test::TempDir;

namespace {

std::string landmark_text(const LandmarkSet& lm) {
  std::string s;
  for (const auto& p : lm.points()) s += std::to_string(p.x) + " " + std::to_string(p.y) + "\n";
  return s;
}

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::InvalidArgument;
}

double center_x(const RegionBox& b) { return 0.5 * (b.x0 + b.x1); }

// Mirror x -> width - x and swap left/right index groups so that the point
// semantics follow the mirror.
LandmarkSet mirror(const LandmarkSet& lm, double width) {
  std::vector<int> perm(kLandmarkCount);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 0; i < 5; ++i) std::swap(perm[i], perm[9 - i]);  // brows, outer to inner reversed
  for (int i = 0; i < 6; ++i) perm[19 + i] = 25 + i, perm[25 + i] = 19 + i;
  std::vector<Point> pts(kLandmarkCount);
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    const Point p = lm[static_cast<std::size_t>(perm[i])];
    pts[i] = {width - p.x, p.y};
  }
  return LandmarkSet(pts);
}

}  // namespace

TEST(Landmarks, LoadInOrder) {
  TempDir dir("lm");
  const LandmarkSet lm = canonical_landmarks(100);
  test::write_file(dir / "a.txt", landmark_text(lm) + "\n");
  const LandmarkSet back = load_landmarks(dir / "a.txt");
  ASSERT_EQ(back.size(), 49u);
  for (std::size_t i = 0; i < 49; ++i) {
    EXPECT_NEAR(back[i].x, lm[i].x, 1e-6);
    EXPECT_NEAR(back[i].y, lm[i].y, 1e-6);
  }
}

TEST(Landmarks, WrongCountReportsFound) {
  TempDir dir("lm");
  std::string text;
  for (int i = 0; i < 48; ++i) text += "1 2\n";
  test::write_file(dir / "a.txt", text);
  try {
    load_landmarks(dir / "a.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::WrongPointCount);
    EXPECT_EQ(e.detail(), 48);
  }
}

TEST(Landmarks, ParseErrorReportsLine) {
  TempDir dir("lm");
  std::string text;
  for (int i = 1; i <= 49; ++i) text += (i == 7 ? "1.5 abc\n" : "1 2\n");
  test::write_file(dir / "a.txt", text);
  try {
    load_landmarks(dir / "a.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_EQ(e.detail(), 7);
  }
  EXPECT_EQ(error_of([&] { load_landmarks(dir / "nope.txt"); }), Errc::MissingFile);
}

TEST(Regions, TenNamedRegionsInOrder) {
  ASSERT_EQ(kAllRegions.size(), 10u);
  for (std::size_t i = 0; i < kAllRegions.size(); ++i) EXPECT_EQ(region_index(kAllRegions[i]), static_cast<int>(i));
  EXPECT_STREQ(region_name(RegionId::LeftEye), "left_eye");
  EXPECT_STREQ(region_name(RegionId::RightFace), "right_face");
}

TEST(Regions, CanonicalTemplateGeometry) {
  const GrayImage img(96, 96);
  const auto boxes = extract_region_boxes(canonical_landmarks(96), img);
  const auto& le = boxes[region_index(RegionId::LeftEye)];
  const auto& re = boxes[region_index(RegionId::RightEye)];
  EXPECT_LT(center_x(le), center_x(re));
  EXPECT_LE(le.x1, re.x0 + 1);
  const auto& ce = boxes[region_index(RegionId::CompleteEye)];
  EXPECT_LE(ce.x0, le.x0);
  EXPECT_GE(ce.x1, re.x1);
  const auto& fh = boxes[region_index(RegionId::Forehead)];
  EXPECT_LT(fh.y0, le.y0);
  const auto& lip = boxes[region_index(RegionId::Lip)];
  const auto& nose = boxes[region_index(RegionId::Nose)];
  EXPECT_GT(lip.y0, le.y1);
  EXPECT_LT(nose.y0, lip.y0);
  for (const auto& b : boxes) {
    EXPECT_GT(b.width(), 0);
    EXPECT_GT(b.height(), 0);
    EXPECT_GE(b.x0, 0);
    EXPECT_LE(b.x1, 96);
  }
}

TEST(Regions, MirroredLandmarksSwapFaceHalves) {
  const double w = 120.0;
  const LandmarkSet lm = canonical_landmarks(120);
  const GrayImage img(120, 120);
  const auto a = extract_region_boxes(lm, img);
  const auto b = extract_region_boxes(mirror(lm, w), img);
  auto mirrored = [&](const RegionBox& box) {
    return std::pair{static_cast<int>(w) - box.x1, static_cast<int>(w) - box.x0};
  };
  const auto& lf = a[region_index(RegionId::LeftFace)];
  const auto& rf = b[region_index(RegionId::RightFace)];
  EXPECT_EQ(mirrored(lf), std::pair(rf.x0, rf.x1));
  EXPECT_EQ(lf.y0, rf.y0);
  EXPECT_EQ(lf.y1, rf.y1);
  const auto& rf0 = a[region_index(RegionId::RightFace)];
  const auto& lf1 = b[region_index(RegionId::LeftFace)];
  EXPECT_EQ(mirrored(rf0), std::pair(lf1.x0, lf1.x1));
  const auto& le = a[region_index(RegionId::LeftEye)];
  const auto& re = b[region_index(RegionId::RightEye)];
  EXPECT_EQ(mirrored(le), std::pair(re.x0, re.x1));
}

TEST(Regions, CollapsedLandmarksAreDegenerate) {
  std::vector<Point> pts(49, Point{-500.0, -500.0});
  const GrayImage img(64, 64);
  EXPECT_EQ(error_of([&] { extract_region_boxes(LandmarkSet(pts), img); }), Errc::DegenerateRegion);
}

TEST(Regions, TranslationEquivariantBeforeClipping) {
  const LandmarkSet lm = canonical_landmarks(100);
  for (auto [dx, dy] : {std::pair{3, 5}, std::pair{-7, 11}, std::pair{20, -4}}) {
    std::vector<Point> pts = lm.points();
    for (auto& p : pts) p = {p.x + dx, p.y + dy};
    const auto a = unclipped_region_boxes(lm);
    const auto b = unclipped_region_boxes(LandmarkSet(pts));
    for (std::size_t r = 0; r < kRegionCount; ++r) {
      EXPECT_EQ(b[r].x0, a[r].x0 + dx);
      EXPECT_EQ(b[r].x1, a[r].x1 + dx);
      EXPECT_EQ(b[r].y0, a[r].y0 + dy);
      EXPECT_EQ(b[r].y1, a[r].y1 + dy);
    }
  }
}

TEST(Crop, IdentityPixelAndBounds) {
  Rng rng(1);
  const GrayImage img = test::random_image(rng, 10, 7);
  EXPECT_EQ(crop(img, RegionBox{RegionId::Lip, 0, 0, 10, 7}), img);
  const GrayImage one = crop(img, RegionBox{RegionId::Lip, 4, 3, 5, 4});
  ASSERT_EQ(one.width(), 1);
  EXPECT_EQ(one(0, 0), img(4, 3));
  EXPECT_EQ(error_of([&] { crop(img, RegionBox{RegionId::Lip, 2, 0, 11, 7}); }), Errc::OutOfBounds);
}

TEST(Grid, ExactAndRemainderSplits) {
  const auto eight = grid_cells(GrayImage(8, 8), GridSpec(2));
  ASSERT_EQ(eight.size(), 4u);
  for (const auto& c : eight) {
    EXPECT_EQ(c.width(), 4);
    EXPECT_EQ(c.height(), 4);
  }
  const auto nine = grid_cells(GrayImage(9, 9), GridSpec(2));
  EXPECT_EQ(nine[0].width(), 5);
  EXPECT_EQ(nine[1].width(), 4);
  EXPECT_EQ(nine[0].height(), 5);
  EXPECT_EQ(nine[2].height(), 4);
  EXPECT_EQ(error_of([] { grid_cells(GrayImage(3, 3), GridSpec(4)); }), Errc::RegionTooSmall);
  EXPECT_EQ(error_of([] { GridSpec(5); }), Errc::InvalidArgument);
}

TEST(Grid, CellsPartitionTheRegion) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(3));
    const int w = n + static_cast<int>(rng.below(40)), h = n + static_cast<int>(rng.below(40));
    const GrayImage img = test::random_image(rng, w, h);
    const auto cells = grid_cells(img, GridSpec(n));
    ASSERT_EQ(cells.size(), static_cast<std::size_t>(n * n));
    long area = 0;
    for (const auto& c : cells) area += static_cast<long>(c.width()) * c.height();
    EXPECT_EQ(area, static_cast<long>(w) * h);
    // Reassemble and compare pixel by pixel.
    const auto xs = grid_offsets(w, n), ys = grid_offsets(h, n);
    for (int gy = 0; gy < n; ++gy)
      for (int gx = 0; gx < n; ++gx) {
        const auto& c = cells[static_cast<std::size_t>(gy * n + gx)];
        const int cw = w / n, ch = h / n;
        EXPECT_TRUE(c.width() == cw || c.width() == cw + 1);
        EXPECT_TRUE(c.height() == ch || c.height() == ch + 1);
        for (int y = 0; y < c.height(); ++y)
          for (int x = 0; x < c.width(); ++x) ASSERT_EQ(c(x, y), img(xs[gx] + x, ys[gy] + y));
      }
  }
}
