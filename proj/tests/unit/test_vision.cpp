#include "glasshands/error.hpp"
#include "glasshands/simulation.hpp"
#include "glasshands/vision.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace glasshands;
using namespace glasshands::vision;
using glasshands::sim::RenderConfig;

namespace {

// Brute-force moments of the pixel-center mask of `e`, as an independent ellipse oracle.
Ellipse mask_moments_oracle(const Ellipse& e, int w, int h) {
  double n = 0, sx = 0, sy = 0;
  std::vector<Point2> pts;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (e.contains(Point2(x, y))) pts.emplace_back(x, y);
    }
  }
  for (const auto& p : pts) {
    n += 1;
    sx += p.x();
    sy += p.y();
  }
  const Point2 m(sx / n, sy / n);
  double cxx = 0, cyy = 0;
  for (const auto& p : pts) {
    cxx += (p.x() - m.x()) * (p.x() - m.x());
    cyy += (p.y() - m.y()) * (p.y() - m.y());
  }
  cxx = cxx / n + 1.0 / 12;
  cyy = cyy / n + 1.0 / 12;
  return {m, 2 * std::sqrt(std::max(cxx, cyy)), 2 * std::sqrt(std::min(cxx, cyy)), cyy > cxx ? 90.0 : 0.0};
}

Frame bright_frame(int w, int h) {
  Frame f(w, h);
  std::fill(f.rgb.begin(), f.rgb.end(), std::uint8_t{214});
  return f;
}

// Supersampled disc painted over a frame; returns the coverage-weighted centroid.
Point2 paint_disc(Frame& f, const Point2& c, double r, const std::array<int, 3>& rgb) {
  double sw = 0, sx = 0, sy = 0;
  for (int y = int(c.y() - r) - 1; y <= int(c.y() + r) + 1; ++y) {
    for (int x = int(c.x() - r) - 1; x <= int(c.x() + r) + 1; ++x) {
      int hits = 0;
      for (int k = 0; k < 64; ++k) {
        const double px = x - 0.5 + (k % 8 + 0.5) / 8, py = y - 0.5 + (k / 8 + 0.5) / 8;
        hits += (Point2(px, py) - c).squaredNorm() <= r * r;
      }
      if (!hits) continue;
      const double w = hits / 64.0;
      auto* p = f.pixel(x, y);
      for (int k = 0; k < 3; ++k) p[k] = std::uint8_t(std::lround(w * rgb[k] + (1 - w) * p[k]));
      sw += w;
      sx += w * x;
      sy += w * y;
    }
  }
  return {sx / sw, sy / sw};
}

Frame dark_lens_fixture(const Ellipse& lens) {
  Frame f = bright_frame(640, 480);
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      if (lens.contains(Point2(x, y))) {
        auto* p = f.pixel(x, y);
        p[0] = 40;
        p[1] = 40;
        p[2] = 46;
      }
    }
  }
  return f;
}

Point2 default_lens_center() {
  return sim::render_frame(sim::default_scene(), RenderConfig{}).truth.lens.center;
}

}  // namespace

TEST(DetectLens, RenderedLensMatchesMomentOracle) {
  RenderConfig cfg;
  cfg.lens_size_px = Point2(130, 170);
  cfg.lens_offset_px = Point2(300, 200) - default_lens_center();
  const auto r = sim::render_frame(sim::default_scene(), cfg);
  const Ellipse oracle = mask_moments_oracle(r.truth.lens, cfg.width, cfg.height);
  const auto found = detect_lens_regions(r.frame);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_LE((found[0].center - Point2(300, 200)).norm(), 1.0);
  EXPECT_LE((found[0].center - oracle.center).norm(), 0.05);
  EXPECT_NEAR(found[0].a, 85.0, 0.03 * 85.0);
  EXPECT_NEAR(found[0].b, 65.0, 0.03 * 65.0);
  // Anti-aliased boundary pixels move the thresholded mask slightly off the pixel-center mask.
  EXPECT_NEAR(found[0].a, oracle.a, 0.1);
  EXPECT_NEAR(found[0].b, oracle.b, 0.1);
  EXPECT_NEAR(found[0].rotation_deg, 90.0, 1e-6);
}

TEST(DetectLens, UniformBrightFrameIsEmpty) {
  EXPECT_TRUE(detect_lens_regions(bright_frame(320, 240)).empty());
}

TEST(DetectLens, TwoLensesLargestFirst) {
  RenderConfig small, big;
  small.lens_size_px = Point2(100, 120);
  small.lens_offset_px = Point2(-300, 0);
  big.lens_offset_px = Point2(250, 0);
  const auto s = sim::default_scene();
  const auto a = sim::render_frame(s, small);
  const auto b = sim::render_frame(s, big);
  Frame both = a.frame;
  for (size_t i = 0; i < both.rgb.size(); ++i) both.rgb[i] = std::min(a.frame.rgb[i], b.frame.rgb[i]);
  const auto found = detect_lens_regions(both);
  ASSERT_EQ(found.size(), 2u);
  EXPECT_LE((found[0].center - b.truth.lens.center).norm(), 1.0);
  EXPECT_LE((found[1].center - a.truth.lens.center).norm(), 1.0);
}

TEST(DetectLens, SmallDarkSpotsIgnored) {
  Frame f = bright_frame(200, 200);
  paint_disc(f, Point2(100, 100), 10.0, {20, 20, 20});
  EXPECT_TRUE(detect_lens_regions(f).empty());
}

TEST(DetectLens, TranslationEquivariant) {
  const auto s = sim::default_scene();
  RenderConfig base;
  const auto c0 = detect_lens_regions(sim::render_frame(s, base).frame).at(0).center;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-200.0, 200.0);
  for (int i = 0; i < 10; ++i) {
    RenderConfig shifted;
    shifted.lens_offset_px = Point2(std::round(u(rng)), std::round(u(rng) / 2));
    const auto c1 = detect_lens_regions(sim::render_frame(s, shifted).frame).at(0).center;
    EXPECT_LE((c1 - c0 - shifted.lens_offset_px).norm(), 0.5);
  }
}

TEST(DetectLens, RejectsCorruptFrame) {
  Frame f(10, 10);
  f.rgb.pop_back();
  EXPECT_THROW(detect_lens_regions(f), Error);
}

TEST(ColorBlobs, GreenDiscCentroid) {
  const Ellipse lens{Point2(340, 215), 85, 65, 90};
  Frame f = dark_lens_fixture(lens);
  const Point2 oracle = paint_disc(f, Point2(340, 215), 5.0, {25, 125, 25});
  const auto blobs = detect_color_blobs(f, lens, BlobClass::Hand);
  ASSERT_EQ(blobs.size(), 1u);
  EXPECT_EQ(blobs[0].cls, BlobClass::Hand);
  EXPECT_LE((blobs[0].centroid - oracle).norm(), 0.75);
  EXPECT_NEAR(blobs[0].radius, 5.0, 0.5);
  EXPECT_GT(blobs[0].confidence, 0.6);
  EXPECT_LE(blobs[0].confidence, 1.0);
}

TEST(ColorBlobs, NoRedMeansNoPhone) {
  const Ellipse lens{Point2(340, 215), 85, 65, 90};
  Frame f = dark_lens_fixture(lens);
  paint_disc(f, Point2(340, 215), 5.0, {25, 125, 25});
  EXPECT_TRUE(detect_color_blobs(f, lens, BlobClass::Phone).empty());
}

TEST(ColorBlobs, TwoDiscsTwoBlobs) {
  const Ellipse lens{Point2(340, 215), 85, 65, 90};
  Frame f = dark_lens_fixture(lens);
  const Point2 a = paint_disc(f, Point2(330, 215), 5.0, {25, 125, 25});
  const Point2 b = paint_disc(f, Point2(350, 215), 4.0, {25, 125, 25});
  const auto blobs = detect_color_blobs(f, lens, BlobClass::Hand);
  ASSERT_EQ(blobs.size(), 2u);
  EXPECT_LE((blobs[0].centroid - a).norm(), 1.0);
  EXPECT_LE((blobs[1].centroid - b).norm(), 1.0);
}

TEST(ColorBlobs, OutsideRoiIgnored) {
  const Ellipse lens{Point2(340, 215), 40, 30, 0};
  Frame f = dark_lens_fixture(lens);
  paint_disc(f, Point2(500, 215), 5.0, {25, 125, 25});
  EXPECT_TRUE(detect_color_blobs(f, lens, BlobClass::Hand).empty());
}

TEST(ColorBlobs, TiesBrokenByLeftmost) {
  const Ellipse lens{Point2(340, 215), 85, 65, 90};
  Frame f = dark_lens_fixture(lens);
  for (int x : {350, 320}) {
    for (int y = 210; y < 214; ++y) {
      for (int dx = 0; dx < 4; ++dx) {
        auto* p = f.pixel(x + dx, y);
        p[0] = 25;
        p[1] = 125;
        p[2] = 25;
      }
    }
  }
  const auto blobs = detect_color_blobs(f, lens, BlobClass::Hand);
  ASSERT_EQ(blobs.size(), 2u);
  EXPECT_LT(blobs[0].centroid.x(), blobs[1].centroid.x());
}

TEST(Detect, NoiseFreeMatchesSidecar) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ux(-28.0, 28.0), uy(-38.0, 38.0);
  for (int i = 0; i < 50; ++i) {
    auto s = sim::default_scene();
    do {
      s.hand_cm = Point2(ux(rng), uy(rng));
    } while ((s.hand_cm.cwiseAbs() - Point2(5.5, 9)).maxCoeff() < 0 ||
             s.hand_cm.cwiseQuotient(Point2(30.0, 40.0)).squaredNorm() > 1.0);
    const auto r = sim::render_frame(s, RenderConfig{});
    const auto d = detect(r.frame);
    ASSERT_TRUE(d.hand && d.phone && d.lens);
    EXPECT_TRUE(d.well_formed());
    EXPECT_LE((d.hand->centroid - *r.truth.hand_px).norm(), 0.75) << s.hand_cm.transpose();
    EXPECT_LE((d.phone->centroid - r.truth.phone_px).norm(), 0.75);
  }
}

TEST(Detect, NoisyCentroidWithinBound) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> ux(-28.0, 28.0), uy(-38.0, 38.0);
  RenderConfig cfg;
  cfg.noise_sigma = 8.0;
  int within = 0;
  const int frames = 500;
  for (int i = 0; i < frames; ++i) {
    auto s = sim::default_scene();
    do {
      s.hand_cm = Point2(ux(rng), uy(rng));
    } while ((s.hand_cm.cwiseAbs() - Point2(5.5, 9)).maxCoeff() < 0 ||
             s.hand_cm.cwiseQuotient(Point2(30.0, 40.0)).squaredNorm() > 1.0);
    cfg.seed = 1000 + i;
    const auto r = sim::render_frame(s, cfg);
    const auto d = detect(r.frame);
    EXPECT_TRUE(d.well_formed());
    if (d.hand && (d.hand->centroid - *r.truth.hand_px).norm() <= 1.5) ++within;
  }
  EXPECT_GE(within, 475);
}

TEST(Detect, NoLensNoBlobs) {
  const auto d = detect(bright_frame(320, 240));
  EXPECT_FALSE(d.lens);
  EXPECT_FALSE(d.hand);
  EXPECT_TRUE(d.well_formed());
}

TEST(Masks, MatchDetections) {
  const auto r = sim::render_frame(sim::default_scene(), RenderConfig{});
  const auto m = lens_mask(r.frame);
  long set = std::count(m.data.begin(), m.data.end(), 255);
  EXPECT_NEAR(set, 3.14159 * 85 * 65, 200);
  const auto d = detect(r.frame);
  const auto hm = class_mask(r.frame, *d.lens, BlobClass::Hand);
  EXPECT_EQ(std::count(hm.data.begin(), hm.data.end(), 255), long(d.hand->area));
}

TEST(Track, Examples) {
  TrackState s;
  s.cfg.alpha = 1.0;
  s.position = Point2(3, 3);
  EXPECT_TRUE(track(s, Point2(50, 60), 0).position->isApprox(Point2(50, 60)));

  TrackState h;
  h.cfg.alpha = 0.5;
  h.position = Point2(0, 0);
  EXPECT_NEAR(track(h, Point2(10, 0), 0).position->x(), 5.0, 1e-12);

  TrackState first;
  EXPECT_TRUE(track(first, Point2(7, 8), 0).position->isApprox(Point2(7, 8)));
}

TEST(Track, HoldsThenResetsAfterMisses) {
  TrackState s;
  s.cfg.reset_after_misses = 5;
  auto u = track(s, Point2(1, 2), 0);
  for (int i = 1; i <= 5; ++i) {
    u = track(u.state, std::nullopt, i * 33);
    ASSERT_TRUE(u.position) << i;
    EXPECT_TRUE(u.position->isApprox(Point2(1, 2)));
  }
  u = track(u.state, std::nullopt, 6 * 33);
  EXPECT_FALSE(u.position);
  EXPECT_FALSE(u.state.position);
  EXPECT_GE(u.state.misses, 0);
}

TEST(Track, RejectsBadAlpha) {
  TrackState s;
  s.cfg.alpha = 0.0;
  EXPECT_THROW(track(s, Point2(0, 0), 0), Error);
  s.cfg.alpha = 1.5;
  EXPECT_THROW(track(s, Point2(0, 0), 0), Error);
}

TEST(Track, FilteredVarianceBelowRaw) {
  for (double alpha : {0.1, 0.4, 0.7, 0.99}) {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> n(0.0, 1.0);
    TrackState s;
    s.cfg.alpha = alpha;
    double raw = 0, filt = 0;
    const int frames = 2000;
    for (int i = 0; i < frames; ++i) {
      const Point2 m(5 + n(rng), -2 + n(rng));
      const auto u = track(s, m, i);
      s = u.state;
      raw += (m - Point2(5, -2)).squaredNorm();
      filt += (*u.position - Point2(5, -2)).squaredNorm();
    }
    EXPECT_LE(filt, raw) << alpha;
  }
}
