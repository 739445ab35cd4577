#include "glasshands/calibration.hpp"
#include "glasshands/error.hpp"
#include "glasshands/simulation.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <random>

using namespace glasshands;
using namespace glasshands::calib;
using geometry::apply_homography;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

// Exact correspondences through the renderer's own projection chain.
CorrespondenceSet synthetic_pairs(const sim::SceneState& s, const std::vector<Point2>& ws_cm) {
  const auto h = sim::workspace_to_image(s);
  CorrespondenceSet set;
  for (const auto& w : ws_cm) {
    set.pairs.push_back({apply_homography(h, s.phone_center_cm + w), w, CorrespondenceSource::Synthetic});
  }
  set.anchor_px = apply_homography(h, s.phone_center_cm);
  return set;
}

const std::vector<Point2> kEightPoints{{-20, -30}, {20, -30}, {20, 30}, {-20, 30},
                                       {0, -35},   {25, 0},   {0, 35},  {-25, 0}};

sim::SceneState scene_with_hand(const Point2& hand) {
  auto s = sim::default_scene();
  s.hand_cm = hand;
  return s;
}

}  // namespace

TEST(RunCalibration, EightExactPairsFromDefaultScene) {
  const auto s = sim::default_scene();
  const auto m = run_calibration(synthetic_pairs(s, kEightPoints));
  EXPECT_LT(m.rms_cm, 1e-6);
  EXPECT_NEAR(m.scale_cm_per_px.x(), 0.5, 0.025);
  EXPECT_NEAR(m.scale_cm_per_px.y(), 0.5, 0.025);
  EXPECT_GE(m.scale_cm_per_px.x(), m.scale_cm_per_px.y());
}

TEST(RunCalibration, SquareToDoubledSquare) {
  CorrespondenceSet set;
  for (const auto& p : {Point2(0, 0), Point2(1, 0), Point2(1, 1), Point2(0, 1)}) {
    set.pairs.push_back({p, 2.0 * p, CorrespondenceSource::Synthetic});
  }
  const auto m = run_calibration(set);
  EXPECT_NEAR(m.scale_cm_per_px.x(), 2.0, 1e-9);
  EXPECT_NEAR(m.scale_cm_per_px.y(), 2.0, 1e-9);
}

TEST(RunCalibration, ThreePairsInsufficient) {
  CorrespondenceSet set;
  for (const auto& p : {Point2(0, 0), Point2(1, 0), Point2(1, 1)}) set.pairs.push_back({p, p});
  EXPECT_EQ(code_of([&] { run_calibration(set); }), ErrorCode::InsufficientCorrespondences);
}

TEST(RunCalibration, CollinearDegenerate) {
  CorrespondenceSet set;
  for (int i = 0; i < 5; ++i) set.pairs.push_back({Point2(i, i), Point2(2 * i, 0)});
  EXPECT_EQ(code_of([&] { run_calibration(set); }), ErrorCode::DegenerateConfiguration);
}

TEST(RunCalibration, NonFiniteRejected) {
  CorrespondenceSet set;
  for (const auto& p : {Point2(0, 0), Point2(1, 0), Point2(1, 1), Point2(0, 1)}) set.pairs.push_back({p, p});
  set.pairs[2].image_px.x() = std::nan("");
  EXPECT_EQ(code_of([&] { run_calibration(set); }), ErrorCode::InvalidArgument);
}

TEST(MapToWorkspace, AnchorMapsToOrigin) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    auto s = sim::default_scene();
    s.phone_center_cm = Point2(u(rng), u(rng));
    const auto set = synthetic_pairs(s, kEightPoints);
    const auto m = run_calibration(set);
    EXPECT_LE(map_to_workspace(m, *set.anchor_px).norm(), 1e-9);
  }
}

TEST(MapToWorkspace, AffineHalfCentimetre) {
  CorrespondenceSet set;
  const Point2 center(600, 270);
  for (const auto& d : {Point2(-20, -20), Point2(20, -20), Point2(20, 20), Point2(-20, 20)}) {
    set.pairs.push_back({center + d, 0.5 * d, CorrespondenceSource::Synthetic});
  }
  set.anchor_px = center;
  const auto m = run_calibration(set);
  EXPECT_LE((map_to_workspace(m, center + Point2(10, 0)) - Point2(5, 0)).norm(), 1e-9);
  EXPECT_LE((map_to_image(m, Point2(5, 0)) - (center + Point2(10, 0))).norm(), 1e-9);
}

TEST(MapToWorkspace, DefaultAnchorIsPreimageOfOrigin) {
  auto s = sim::default_scene();
  auto set = synthetic_pairs(s, kEightPoints);
  const Point2 truth = *set.anchor_px;
  set.anchor_px.reset();
  const auto m = run_calibration(set);
  EXPECT_LE((m.anchor_px - truth).norm(), 1e-6);
}

TEST(MonotonicDegradation, RmsGrowsWithPixelNoise) {
  const auto s = sim::default_scene();
  const auto clean = synthetic_pairs(s, kEightPoints);
  std::array<double, 3> mean_rms{};
  const std::array<double, 3> sigmas{0.0, 0.5, 1.0};
  for (size_t k = 0; k < sigmas.size(); ++k) {
    std::mt19937_64 rng(100);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      auto set = clean;
      for (auto& c : set.pairs) c.image_px += sigmas[k] * Point2(n(rng), n(rng));
      set.anchor_px.reset();
      mean_rms[k] += run_calibration(set).rms_cm / 100.0;
    }
  }
  EXPECT_LE(mean_rms[0], mean_rms[1]);
  EXPECT_LE(mean_rms[1], mean_rms[2]);
}

TEST(Staleness, LensDriftBeyondTenPixels) {
  CalibrationMap m;
  EXPECT_FALSE(is_stale(m, Point2(100, 100)));
  m.lens_center_px = Point2(600, 270);
  EXPECT_FALSE(is_stale(m, Point2(610, 270)));
  EXPECT_TRUE(is_stale(m, Point2(610.5, 270)));
}

TEST(PhoneCorners, MatchSidecarNoiseFree) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double sq = 0;
  int n = 0;
  for (int i = 0; i < 20; ++i) {
    auto s = scene_with_hand(Point2(22, 10));
    s.phone_center_cm = Point2(4 * u(rng), 6 * u(rng));
    const auto r = sim::render_frame(s, sim::RenderConfig{});
    const auto corners = find_phone_corners(r.frame, vision::detect(r.frame));
    ASSERT_TRUE(corners);
    for (size_t k = 0; k < 4; ++k) {
      EXPECT_LE(((*corners)[k] - r.truth.phone_corners_px[k]).norm(), 0.5);
      sq += ((*corners)[k] - r.truth.phone_corners_px[k]).squaredNorm();
      ++n;
    }
  }
  EXPECT_LE(std::sqrt(sq / n), 0.25);
}

TEST(PhoneCorners, RoundTripHalfExtents) {
  const auto r = sim::render_frame(scene_with_hand(Point2(20, -15)), sim::RenderConfig{});
  const auto det = vision::detect(r.frame);
  const auto corners = find_phone_corners(r.frame, det);
  ASSERT_TRUE(corners);
  const auto m = calibrate_from_frame(r.frame, det);
  for (const auto& c : *corners) {
    const Point2 w = map_to_workspace(m, c);
    EXPECT_NEAR(std::abs(w.x()), 3.5, 0.02 * 3.5);
    EXPECT_NEAR(std::abs(w.y()), 7.0, 0.02 * 7.0);
  }
  // Sidecar corners through the fitted map, averaged over the four corners.
  Point2 ext = Point2::Zero();
  for (const auto& c : r.truth.phone_corners_px) ext += map_to_workspace(m, c).cwiseAbs() / 4.0;
  EXPECT_NEAR(ext.x(), 3.5, 0.02 * 3.5);
  EXPECT_NEAR(ext.y(), 7.0, 0.02 * 7.0);
}

TEST(PhoneCorners, OrientationFollowsPhoneFrame) {
  const auto r = sim::render_frame(scene_with_hand(Point2(20, -15)), sim::RenderConfig{});
  const auto m = calibrate_from_frame(r.frame, vision::detect(r.frame));
  const Point2 right = map_to_workspace(m, apply_homography(sim::workspace_to_image(sim::default_scene()), Point2(10, 0)));
  EXPECT_NEAR(right.x(), 10.0, 0.3);
  EXPECT_NEAR(right.y(), 0.0, 0.3);
}

TEST(PhoneCorners, HandNearPhoneSkipsFrame) {
  const auto r = sim::render_frame(scene_with_hand(Point2(5.0, 0)), sim::RenderConfig{});
  const auto det = vision::detect(r.frame);
  EXPECT_FALSE(find_phone_corners(r.frame, det));
  EXPECT_EQ(code_of([&] { calibrate_from_frame(r.frame, det); }), ErrorCode::CalibrationFailed);
}

TEST(PhoneCorners, NoPhoneFails) {
  const auto r = sim::render_frame(scene_with_hand(Point2(15, 0)), sim::RenderConfig{});
  auto det = vision::detect(r.frame);
  det.phone.reset();
  EXPECT_EQ(code_of([&] { calibrate_from_frame(r.frame, det); }), ErrorCode::CalibrationFailed);
}

TEST(Localization, AutoCalibratedRandomScenesNoiseFree) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double sq = 0;
  int n = 0;
  for (int session = 0; session < 4; ++session) {
    auto s = scene_with_hand(Point2(25, 0));
    s.phone_center_cm = Point2(4 * u(rng), 6 * u(rng));
    const auto r0 = sim::render_frame(s, sim::RenderConfig{});
    const auto m = calibrate_from_frame(r0.frame, vision::detect(r0.frame));
    for (int f = 0; f < 25; ++f) {
      Point2 h;
      do {
        h = Point2(30 * u(rng), 40 * u(rng));
      } while (h.cwiseQuotient(Point2(30, 40)).squaredNorm() > 1.0 ||
               ((h - s.phone_center_cm).cwiseAbs() - Point2(5.5, 9)).maxCoeff() < 0);
      s.hand_cm = h;
      const auto r = sim::render_frame(s, sim::RenderConfig{});
      const auto d = vision::detect(r.frame);
      ASSERT_TRUE(d.hand);
      sq += (map_to_workspace(m, d.hand->centroid) - (h - s.phone_center_cm)).squaredNorm();
      ++n;
    }
  }
  EXPECT_LE(std::sqrt(sq / n), 0.6);
}

TEST(Json, RoundTrip) {
  auto m = run_calibration(synthetic_pairs(sim::default_scene(), kEightPoints), 1234);
  m.lens_center_px = Point2(600, 271);
  const auto back = from_json(to_json(m));
  EXPECT_LE((back.homography.matrix() - m.homography.matrix()).norm(), 1e-12);
  EXPECT_EQ(back.created_ms, 1234);
  EXPECT_DOUBLE_EQ(back.rms_cm, m.rms_cm);
  EXPECT_TRUE(back.scale_cm_per_px.isApprox(m.scale_cm_per_px));
  ASSERT_TRUE(back.lens_center_px);
  EXPECT_TRUE(back.lens_center_px->isApprox(Point2(600, 271)));

  const auto path = std::filesystem::temp_directory_path() / "gh_calib_test.json";
  save_calibration(path, m);
  const auto loaded = load_calibration(path);
  EXPECT_LE((loaded.homography.matrix() - m.homography.matrix()).norm(), 1e-12);
  std::filesystem::remove(path);
}

TEST(Json, Errors) {
  EXPECT_EQ(code_of([] { from_json("{not json"); }), ErrorCode::CalibrationFailed);
  EXPECT_EQ(code_of([] { from_json(R"({"matrix":[1,2,3]})"); }), ErrorCode::CalibrationFailed);
  EXPECT_EQ(code_of([] { from_json(R"({"matrix":[0,0,0,0,0,0,0,0,0],"rms_cm":0,"scale_cm_per_px":[1,1],"anchor_px":[0,0]})"); }),
            ErrorCode::CalibrationFailed);
  EXPECT_EQ(code_of([] { load_calibration("/nonexistent/calibration.json"); }), ErrorCode::InputNotFound);
}
