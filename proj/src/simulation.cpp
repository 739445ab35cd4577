#include "glasshands/simulation.hpp"

#include "glasshands/error.hpp"
#include "noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace glasshands::sim {

using geometry::apply_homography;
using geometry::Homography;

void SceneState::validate() const {
  if (!(hand_height_cm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "hand height must be >= 0");
  if (!(phone_half_extents_cm.x() > 0.0 && phone_half_extents_cm.y() > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "phone extents must be positive");
  }
  if (!(hand_radius_cm > 0.0) || !(marker_radius_cm > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "marker radii must be positive");
  }
  if (!(ambient >= 0.0 && ambient <= 1.0)) throw Error(ErrorCode::InvalidArgument, "ambient must lie in [0, 1]");
  const Point2 lo = workspace_center_cm - 0.5 * workspace_size_cm;
  const Point2 hi = workspace_center_cm + 0.5 * workspace_size_cm;
  const Point2 plo = phone_center_cm - phone_half_extents_cm;
  const Point2 phi = phone_center_cm + phone_half_extents_cm;
  if (plo.x() < lo.x() || plo.y() < lo.y() || phi.x() > hi.x() || phi.y() > hi.y()) {
    throw Error(ErrorCode::InvalidArgument, "workspace bounds must contain the phone footprint");
  }
  camera.validate();
}

SceneState default_scene() {
  SceneState s;
  const Point3 camera_center(0.0, 6.0, 0.8);
  s.camera = geometry::CameraModel::from_fov(camera_center, geometry::Matrix3::Identity(), 1200, 750, 75.0);
  // Virtual viewpoint above and behind the phone; its height sets 0.5 cm/px at the phone.
  const Point3 virtual_center(0.0, -40.0, 393.0);
  s.reflector = geometry::Plane::bisector(camera_center, virtual_center);
  return s;
}

void RenderConfig::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  if (!(lens_size_px.x() > 0.0 && lens_size_px.y() > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "lens size must be positive");
  }
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
  if (supersample < 1 || supersample > 16) throw Error(ErrorCode::InvalidArgument, "supersample must be in [1, 16]");
  if (!(size_cue_distance_cm > 0.0)) throw Error(ErrorCode::InvalidArgument, "size cue distance must be positive");
}

Homography workspace_to_image(const SceneState& scene) {
  return geometry::ground_plane_to_image(geometry::mirror_camera(scene.camera, scene.reflector));
}

double apparent_hand_radius_cm(const SceneState& scene, const RenderConfig& cfg) {
  const double d = cfg.size_cue_distance_cm;
  return scene.hand_radius_cm * d / (d + scene.hand_height_cm);
}

namespace {

enum Material : std::uint8_t { kBackground, kSkin, kLens, kSurface, kPhoneBody, kPhoneMarker, kHand };

struct Painter {
  const SceneState& scene;
  const RenderConfig& cfg;
  Homography image_to_ws;
  geometry::Ellipse lens;
  geometry::Ellipse face;
  double hand_radius_cm = 0.0;
  std::array<Rgb, 7> palette;

  bool in_lens(double u, double v) const {
    const double du = (u - lens.center.x()) / lens.a, dv = (v - lens.center.y()) / lens.b;
    return du * du + dv * dv <= 1.0;
  }

  Material at(double u, double v) const {
    if (!in_lens(u, v)) return face.contains({u, v}) ? kSkin : kBackground;
    const Eigen::Vector3d q = image_to_ws.matrix() * Eigen::Vector3d(u, v, 1.0);
    if (std::abs(q.z()) < geometry::kDegeneracyTolerance) return kSurface;
    const Point2 ws(q.x() / q.z(), q.y() / q.z());
    if (scene.hand_visible && (ws - scene.hand_cm).squaredNorm() <= hand_radius_cm * hand_radius_cm) return kHand;
    const Point2 rel = ws - scene.phone_center_cm;
    if (std::abs(rel.x()) <= scene.phone_half_extents_cm.x() && std::abs(rel.y()) <= scene.phone_half_extents_cm.y()) {
      const double mr = scene.marker_radius_cm;
      return (rel - scene.marker_offset_cm).squaredNorm() <= mr * mr ? kPhoneMarker : kPhoneBody;
    }
    return kSurface;
  }
};

bool ellipse_touches_rect(const geometry::Ellipse& e, int w, int h) {
  const Point2 nearest(std::clamp(e.center.x(), -0.5, w - 0.5), std::clamp(e.center.y(), -0.5, h - 0.5));
  return e.contains(nearest);
}

}  // namespace

RenderedFrame render_frame(const SceneState& scene, const RenderConfig& cfg) {
  scene.validate();
  cfg.validate();
  if (scene.camera.width != cfg.width || scene.camera.height != cfg.height) {
    throw Error(ErrorCode::InvalidArgument, "camera image size differs from render size");
  }

  const Homography ws_to_img = workspace_to_image(scene);
  const Point2 lens_center = apply_homography(ws_to_img, scene.workspace_center_cm) + cfg.lens_offset_px;
  const double ax = 0.5 * cfg.lens_size_px.x();
  const double ay = 0.5 * cfg.lens_size_px.y();

  Painter painter{scene, cfg, ws_to_img.inverse(), {lens_center, ax, ay, 0.0}, {}, apparent_hand_radius_cm(scene, cfg), {}};
  painter.face = {lens_center + Point2(1.6 * ax, 0.55 * ay), 3.2 * ax, 2.4 * ay, 0.0};
  painter.palette = {cfg.background, cfg.skin, cfg.lens, cfg.surface, cfg.phone_body, cfg.phone_marker, cfg.hand};

  if (!ellipse_touches_rect(painter.lens, cfg.width, cfg.height)) {
    throw Error(ErrorCode::LensOutOfFrame, "lens region does not intersect the image");
  }

  RenderedFrame out;
  out.frame = Frame(cfg.width, cfg.height, scene.timestamp_ms);
  Frame& frame = out.frame;

  // Lens region: materials at pixel corners and centers; pixels with mixed materials are
  // box-filtered with supersample^2 samples.
  const int bx0 = std::max(0, static_cast<int>(std::floor(lens_center.x() - ax)) - 1);
  const int bx1 = std::min(cfg.width - 1, static_cast<int>(std::ceil(lens_center.x() + ax)) + 1);
  const int by0 = std::max(0, static_cast<int>(std::floor(lens_center.y() - ay)) - 1);
  const int by1 = std::min(cfg.height - 1, static_cast<int>(std::ceil(lens_center.y() + ay)) + 1);
  const int lw = std::max(0, bx1 - bx0 + 1);
  const int lh = std::max(0, by1 - by0 + 1);
  std::vector<float> lens_rgb(static_cast<size_t>(3) * lw * lh);
  if (lw > 0 && lh > 0) {
    const int gw = lw + 1;
    std::vector<Material> corners(static_cast<size_t>(gw) * (lh + 1));
    for (int j = 0; j <= lh; ++j) {
      for (int i = 0; i < gw; ++i) corners[static_cast<size_t>(j) * gw + i] = painter.at(bx0 + i - 0.5, by0 + j - 0.5);
    }
    const int ss = cfg.supersample;
    for (int y = by0; y <= by1; ++y) {
      for (int x = bx0; x <= bx1; ++x) {
        const size_t ci = static_cast<size_t>(y - by0) * gw + (x - bx0);
        const Material m = painter.at(x, y);
        Rgb c = painter.palette[m];
        const bool flat = corners[ci] == m && corners[ci + 1] == m && corners[ci + gw] == m &&
                          corners[ci + gw + 1] == m;
        if (!flat) {
          c = {0, 0, 0};
          for (int sy = 0; sy < ss; ++sy) {
            for (int sx = 0; sx < ss; ++sx) {
              const Rgb& sc = painter.palette[painter.at(x - 0.5 + (sx + 0.5) / ss, y - 0.5 + (sy + 0.5) / ss)];
              for (int k = 0; k < 3; ++k) c[k] += sc[k];
            }
          }
          for (auto& v : c) v /= ss * ss;
        }
        float* dst = lens_rgb.data() + 3 * (static_cast<size_t>(y - by0) * lw + (x - bx0));
        for (int k = 0; k < 3; ++k) dst[k] = static_cast<float>(c[k]);
      }
    }
  }

  // Row by row: flat background and face spans, the lens patch, then ambient and noise.
  const auto amb = static_cast<float>(scene.ambient);
  const auto sigma = static_cast<float>(cfg.noise_sigma);
  detail::TableGaussian gauss(detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(scene.timestamp_ms)));
  std::vector<float> row(static_cast<size_t>(3) * cfg.width);
  std::vector<float> noise(row.size());
  auto fill = [&](int from, int to, const Rgb& c) {
    for (int x = from; x < to; ++x) {
      row[3 * x] = static_cast<float>(c[0]);
      row[3 * x + 1] = static_cast<float>(c[1]);
      row[3 * x + 2] = static_cast<float>(c[2]);
    }
  };
  const auto& face = painter.face;
  for (int y = 0; y < cfg.height; ++y) {
    const double dy = (y - face.center.y()) / face.b;
    int x0 = 0, x1 = 0;
    if (std::abs(dy) <= 1.0) {
      const double half = face.a * std::sqrt(1.0 - dy * dy);
      x0 = std::clamp(static_cast<int>(std::ceil(face.center.x() - half)), 0, cfg.width);
      x1 = std::clamp(static_cast<int>(std::floor(face.center.x() + half)) + 1, x0, cfg.width);
    }
    fill(0, x0, cfg.background);
    fill(x0, x1, cfg.skin);
    fill(x1, cfg.width, cfg.background);
    if (y >= by0 && y <= by1 && lw > 0) {
      std::copy_n(lens_rgb.data() + static_cast<size_t>(3) * (y - by0) * lw, 3 * lw, row.data() + 3 * bx0);
    }
    std::uint8_t* out_row = frame.pixel(0, y);
    if (sigma > 0.0f) {
      gauss.fill(noise.data(), noise.size());
      for (size_t i = 0; i < row.size(); ++i) {
        const float v = row[i] * amb + sigma * noise[i];
        out_row[i] = static_cast<std::uint8_t>(std::clamp(v + 0.5f, 0.0f, 255.0f));
      }
    } else {
      for (size_t i = 0; i < row.size(); ++i) {
        out_row[i] = static_cast<std::uint8_t>(std::clamp(row[i] * amb + 0.5f, 0.0f, 255.0f));
      }
    }
  }

  GroundTruth& gt = out.truth;
  gt.timestamp_ms = scene.timestamp_ms;
  gt.phone_ws_cm = scene.phone_center_cm;
  gt.phone_px = apply_homography(ws_to_img, scene.phone_center_cm);
  const Point2 he = scene.phone_half_extents_cm;
  const std::array<Point2, 4> corner_ws{Point2(he.x(), he.y()), Point2(-he.x(), he.y()), Point2(-he.x(), -he.y()),
                                        Point2(he.x(), -he.y())};
  for (size_t i = 0; i < 4; ++i) {
    gt.phone_corners_px[i] = apply_homography(ws_to_img, scene.phone_center_cm + corner_ws[i]);
  }
  if (scene.hand_visible) {
    gt.hand_ws_cm = scene.hand_cm;
    gt.hand_px = apply_homography(ws_to_img, scene.hand_cm);
    gt.hand_radius_px = painter.hand_radius_cm * std::sqrt(std::abs(ws_to_img.jacobian(scene.hand_cm).determinant()));
  }
  gt.lens = ax >= ay ? geometry::Ellipse{lens_center, ax, ay, 0.0} : geometry::Ellipse{lens_center, ay, ax, 90.0};
  gt.touching = scene.hand_visible && scene.hand_height_cm <= geometry::kGeometryTolerance;
  return out;
}

void TrajectorySpec::validate() const {
  if (keyframes.empty()) throw Error(ErrorCode::InvalidArgument, "trajectory needs at least one keyframe");
  for (size_t i = 1; i < keyframes.size(); ++i) {
    if (keyframes[i].t_ms <= keyframes[i - 1].t_ms) {
      throw Error(ErrorCode::InvalidArgument, "keyframe times must be strictly increasing");
    }
  }
  if (!(fps > 0.0)) throw Error(ErrorCode::InvalidArgument, "fps must be positive");
  for (const auto& [a, b] : touch_intervals) {
    if (b < a) throw Error(ErrorCode::InvalidArgument, "touch interval end precedes start");
  }
}

TimestampMs TrajectorySpec::start_ms() const { return keyframes.front().t_ms; }
TimestampMs TrajectorySpec::end_ms() const { return keyframes.back().t_ms; }

std::vector<TimestampMs> TrajectorySpec::frame_times() const {
  validate();
  std::vector<TimestampMs> times;
  const double span = static_cast<double>(end_ms() - start_ms());
  for (long k = 0;; ++k) {
    const double offset = k * 1000.0 / fps;
    if (offset > span + 1e-9) break;
    times.push_back(start_ms() + std::llround(offset));
  }
  return times;
}

namespace {

// Values of one field at every keyframe, carried forward from `initial`.
template <typename T, typename Getter>
std::vector<T> resolve(const std::vector<Keyframe>& kfs, T initial, Getter get) {
  std::vector<T> values;
  values.reserve(kfs.size());
  T current = initial;
  for (const auto& kf : kfs) {
    if (const auto v = get(kf)) current = *v;
    values.push_back(current);
  }
  return values;
}

}  // namespace

SceneState sample_trajectory(const TrajectorySpec& spec, TimestampMs t) {
  spec.validate();
  if (t < spec.start_ms() || t > spec.end_ms()) {
    throw Error(ErrorCode::OutOfRange, "t = " + std::to_string(t) + " ms outside the trajectory");
  }
  const auto& kfs = spec.keyframes;
  size_t hi = 0;
  while (hi < kfs.size() && kfs[hi].t_ms < t) ++hi;
  size_t lo = hi;
  double frac = 0.0;
  if (kfs[hi].t_ms != t) {
    lo = hi - 1;
    frac = static_cast<double>(t - kfs[lo].t_ms) / static_cast<double>(kfs[hi].t_ms - kfs[lo].t_ms);
  }
  if (spec.interpolation == Interpolation::Step) frac = 0.0;

  auto scalar = [&](double initial, auto get) {
    const auto v = resolve<double>(kfs, initial, get);
    return v[lo] + frac * (v[hi] - v[lo]);
  };

  SceneState s = spec.base;
  s.timestamp_ms = t;
  s.hand_cm.x() = scalar(s.hand_cm.x(), [](const Keyframe& k) { return k.hand_x_cm; });
  s.hand_cm.y() = scalar(s.hand_cm.y(), [](const Keyframe& k) { return k.hand_y_cm; });
  s.hand_height_cm = scalar(s.hand_height_cm, [](const Keyframe& k) { return k.hand_h_cm; });
  s.phone_center_cm.x() = scalar(s.phone_center_cm.x(), [](const Keyframe& k) { return k.phone_x_cm; });
  s.phone_center_cm.y() = scalar(s.phone_center_cm.y(), [](const Keyframe& k) { return k.phone_y_cm; });
  s.ambient = scalar(s.ambient, [](const Keyframe& k) { return k.ambient; });
  s.hand_visible = resolve<bool>(kfs, s.hand_visible, [](const Keyframe& k) { return k.hand_visible; })[lo];

  for (const auto& [a, b] : spec.touch_intervals) {
    if (t >= a && t <= b) s.hand_height_cm = 0.0;
  }
  return s;
}

}  // namespace glasshands::sim
