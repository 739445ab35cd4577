#include "glasshands/vision.hpp"

#include "components.hpp"
#include "glasshands/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace glasshands::vision {

using detail::Component;
using detail::Run;

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Integer luminance in 1/256 gray levels.
inline int luma256(const std::uint8_t* p) { return 77 * p[0] + 150 * p[1] + 29 * p[2]; }

int lens_threshold256(const Frame& frame, const LensConfig& cfg) {
  std::uint64_t sum = 0;
  const size_t n = static_cast<size_t>(frame.width) * frame.height;
  const std::uint8_t* p = frame.rgb.data();
  for (size_t i = 0; i < n; ++i, p += 3) sum += luma256(p);
  const double mean = static_cast<double>(sum) / static_cast<double>(n);
  return static_cast<int>(std::ceil(cfg.threshold_factor * mean));
}

void require_valid(const Frame& frame) {
  if (!frame.valid()) throw Error(ErrorCode::CorruptFrame, "frame buffer does not match its size");
}

// Axis-aligned bounds and a fast membership test for an ellipse.
struct EllipseTest {
  Point2 c;
  double cs, sn, ia2, ib2;
  int x0, x1, y0, y1;

  EllipseTest(const Ellipse& e, int w, int h) : c(e.center) {
    const double th = e.rotation_deg / kRadToDeg;
    cs = std::cos(th);
    sn = std::sin(th);
    ia2 = 1.0 / (e.a * e.a);
    ib2 = 1.0 / (e.b * e.b);
    const double hx = std::sqrt(e.a * e.a * cs * cs + e.b * e.b * sn * sn);
    const double hy = std::sqrt(e.a * e.a * sn * sn + e.b * e.b * cs * cs);
    x0 = std::max(0, static_cast<int>(std::floor(c.x() - hx)));
    x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x() + hx)));
    y0 = std::max(0, static_cast<int>(std::floor(c.y() - hy)));
    y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y() + hy)));
  }

  bool operator()(int x, int y) const {
    const double dx = x - c.x(), dy = y - c.y();
    const double u = cs * dx + sn * dy, v = -sn * dx + cs * dy;
    return u * u * ia2 + v * v * ib2 <= 1.0;
  }
};

struct Hsv {
  double h, s, v;
};

inline Hsv to_hsv(const std::uint8_t* p) {
  const int r = p[0], g = p[1], b = p[2];
  const int mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  if (mx == 0 || d == 0) return {0.0, 0.0, static_cast<double>(mx)};
  double h;
  if (mx == r) {
    h = 60.0 * (g - b) / d;
  } else if (mx == g) {
    h = 60.0 * (2.0 + (b - r) / d);
  } else {
    h = 60.0 * (4.0 + (r - g) / d);
  }
  if (h < 0.0) h += 360.0;
  return {h, d / mx, static_cast<double>(mx)};
}

inline bool in_box(const Hsv& c, const ColorBox& box) {
  double dh = std::abs(c.h - box.hue_center_deg);
  dh = std::min(dh, 360.0 - dh);
  return dh <= box.hue_halfwidth_deg && c.s >= box.min_saturation;
}

// Median HSV value over the ROI pixels.
int median_value(const Frame& frame, const EllipseTest& roi) {
  std::array<int, 256> hist{};
  int n = 0;
  for (int y = roi.y0; y <= roi.y1; ++y) {
    for (int x = roi.x0; x <= roi.x1; ++x) {
      if (!roi(x, y)) continue;
      const auto* p = frame.pixel(x, y);
      ++hist[std::max({p[0], p[1], p[2]})];
      ++n;
    }
  }
  int acc = 0;
  for (int v = 0; v < 256; ++v) {
    acc += hist[v];
    if (2 * acc >= n) return v;
  }
  return 255;
}

template <typename Pred>
std::vector<std::vector<Run>> collect_runs(int x0, int x1, int y0, int y1, Pred&& set) {
  std::vector<std::vector<Run>> rows;
  if (x0 > x1 || y0 > y1) return rows;
  rows.reserve(y1 - y0 + 1);
  for (int y = y0; y <= y1; ++y) {
    auto& row = rows.emplace_back();
    int start = -1;
    for (int x = x0; x <= x1; ++x) {
      if (set(x, y)) {
        if (start < 0) start = x;
      } else if (start >= 0) {
        row.push_back({y, start, x - 1});
        start = -1;
      }
    }
    if (start >= 0) row.push_back({y, start, x1});
  }
  return rows;
}

Ellipse fit_ellipse(const Component& c) {
  const double n = c.area;
  const Point2 mean(c.sx / n, c.sy / n);
  Eigen::Matrix2d cov;
  // Pixel-center moments plus the 1/12 variance of a unit pixel footprint.
  cov(0, 0) = c.sxx / n - mean.x() * mean.x() + 1.0 / 12.0;
  cov(1, 1) = c.syy / n - mean.y() * mean.y() + 1.0 / 12.0;
  cov(0, 1) = cov(1, 0) = c.sxy / n - mean.x() * mean.y();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const double l_minor = std::max(eig.eigenvalues()(0), 0.0);
  const double l_major = std::max(eig.eigenvalues()(1), 0.0);
  const Eigen::Vector2d major = eig.eigenvectors().col(1);
  double angle = std::atan2(major.y(), major.x()) * kRadToDeg;
  if (angle < 0.0) angle += 180.0;
  if (angle >= 180.0) angle -= 180.0;
  return {mean, 2.0 * std::sqrt(l_major), 2.0 * std::sqrt(l_minor), angle};
}

template <typename Pred>
void fill_mask(GrayImage& img, int x0, int x1, int y0, int y1, Pred&& set) {
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (set(x, y)) img.data[static_cast<size_t>(y) * img.width + x] = 255;
    }
  }
}

GrayImage blank_like(const Frame& frame) {
  return {frame.width, frame.height, std::vector<std::uint8_t>(static_cast<size_t>(frame.width) * frame.height, 0)};
}

}  // namespace

bool DetectionResult::well_formed() const {
  if (!lens) return !phone && !hand;
  for (const auto* b : {&phone, &hand}) {
    if (*b && !lens->contains((*b)->centroid, 2.0)) return false;
  }
  return true;
}

std::vector<Ellipse> detect_lens_regions(const Frame& frame, const LensConfig& cfg) {
  require_valid(frame);
  const int thr = lens_threshold256(frame, cfg);
  const auto rows = collect_runs(0, frame.width - 1, 0, frame.height - 1,
                                 [&](int x, int y) { return luma256(frame.pixel(x, y)) < thr; });
  std::vector<std::pair<double, Ellipse>> found;
  for (const auto& c : detail::label_runs(rows)) {
    if (c.area >= cfg.min_area_px) found.emplace_back(c.area, fit_ellipse(c));
  }
  std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Ellipse> out;
  for (const auto& f : found) out.push_back(f.second);
  return out;
}

GrayImage lens_mask(const Frame& frame, const LensConfig& cfg) {
  require_valid(frame);
  const int thr = lens_threshold256(frame, cfg);
  GrayImage img = blank_like(frame);
  fill_mask(img, 0, frame.width - 1, 0, frame.height - 1,
            [&](int x, int y) { return luma256(frame.pixel(x, y)) < thr; });
  return img;
}

namespace {

struct ClassTest {
  const Frame& frame;
  EllipseTest roi;
  const ColorBox& box;
  double min_value;

  bool operator()(int x, int y) const {
    if (!roi(x, y)) return false;
    const Hsv c = to_hsv(frame.pixel(x, y));
    return c.v >= min_value && in_box(c, box);
  }
};

ClassTest make_class_test(const Frame& frame, const Ellipse& roi, BlobClass cls, const ColorConfig& cfg) {
  EllipseTest test(roi, frame.width, frame.height);
  const double floor = cfg.min_value_ratio * median_value(frame, test);
  return {frame, test, cls == BlobClass::Phone ? cfg.phone : cfg.hand, floor};
}

}  // namespace

std::vector<Blob> detect_color_blobs(const Frame& frame, const Ellipse& roi, BlobClass cls, const ColorConfig& cfg) {
  require_valid(frame);
  const ClassTest test = make_class_test(frame, roi, cls, cfg);
  const auto& r = test.roi;
  const auto rows = collect_runs(r.x0, r.x1, r.y0, r.y1, test);
  std::vector<Blob> blobs;
  for (const auto& c : detail::label_runs(rows)) {
    if (c.area < cfg.min_area_px) continue;
    Blob b;
    b.cls = cls;
    b.centroid = Point2(c.sx / c.area, c.sy / c.area);
    b.area = c.area;
    b.radius = std::sqrt(c.area / std::numbers::pi);
    b.confidence = c.area / ((c.x_max - c.x_min + 1.0) * (c.y_max - c.y_min + 1.0));
    blobs.push_back(b);
  }
  std::sort(blobs.begin(), blobs.end(), [](const Blob& a, const Blob& b) {
    if (a.area != b.area) return a.area > b.area;
    return a.centroid.x() < b.centroid.x();
  });
  return blobs;
}

GrayImage class_mask(const Frame& frame, const Ellipse& roi, BlobClass cls, const ColorConfig& cfg) {
  require_valid(frame);
  const ClassTest test = make_class_test(frame, roi, cls, cfg);
  GrayImage img = blank_like(frame);
  fill_mask(img, test.roi.x0, test.roi.x1, test.roi.y0, test.roi.y1, test);
  return img;
}

DetectionResult detect(const Frame& frame, const VisionConfig& cfg) {
  DetectionResult out;
  out.timestamp_ms = frame.timestamp_ms;
  const auto lenses = detect_lens_regions(frame, cfg.lens);
  if (lenses.empty()) return out;
  out.lens = lenses.front();
  auto phones = detect_color_blobs(frame, *out.lens, BlobClass::Phone, cfg.color);
  if (!phones.empty()) out.phone = phones.front();
  auto hands = detect_color_blobs(frame, *out.lens, BlobClass::Hand, cfg.color);
  if (!hands.empty()) out.hand = hands.front();
  return out;
}

void TrackerConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "tracker alpha must lie in (0, 1]");
  if (reset_after_misses < 0) throw Error(ErrorCode::InvalidArgument, "tracker reset count must be >= 0");
}

TrackUpdate track(const TrackState& state, const std::optional<Point2>& measurement, TimestampMs t) {
  state.cfg.validate();
  TrackState next = state;
  next.last_update_ms = t;
  if (measurement) {
    next.position = state.position ? Point2(state.cfg.alpha * *measurement + (1.0 - state.cfg.alpha) * *state.position)
                                   : *measurement;
    next.misses = 0;
  } else {
    ++next.misses;
    if (next.misses > state.cfg.reset_after_misses) {
      next.position.reset();
      next.misses = 0;
    }
  }
  return {next, next.position};
}

}  // namespace glasshands::vision
