#include "glasshands/calibration.hpp"

#include "glasshands/error.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace glasshands::calib {

using geometry::apply_homography;
using geometry::Ellipse;
using geometry::Matrix3;
using geometry::PointPair;

std::string_view to_string(CorrespondenceSource s) {
  switch (s) {
    case CorrespondenceSource::PhoneCorner: return "phone-corner";
    case CorrespondenceSource::GuidedTap: return "guided-tap";
    case CorrespondenceSource::Synthetic: return "synthetic";
  }
  return "synthetic";
}

void CorrespondenceSet::validate() const {
  for (const auto& c : pairs) {
    if (!c.image_px.allFinite() || !c.workspace_cm.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "correspondence coordinates must be finite");
    }
  }
  if (anchor_px && !anchor_px->allFinite()) throw Error(ErrorCode::InvalidArgument, "anchor must be finite");
}

CalibrationMap run_calibration(const CorrespondenceSet& set, TimestampMs created_ms) {
  set.validate();
  std::vector<PointPair> pairs;
  pairs.reserve(set.pairs.size());
  for (const auto& c : set.pairs) pairs.emplace_back(c.image_px, c.workspace_cm);

  const auto est = geometry::estimate_homography(pairs);
  const auto refined = geometry::refine_homography(est.homography, pairs);
  const Homography& h = refined.homography;

  const Point2 anchor = set.anchor_px ? *set.anchor_px : apply_homography(h.inverse(), Point2::Zero());
  const Point2 offset = apply_homography(h, anchor);
  Matrix3 shift = Matrix3::Identity();
  shift(0, 2) = -offset.x();
  shift(1, 2) = -offset.y();

  CalibrationMap out;
  out.homography = Homography(shift * h.matrix());
  out.anchor_px = anchor;
  out.created_ms = created_ms;
  out.rms_cm = geometry::reprojection_rms(out.homography, pairs);
  const Eigen::JacobiSVD<Eigen::Matrix2d> svd(out.homography.jacobian(anchor));
  out.scale_cm_per_px = svd.singularValues();
  return out;
}

Point2 map_to_workspace(const CalibrationMap& calib, const Point2& px) { return apply_homography(calib.homography, px); }

Point2 map_to_image(const CalibrationMap& calib, const Point2& cm) {
  return apply_homography(calib.homography.inverse(), cm);
}

bool is_stale(const CalibrationMap& calib, const Point2& lens_center_px, double max_drift_px) {
  if (!calib.lens_center_px) return false;
  return (lens_center_px - *calib.lens_center_px).norm() > max_drift_px;
}

namespace {

// Red-minus-max(green, blue): positive on the phone, negative on the surface.
inline int chroma(const std::uint8_t* p) { return int(p[0]) - std::max(int(p[1]), int(p[2])); }

double bilinear_chroma(const Frame& f, const Point2& p) {
  const double xf = std::clamp(p.x(), 0.0, f.width - 1.001), yf = std::clamp(p.y(), 0.0, f.height - 1.001);
  const int x = static_cast<int>(xf), y = static_cast<int>(yf);
  const double tx = xf - x, ty = yf - y;
  const double c00 = chroma(f.pixel(x, y)), c10 = chroma(f.pixel(x + 1, y));
  const double c01 = chroma(f.pixel(x, y + 1)), c11 = chroma(f.pixel(x + 1, y + 1));
  return (1 - ty) * ((1 - tx) * c00 + tx * c10) + ty * ((1 - tx) * c01 + tx * c11);
}

template <typename T>
T median_of(std::vector<T> v) {
  if (v.empty()) return T{};
  auto mid = v.begin() + v.size() / 2;
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

struct Line {
  Point2 point;
  Point2 dir;
  double rms;
};

Line fit_line(const std::vector<Point2>& pts) {
  Point2 mean = Point2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const Point2 dir = eig.eigenvectors().col(1);
  return {mean, dir, std::sqrt(std::max(eig.eigenvalues()(0), 0.0) / static_cast<double>(pts.size()))};
}

std::optional<Point2> intersect(const Line& a, const Line& b) {
  Eigen::Matrix2d m;
  m.col(0) = a.dir;
  m.col(1) = -b.dir;
  if (std::abs(m.determinant()) < 1e-6) return std::nullopt;
  const Eigen::Vector2d t = m.inverse() * (b.point - a.point);
  return Point2(a.point + t(0) * a.dir);
}

double distance_to_segment(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

std::optional<std::array<Point2, 4>> find_phone_corners(const Frame& frame, const vision::DetectionResult& det,
                                                        const PhoneCornerConfig& cfg) {
  if (!det.lens || !det.phone) return std::nullopt;
  const Ellipse& lens = *det.lens;
  const vision::Blob& phone = *det.phone;

  // Phone-class pixels near the phone blob.
  const auto mask = vision::class_mask(frame, lens, vision::BlobClass::Phone);
  const double reach = 2.0 * std::sqrt(phone.area) + 4.0;
  const int x0 = std::max(0, static_cast<int>(phone.centroid.x() - reach));
  const int x1 = std::min(frame.width - 1, static_cast<int>(phone.centroid.x() + reach));
  const int y0 = std::max(0, static_cast<int>(phone.centroid.y() - reach));
  const int y1 = std::min(frame.height - 1, static_cast<int>(phone.centroid.y() + reach));
  std::vector<Point2> pixels;
  std::vector<int> values;
  std::vector<int> chromas;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (!mask.data[static_cast<size_t>(y) * mask.width + x]) continue;
      const auto* p = frame.pixel(x, y);
      pixels.emplace_back(x, y);
      values.push_back(std::max({p[0], p[1], p[2]}));
      chromas.push_back(chroma(p));
    }
  }
  if (pixels.size() < 20) return std::nullopt;

  Point2 mean = Point2::Zero();
  for (const auto& p : pixels) mean += p;
  mean /= static_cast<double>(pixels.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pixels) cov += (p - mean) * (p - mean).transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Point2 ey = eig.eigenvectors().col(1);

  // The brighter marker disc sits toward +y.
  const double marker_floor = 1.35 * median_of(values);
  Point2 marker = Point2::Zero();
  int marker_n = 0;
  for (size_t i = 0; i < pixels.size(); ++i) {
    if (values[i] >= marker_floor) {
      marker += pixels[i];
      ++marker_n;
    }
  }
  if (marker_n < 3) return std::nullopt;
  marker /= marker_n;
  if ((marker - mean).dot(ey) < 0.0) ey = -ey;
  const Point2 left_normal(-ey.y(), ey.x());
  const Point2 ex = cfg.mirrored ? Point2(-left_normal) : left_normal;

  static constexpr std::array<std::array<int, 2>, 4> kSigns{{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
  std::array<Point2, 4> coarse;
  for (size_t k = 0; k < 4; ++k) {
    const Point2 d = kSigns[k][0] * ex + kSigns[k][1] * ey;
    coarse[k] = *std::max_element(pixels.begin(), pixels.end(),
                                  [&](const Point2& a, const Point2& b) { return d.dot(a) < d.dot(b); });
  }

  if (det.hand) {
    for (size_t k = 0; k < 4; ++k) {
      const double gap = distance_to_segment(det.hand->centroid, coarse[k], coarse[(k + 1) % 4]) - det.hand->radius;
      if (gap < cfg.hand_clearance_px) return std::nullopt;
    }
  }

  // Membership between the surface and the phone body, from chroma.
  std::vector<int> lens_chroma;
  {
    const int lx0 = std::max(0, static_cast<int>(lens.center.x() - lens.a));
    const int lx1 = std::min(frame.width - 1, static_cast<int>(lens.center.x() + lens.a));
    const int ly0 = std::max(0, static_cast<int>(lens.center.y() - lens.a));
    const int ly1 = std::min(frame.height - 1, static_cast<int>(lens.center.y() + lens.a));
    for (int y = ly0; y <= ly1; y += 2) {
      for (int x = lx0; x <= lx1; x += 2) {
        if (lens.contains(Point2(x, y))) lens_chroma.push_back(chroma(frame.pixel(x, y)));
      }
    }
  }
  const double bg = median_of(lens_chroma);
  const double fg = median_of(chromas);
  if (fg - bg < 10.0) return std::nullopt;
  auto membership = [&](const Point2& p) { return std::clamp((bilinear_chroma(frame, p) - bg) / (fg - bg), 0.0, 1.0); };

  constexpr double kHalfWindow = 3.0;
  constexpr double kStep = 0.25;
  std::array<Line, 4> sides;
  for (size_t k = 0; k < 4; ++k) {
    const Point2 a = coarse[k], b = coarse[(k + 1) % 4];
    const Point2 along = (b - a).normalized();
    Point2 normal(-along.y(), along.x());
    if (normal.dot(0.5 * (a + b) - mean) < 0.0) normal = -normal;
    const double len = (b - a).norm();
    std::vector<Point2> edge;
    for (double t = 0.2 * len; t <= 0.8 * len + 1e-9; t += 0.5) {
      const Point2 q = a + t * along;
      double integral = 0.0;
      for (double s = -kHalfWindow + 0.5 * kStep; s < kHalfWindow; s += kStep) integral += kStep * membership(q + s * normal);
      edge.push_back(q + (-kHalfWindow + integral) * normal);
    }
    if (edge.size() < 3) return std::nullopt;
    sides[k] = fit_line(edge);
    if (sides[k].rms > cfg.max_edge_rms_px) return std::nullopt;
  }

  std::array<Point2, 4> corners;
  for (size_t k = 0; k < 4; ++k) {
    const auto c = intersect(sides[(k + 3) % 4], sides[k]);
    if (!c) return std::nullopt;
    corners[k] = *c;
  }

  const double short_len = 0.5 * ((corners[1] - corners[0]).norm() + (corners[3] - corners[2]).norm());
  const double long_len = 0.5 * ((corners[2] - corners[1]).norm() + (corners[0] - corners[3]).norm());
  const double expected = cfg.phone_half_extents_cm.y() / cfg.phone_half_extents_cm.x();
  if (std::abs(long_len / short_len / expected - 1.0) > cfg.max_aspect_error) return std::nullopt;
  return corners;
}

std::optional<CorrespondenceSet> phone_corner_correspondences(const Frame& frame, const vision::DetectionResult& det,
                                                              const PhoneCornerConfig& cfg) {
  const auto corners = find_phone_corners(frame, det, cfg);
  if (!corners) return std::nullopt;
  const Point2 he = cfg.phone_half_extents_cm;
  const std::array<Point2, 4> ws{Point2(he.x(), he.y()), Point2(-he.x(), he.y()), Point2(-he.x(), -he.y()),
                                 Point2(he.x(), -he.y())};
  CorrespondenceSet set;
  for (size_t k = 0; k < 4; ++k) set.pairs.push_back({(*corners)[k], ws[k], CorrespondenceSource::PhoneCorner});
  return set;
}

CalibrationMap calibrate_from_frame(const Frame& frame, const vision::DetectionResult& det,
                                    const PhoneCornerConfig& cfg) {
  const auto set = phone_corner_correspondences(frame, det, cfg);
  if (!set) throw Error(ErrorCode::CalibrationFailed, "no usable phone outline in frame");
  try {
    CalibrationMap m = run_calibration(*set, frame.timestamp_ms);
    if (det.lens) m.lens_center_px = det.lens->center;
    return m;
  } catch (const Error& e) {
    throw Error(ErrorCode::CalibrationFailed, std::string("phone corners rejected: ") + e.what());
  }
}

std::string to_json(const CalibrationMap& calib) {
  nlohmann::ordered_json j;
  const Matrix3& m = calib.homography.matrix();
  std::vector<double> flat;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) flat.push_back(m(r, c));
  j["matrix"] = flat;
  j["rms_cm"] = calib.rms_cm;
  j["scale_cm_per_px"] = {calib.scale_cm_per_px.x(), calib.scale_cm_per_px.y()};
  j["anchor_px"] = {calib.anchor_px.x(), calib.anchor_px.y()};
  j["created_ms"] = calib.created_ms;
  if (calib.lens_center_px) {
    j["lens_center_px"] = {calib.lens_center_px->x(), calib.lens_center_px->y()};
  } else {
    j["lens_center_px"] = nullptr;
  }
  return j.dump(2);
}

CalibrationMap from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto flat = j.at("matrix").get<std::vector<double>>();
    if (flat.size() != 9) throw Error(ErrorCode::CalibrationFailed, "matrix must have 9 entries");
    Matrix3 m;
    for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = flat[k];
    CalibrationMap out;
    out.homography = Homography(m);
    out.rms_cm = j.at("rms_cm").get<double>();
    const auto s = j.at("scale_cm_per_px").get<std::vector<double>>();
    const auto a = j.at("anchor_px").get<std::vector<double>>();
    if (s.size() != 2 || a.size() != 2) throw Error(ErrorCode::CalibrationFailed, "expected 2-vectors");
    out.scale_cm_per_px = Point2(s[0], s[1]);
    out.anchor_px = Point2(a[0], a[1]);
    out.created_ms = j.value("created_ms", TimestampMs{0});
    if (j.contains("lens_center_px") && !j["lens_center_px"].is_null()) {
      const auto c = j["lens_center_px"].get<std::vector<double>>();
      if (c.size() != 2) throw Error(ErrorCode::CalibrationFailed, "expected 2-vector lens center");
      out.lens_center_px = Point2(c[0], c[1]);
    }
    if (!(out.rms_cm >= 0.0) || !(out.scale_cm_per_px.minCoeff() > 0.0)) {
      throw Error(ErrorCode::CalibrationFailed, "rms must be >= 0 and scales > 0");
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CalibrationFailed, std::string("malformed calibration: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CalibrationFailed) throw;
    throw Error(ErrorCode::CalibrationFailed, std::string("invalid calibration: ") + e.what());
  }
}

void save_calibration(const std::filesystem::path& path, const CalibrationMap& calib) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << to_json(calib) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

CalibrationMap load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InputNotFound, "calibration not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace glasshands::calib
