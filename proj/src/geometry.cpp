#include "glasshands/geometry.hpp"

#include "glasshands/error.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace glasshands::geometry {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool finite(const Point3& p) { return p.allFinite(); }

}  // namespace

Plane::Plane(const Point3& normal, double offset) {
  const double norm = normal.norm();
  if (!finite(normal) || !std::isfinite(offset) || norm < kDegeneracyTolerance) {
    throw Error(ErrorCode::InvalidArgument, "plane normal must be finite and non-zero");
  }
  normal_ = normal / norm;
  offset_ = offset / norm;
}

Plane Plane::bisector(const Point3& a, const Point3& b) {
  const Point3 n = b - a;
  return Plane(n, n.dot(0.5 * (a + b)));
}

CameraModel CameraModel::from_fov(const Point3& center, const Matrix3& rotation, int width,
                                  int height, double hfov_deg) {
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) {
    throw Error(ErrorCode::InvalidArgument, "field of view must lie in (0, 180) degrees");
  }
  CameraModel cam;
  cam.center = center;
  cam.rotation = rotation;
  cam.width = width;
  cam.height = height;
  cam.focal_px = 0.5 * width / std::tan(0.5 * hfov_deg * kDegToRad);
  cam.principal_px = Point2(0.5 * width, 0.5 * height);
  cam.validate();
  return cam;
}

double CameraModel::hfov_deg() const {
  return 2.0 * std::atan(0.5 * width / focal_px) / kDegToRad;
}

void CameraModel::validate() const {
  if (!(focal_px > 0.0) || !std::isfinite(focal_px)) {
    throw Error(ErrorCode::InvalidArgument, "focal length must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  }
  const double ortho_err = (rotation.transpose() * rotation - Matrix3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho_err <= kGeometryTolerance) || std::abs(rotation.determinant() - 1.0) > kGeometryTolerance) {
    throw Error(ErrorCode::InvalidArgument, "camera rotation must be a proper orthonormal matrix");
  }
  const double fov = hfov_deg();
  if (!(fov > 0.0 && fov < 180.0)) {
    throw Error(ErrorCode::InvalidArgument, "field of view out of range");
  }
}

Point3 reflect_point(const Plane& plane, const Point3& p) {
  return p - 2.0 * plane.signed_distance(p) * plane.normal();
}

Point3 reflect_direction(const Plane& plane, const Point3& v) {
  return v - 2.0 * plane.normal().dot(v) * plane.normal();
}

CameraModel mirror_camera(const CameraModel& camera, const Plane& plane) {
  CameraModel virt = camera;
  virt.center = reflect_point(plane, camera.center);
  for (int c = 0; c < 3; ++c) {
    virt.rotation.col(c) = reflect_direction(plane, camera.rotation.col(c));
  }
  // Reflection makes the frame improper; flipping the x axis restores a rotation and the
  // handedness flag restores the image.
  virt.rotation.col(0) = -virt.rotation.col(0);
  virt.handedness = camera.handedness == Handedness::Right ? Handedness::Left : Handedness::Right;
  return virt;
}

Point2 project(const CameraModel& camera, const Point3& p) {
  const Point3 q = camera.rotation.transpose() * (p - camera.center);
  if (q.z() <= kGeometryTolerance) {
    throw Error(ErrorCode::BehindCamera, "point is not in front of the camera");
  }
  double x = camera.focal_px * q.x() / q.z();
  if (camera.handedness == Handedness::Left) x = -x;
  return {camera.principal_px.x() + x, camera.principal_px.y() + camera.focal_px * q.y() / q.z()};
}

Point3 back_project_direction(const CameraModel& camera, const Point2& px) {
  double x = (px.x() - camera.principal_px.x()) / camera.focal_px;
  if (camera.handedness == Handedness::Left) x = -x;
  const double y = (px.y() - camera.principal_px.y()) / camera.focal_px;
  return (camera.rotation * Point3(x, y, 1.0)).normalized();
}

bool intersect_ray(const CameraModel& camera, const Point2& px, const Plane& plane, Point3& hit) {
  const Point3 dir = back_project_direction(camera, px);
  const double denom = plane.normal().dot(dir);
  if (std::abs(denom) < kDegeneracyTolerance) return false;
  const double t = -plane.signed_distance(camera.center) / denom;
  if (t <= 0.0) return false;
  hit = camera.center + t * dir;
  return true;
}

Homography::Homography(const Matrix3& m) {
  const double fro = m.norm();
  if (!m.allFinite() || fro < kDegeneracyTolerance) {
    throw Error(ErrorCode::DegenerateConfiguration, "homography matrix is zero or non-finite");
  }
  matrix_ = m / fro;
  Eigen::Index r = 0, c = 0;
  matrix_.cwiseAbs().maxCoeff(&r, &c);
  if (matrix_(r, c) < 0.0) matrix_ = -matrix_;
  if (std::abs(matrix_.determinant()) <= kDegeneracyTolerance) {
    throw Error(ErrorCode::DegenerateConfiguration, "homography is singular");
  }
}

Homography Homography::inverse() const { return Homography(matrix_.inverse()); }

Homography Homography::compose(const Homography& other) const {
  return Homography(matrix_ * other.matrix_);
}

Eigen::Matrix2d Homography::jacobian(const Point2& p) const {
  const Eigen::Vector3d h = matrix_ * Eigen::Vector3d(p.x(), p.y(), 1.0);
  if (std::abs(h.z()) < kDegeneracyTolerance) {
    throw Error(ErrorCode::PointAtInfinity, "jacobian evaluated on the vanishing line");
  }
  const double u = h.x() / h.z();
  const double v = h.y() / h.z();
  Eigen::Matrix2d j;
  j(0, 0) = (matrix_(0, 0) - u * matrix_(2, 0)) / h.z();
  j(0, 1) = (matrix_(0, 1) - u * matrix_(2, 1)) / h.z();
  j(1, 0) = (matrix_(1, 0) - v * matrix_(2, 0)) / h.z();
  j(1, 1) = (matrix_(1, 1) - v * matrix_(2, 1)) / h.z();
  return j;
}

bool Ellipse::contains(const Point2& p, double dilation) const {
  const double th = rotation_deg * kDegToRad;
  const Point2 d = p - center;
  const double u = std::cos(th) * d.x() + std::sin(th) * d.y();
  const double v = -std::sin(th) * d.x() + std::cos(th) * d.y();
  const double aa = a + dilation, bb = b + dilation;
  if (aa <= 0.0 || bb <= 0.0) return false;
  return (u * u) / (aa * aa) + (v * v) / (bb * bb) <= 1.0;
}

Point2 apply_homography(const Homography& h, const Point2& p) {
  const Eigen::Vector3d q = h.matrix() * Eigen::Vector3d(p.x(), p.y(), 1.0);
  if (std::abs(q.z()) < kDegeneracyTolerance) {
    throw Error(ErrorCode::PointAtInfinity, "point maps to infinity");
  }
  return {q.x() / q.z(), q.y() / q.z()};
}

namespace {

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Matrix3 normalizing_transform(std::span<const PointPair> pairs, bool source) {
  Point2 mean = Point2::Zero();
  for (const auto& pr : pairs) mean += source ? pr.first : pr.second;
  mean /= static_cast<double>(pairs.size());
  double dist = 0.0;
  for (const auto& pr : pairs) dist += ((source ? pr.first : pr.second) - mean).norm();
  dist /= static_cast<double>(pairs.size());
  if (!(dist > kDegeneracyTolerance)) {
    throw Error(ErrorCode::DegenerateConfiguration, "all points coincide");
  }
  const double s = std::sqrt(2.0) / dist;
  Matrix3 t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

Point2 transform(const Matrix3& t, const Point2& p) {
  const Eigen::Vector3d q = t * Eigen::Vector3d(p.x(), p.y(), 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

void require_pairs(std::span<const PointPair> pairs) {
  if (pairs.size() < 4) {
    throw Error(ErrorCode::InsufficientCorrespondences,
                "need at least 4 correspondences, got " + std::to_string(pairs.size()));
  }
  for (const auto& pr : pairs) {
    if (!pr.first.allFinite() || !pr.second.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "non-finite correspondence");
    }
  }
}

}  // namespace

double reprojection_rms(const Homography& h, std::span<const PointPair> pairs) {
  if (pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [src, dst] : pairs) sum += (apply_homography(h, src) - dst).squaredNorm();
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

HomographyEstimate estimate_homography(std::span<const PointPair> pairs) {
  require_pairs(pairs);
  const Matrix3 ts = normalizing_transform(pairs, true);
  const Matrix3 td = normalizing_transform(pairs, false);

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point2 s = transform(ts, pairs[static_cast<size_t>(i)].first);
    const Point2 d = transform(td, pairs[static_cast<size_t>(i)].second);
    a.row(2 * i) << -s.x(), -s.y(), -1, 0, 0, 0, d.x() * s.x(), d.x() * s.y(), d.x();
    a.row(2 * i + 1) << 0, 0, 0, -s.x(), -s.y(), -1, d.y() * s.x(), d.y() * s.y(), d.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  // The 9th singular value carries the solution; the 8th measures how unique it is.
  if (sv.size() < 8 || !(sv(7) / sv(0) >= kConditioningTolerance)) {
    throw Error(ErrorCode::DegenerateConfiguration, "correspondences do not determine a homography");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Matrix3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  HomographyEstimate out{Homography(td.inverse() * hn * ts), 0.0};
  out.rms = reprojection_rms(out.homography, pairs);
  return out;
}

namespace {

struct NormalizedProblem {
  std::vector<Point2> src;
  std::vector<Point2> dst;
};

double sum_squared(const Matrix3& h, const NormalizedProblem& prob) {
  double sum = 0.0;
  for (size_t i = 0; i < prob.src.size(); ++i) {
    const Eigen::Vector3d q = h * Eigen::Vector3d(prob.src[i].x(), prob.src[i].y(), 1.0);
    if (std::abs(q.z()) < kDegeneracyTolerance) return std::numeric_limits<double>::infinity();
    sum += (Point2(q.x() / q.z(), q.y() / q.z()) - prob.dst[i]).squaredNorm();
  }
  return sum;
}

}  // namespace

RefineResult refine_homography(const Homography& initial, std::span<const PointPair> pairs,
                               const RefineOptions& options) {
  require_pairs(pairs);
  const Matrix3 ts = normalizing_transform(pairs, true);
  const Matrix3 td = normalizing_transform(pairs, false);
  NormalizedProblem prob;
  for (const auto& [s, d] : pairs) {
    prob.src.push_back(transform(ts, s));
    prob.dst.push_back(transform(td, d));
  }

  Matrix3 h = td * initial.matrix() * ts.inverse();
  h /= h.norm();
  // Gauge: the largest entry stays fixed, the other eight move.
  Eigen::Index fr = 0, fc = 0;
  h.cwiseAbs().maxCoeff(&fr, &fc);
  const int fixed = static_cast<int>(fr * 3 + fc);

  RefineResult result;
  result.initial_rms = reprojection_rms(initial, pairs);
  double err = sum_squared(h, prob);
  double lambda = 1e-3;
  const auto n = prob.src.size();

  for (int iter = 0; iter < options.max_iterations && err > 1e-28; ++iter) {
    Eigen::MatrixXd jac(2 * n, 8);
    Eigen::VectorXd res(2 * n);
    for (size_t i = 0; i < n; ++i) {
      const double x = prob.src[i].x(), y = prob.src[i].y();
      const Eigen::Vector3d q = h * Eigen::Vector3d(x, y, 1.0);
      const double u = q.x() / q.z(), v = q.y() / q.z(), w = q.z();
      const double du[9] = {x / w, y / w, 1 / w, 0, 0, 0, -u * x / w, -u * y / w, -u / w};
      const double dv[9] = {0, 0, 0, x / w, y / w, 1 / w, -v * x / w, -v * y / w, -v / w};
      for (int k = 0, col = 0; k < 9; ++k) {
        if (k == fixed) continue;
        jac(static_cast<Eigen::Index>(2 * i), col) = du[k];
        jac(static_cast<Eigen::Index>(2 * i + 1), col) = dv[k];
        ++col;
      }
      res(static_cast<Eigen::Index>(2 * i)) = u - prob.dst[i].x();
      res(static_cast<Eigen::Index>(2 * i + 1)) = v - prob.dst[i].y();
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * res;
    const double diag_floor = 1e-12 * std::max(1.0, jtj.diagonal().maxCoeff());

    bool accepted = false;
    bool converged = false;
    for (int escalation = 0;; ++escalation) {
      Eigen::MatrixXd damped = jtj;
      for (Eigen::Index k = 0; k < 8; ++k) damped(k, k) += lambda * std::max(jtj(k, k), diag_floor);
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      Matrix3 trial = h;
      for (int k = 0, col = 0; k < 9; ++k) {
        if (k == fixed) continue;
        trial(k / 3, k % 3) += step(col++);
      }
      const double trial_err = sum_squared(trial, prob);
      if (trial_err < err) {
        const double rel = (err - trial_err) / err;
        h = trial;
        err = trial_err;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        converged = rel < options.relative_tolerance;
        break;
      }
      lambda *= 10.0;
      if (escalation + 1 >= options.max_consecutive_escalations) {
        // Rounding-level increases mean we sit at the minimum; anything larger is divergence.
        if (std::isfinite(trial_err) && trial_err <= err * (1.0 + 1e-9) + 1e-30) {
          converged = true;
          break;
        }
        throw Error(ErrorCode::DivergenceDetected,
                    "error increased for " + std::to_string(options.max_consecutive_escalations) +
                        " consecutive damping escalations");
      }
    }
    result.iterations = iter + 1;
    if (converged || !accepted) break;
  }

  Homography refined(td.inverse() * h * ts);
  const double refined_rms = reprojection_rms(refined, pairs);
  if (refined_rms <= result.initial_rms) {
    result.homography = refined;
    result.final_rms = refined_rms;
  } else {
    result.homography = initial;
    result.final_rms = result.initial_rms;
  }
  return result;
}

Homography ground_plane_to_image(const CameraModel& camera) {
  const Matrix3 rt = camera.rotation.transpose();
  Matrix3 extr;
  extr.col(0) = rt.col(0);
  extr.col(1) = rt.col(1);
  extr.col(2) = -rt * camera.center;
  Matrix3 k;
  const double fx = camera.handedness == Handedness::Left ? -camera.focal_px : camera.focal_px;
  k << fx, 0, camera.principal_px.x(), 0, camera.focal_px, camera.principal_px.y(), 0, 0, 1;
  return Homography(k * extr);
}

}  // namespace glasshands::geometry
