#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace glasshands::geometry {

/// World points are in cm, image points in px.
using Point3 = Eigen::Vector3d;
using Point2 = Eigen::Vector2d;
using Matrix3 = Eigen::Matrix3d;

inline constexpr double kGeometryTolerance = 1e-9;
inline constexpr double kDegeneracyTolerance = 1e-12;
inline constexpr double kConditioningTolerance = 1e-10;

/// Plane {x : n.x = d} with unit normal n.
class Plane {
 public:
  Plane() = default;

  /// Normalizes `normal`; throws InvalidArgument for a zero or non-finite normal.
  Plane(const Point3& normal, double offset);

  /// Perpendicular bisector of segment ab; reflecting a across it gives b.
  static Plane bisector(const Point3& a, const Point3& b);

  const Point3& normal() const { return normal_; }
  double offset() const { return offset_; }
  double signed_distance(const Point3& p) const { return normal_.dot(p) - offset_; }

 private:
  Point3 normal_ = Point3::UnitZ();
  double offset_ = 0.0;
};

enum class Handedness { Right, Left };

/// Pinhole camera. Columns of `rotation` are the camera x (image right), y (image down)
/// and z (optical axis) directions in world coordinates. A left-handed camera flips image
/// x about the principal point, which keeps `rotation` a proper rotation after mirroring.
struct CameraModel {
  Point3 center = Point3::Zero();
  Matrix3 rotation = Matrix3::Identity();
  double focal_px = 1.0;
  Point2 principal_px = Point2::Zero();
  int width = 0;
  int height = 0;
  Handedness handedness = Handedness::Right;

  /// Camera with focal length derived from a horizontal field of view in degrees.
  static CameraModel from_fov(const Point3& center, const Matrix3& rotation, int width, int height,
                              double hfov_deg);

  double hfov_deg() const;

  /// Throws InvalidArgument when f <= 0, rotation not orthonormal, or FOV out of (0, 180).
  void validate() const;
};

Point3 reflect_point(const Plane& plane, const Point3& p);

/// Reflects a direction vector (no translation component).
Point3 reflect_direction(const Plane& plane, const Point3& v);

/// Virtual camera seen through a planar mirror. project(mirror_camera(c, P), x) equals
/// project(c, reflect_point(P, x)).
CameraModel mirror_camera(const CameraModel& camera, const Plane& plane);

/// Throws BehindCamera when the depth along the optical axis is <= 1e-9 cm.
Point2 project(const CameraModel& camera, const Point3& p);

/// World-space unit direction of the ray through image point `px`.
Point3 back_project_direction(const CameraModel& camera, const Point2& px);

/// Intersects the ray through `px` with `plane`. Returns false when the ray is parallel
/// to the plane or the hit lies behind the camera.
bool intersect_ray(const CameraModel& camera, const Point2& px, const Plane& plane, Point3& hit);

/// Projective plane map, stored with unit Frobenius norm and a positive largest-magnitude
/// entry. Always rank 3.
class Homography {
 public:
  Homography() : matrix_(Matrix3::Identity() / std::sqrt(3.0)) {}

  /// Normalizes `m`; throws DegenerateConfiguration when |det| <= 1e-12 after normalization.
  explicit Homography(const Matrix3& m);

  static Homography identity() { return Homography(); }

  const Matrix3& matrix() const { return matrix_; }
  Homography inverse() const;

  /// this after other: x -> this(other(x)).
  Homography compose(const Homography& other) const;

  /// 2x2 Jacobian of the dehomogenized map at `p`.
  Eigen::Matrix2d jacobian(const Point2& p) const;

 private:
  Matrix3 matrix_;
};

/// Image ellipse; `a` is the major semi-axis and `rotation_deg` its angle from image x.
struct Ellipse {
  Point2 center = Point2::Zero();
  double a = 0.0;
  double b = 0.0;
  double rotation_deg = 0.0;

  bool contains(const Point2& p, double dilation = 0.0) const;
};

/// Throws PointAtInfinity when the homogeneous coordinate magnitude is < 1e-12.
Point2 apply_homography(const Homography& h, const Point2& p);

using PointPair = std::pair<Point2, Point2>;

struct HomographyEstimate {
  Homography homography;
  double rms = 0.0;  ///< Forward reprojection RMS in target units.
};

/// Normalized DLT. Throws InsufficientCorrespondences (< 4 pairs) or DegenerateConfiguration
/// (conditioning of the design matrix below 1e-10).
HomographyEstimate estimate_homography(std::span<const PointPair> pairs);

/// Forward reprojection RMS of `h` on `pairs`.
double reprojection_rms(const Homography& h, std::span<const PointPair> pairs);

struct RefineOptions {
  int max_iterations = 100;
  double relative_tolerance = 1e-10;
  int max_consecutive_escalations = 10;
};

struct RefineResult {
  Homography homography;
  double initial_rms = 0.0;
  double final_rms = 0.0;
  int iterations = 0;
};

/// Levenberg-Marquardt over the 8 free parameters of H minimizing summed squared forward
/// reprojection error. Never returns a worse fit than `initial`.
/// Throws DivergenceDetected when 10 consecutive damping escalations all raise the error.
RefineResult refine_homography(const Homography& initial, std::span<const PointPair> pairs,
                               const RefineOptions& options = {});

/// Homography between plane z = 0 (world cm, x/y) and the image of `camera`.
Homography ground_plane_to_image(const CameraModel& camera);

}  // namespace glasshands::geometry
