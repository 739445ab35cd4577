#pragma once

#include "glasshands/geometry.hpp"
#include "glasshands/image.hpp"
#include "glasshands/vision.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace glasshands::calib {

using geometry::Homography;
using geometry::Point2;

enum class CorrespondenceSource { PhoneCorner, GuidedTap, Synthetic };

std::string_view to_string(CorrespondenceSource s);

struct Correspondence {
  Point2 image_px = Point2::Zero();
  Point2 workspace_cm = Point2::Zero();
  CorrespondenceSource source = CorrespondenceSource::Synthetic;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  /// Image position that must map to the workspace origin. When absent, the fitted map's
  /// own preimage of (0, 0) is used.
  std::optional<Point2> anchor_px;

  /// Throws InvalidArgument on non-finite coordinates.
  void validate() const;
};

/// Lens-image pixels to phone-anchored workspace cm (+x toward the phone's right edge,
/// +y toward its camera end).
struct CalibrationMap {
  Homography homography;
  double rms_cm = 0.0;
  /// Singular values of the map Jacobian at the anchor, larger first.
  Point2 scale_cm_per_px = Point2::Zero();
  Point2 anchor_px = Point2::Zero();
  TimestampMs created_ms = 0;
  /// Lens center at calibration time; used to detect head motion.
  std::optional<Point2> lens_center_px;
};

/// DLT, refinement, then translation so the anchor maps to (0, 0).
/// Throws InsufficientCorrespondences or DegenerateConfiguration.
CalibrationMap run_calibration(const CorrespondenceSet& set, TimestampMs created_ms = 0);

/// Throws PointAtInfinity.
Point2 map_to_workspace(const CalibrationMap& calib, const Point2& px);

/// Inverse map, workspace cm to lens-image px.
Point2 map_to_image(const CalibrationMap& calib, const Point2& cm);

inline constexpr double kStaleLensDriftPx = 10.0;

/// True when the lens center moved more than `max_drift_px` since calibration.
bool is_stale(const CalibrationMap& calib, const Point2& lens_center_px, double max_drift_px = kStaleLensDriftPx);

struct PhoneCornerConfig {
  /// Physical half width (x) and half length (y) of the phone footprint, cm.
  Point2 phone_half_extents_cm{3.5, 7.0};
  /// The reflection reverses handedness, so +x lies opposite the image-space left normal of +y.
  bool mirrored = true;
  /// Frames whose hand blob comes closer than this to the phone outline are skipped.
  double hand_clearance_px = 6.0;
  /// Accepted relative deviation of the measured side-length ratio from the physical one.
  double max_aspect_error = 0.15;
  /// Accepted RMS distance of edge samples from their fitted side line.
  double max_edge_rms_px = 0.6;
};

/// Subpixel phone corners in the frame, ordered (+x+y, -x+y, -x-y, +x-y) in phone coordinates.
/// Empty when the frame is unsuitable (no phone, hand too close, inconsistent outline).
std::optional<std::array<Point2, 4>> find_phone_corners(const Frame& frame, const vision::DetectionResult& det,
                                                        const PhoneCornerConfig& cfg = {});

/// Corner correspondences from one frame, or empty when the frame is unsuitable.
std::optional<CorrespondenceSet> phone_corner_correspondences(const Frame& frame,
                                                              const vision::DetectionResult& det,
                                                              const PhoneCornerConfig& cfg = {});

/// Calibrates from one frame. Throws CalibrationFailed when no usable phone outline is found.
CalibrationMap calibrate_from_frame(const Frame& frame, const vision::DetectionResult& det,
                                    const PhoneCornerConfig& cfg = {});

/// JSON document: matrix (row-major), rms_cm, scale_cm_per_px, anchor_px, created_ms,
/// lens_center_px.
std::string to_json(const CalibrationMap& calib);

/// Throws CalibrationFailed on a malformed document.
CalibrationMap from_json(std::string_view text);

/// Throws IoError.
void save_calibration(const std::filesystem::path& path, const CalibrationMap& calib);

/// Throws InputNotFound or CalibrationFailed.
CalibrationMap load_calibration(const std::filesystem::path& path);

}  // namespace glasshands::calib
