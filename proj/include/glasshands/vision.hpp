#pragma once

#include "glasshands/geometry.hpp"
#include "glasshands/image.hpp"

#include <optional>
#include <vector>

namespace glasshands::vision {

using geometry::Ellipse;
using geometry::Point2;

enum class BlobClass { Phone, Hand };

struct Blob {
  BlobClass cls = BlobClass::Hand;
  Point2 centroid = Point2::Zero();
  double area = 0.0;  ///< px^2
  double radius = 0.0;  ///< sqrt(area / pi)
  double confidence = 0.0;
};

struct DetectionResult {
  std::optional<Ellipse> lens;
  std::optional<Blob> phone;
  std::optional<Blob> hand;
  TimestampMs timestamp_ms = 0;

  /// Blobs only with a lens, and blob centroids inside the lens dilated by 2 px.
  bool well_formed() const;
};

struct LensConfig {
  double threshold_factor = 0.5;  ///< Dark if luminance < factor * frame mean.
  double min_area_px = 400.0;
};

/// Hue/saturation box of one marker class, hue in degrees.
struct ColorBox {
  double hue_center_deg = 0.0;
  double hue_halfwidth_deg = 15.0;
  double min_saturation = 0.5;
};

struct ColorConfig {
  ColorBox phone{0.0, 15.0, 0.5};
  ColorBox hand{120.0, 20.0, 0.4};
  /// Value floor relative to the median value inside the region of interest; rejects
  /// dark noise pixels whose hue happens to fall into a box.
  double min_value_ratio = 1.8;
  double min_area_px = 12.0;
};

struct VisionConfig {
  LensConfig lens;
  ColorConfig color;
};

/// Dark regions (4-connected, area >= min area) fitted by moments, largest first.
std::vector<Ellipse> detect_lens_regions(const Frame& frame, const LensConfig& cfg = {});

/// Marker-colored components inside `roi`, largest first; ties broken by leftmost centroid.
std::vector<Blob> detect_color_blobs(const Frame& frame, const Ellipse& roi, BlobClass cls,
                                     const ColorConfig& cfg = {});

/// Largest lens, then the largest phone and hand blobs inside it.
DetectionResult detect(const Frame& frame, const VisionConfig& cfg = {});

/// 255 where a pixel is below the lens threshold.
GrayImage lens_mask(const Frame& frame, const LensConfig& cfg = {});

/// 255 where a pixel inside `roi` falls into the class color box.
GrayImage class_mask(const Frame& frame, const Ellipse& roi, BlobClass cls, const ColorConfig& cfg = {});

struct TrackerConfig {
  double alpha = 0.4;
  int reset_after_misses = 5;

  /// Throws InvalidArgument unless alpha lies in (0, 1] and the reset count is >= 0.
  void validate() const;
};

struct TrackState {
  TrackerConfig cfg;
  std::optional<Point2> position;
  int misses = 0;
  TimestampMs last_update_ms = 0;
};

struct TrackUpdate {
  TrackState state;
  std::optional<Point2> position;
};

/// Exponential moving average with hold-and-reset on missed detections.
TrackUpdate track(const TrackState& state, const std::optional<Point2>& measurement, TimestampMs t);

}  // namespace glasshands::vision
