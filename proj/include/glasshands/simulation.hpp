#pragma once

#include "glasshands/geometry.hpp"
#include "glasshands/image.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace glasshands::sim {

using geometry::Point2;
using geometry::Point3;

using Rgb = std::array<double, 3>;

/// Ground-truth world state. World frame: workspace plane z = 0, units cm.
struct SceneState {
  Point2 phone_center_cm{0.0, 0.0};
  /// Half width (x) and half length (y) of the phone footprint.
  Point2 phone_half_extents_cm{3.5, 7.0};
  /// Red marker disc on the phone, offset from the phone center toward its camera end.
  Point2 marker_offset_cm{0.0, 4.5};
  double marker_radius_cm = 1.2;

  bool hand_visible = true;
  Point2 hand_cm{10.0, 0.0};
  double hand_height_cm = 0.0;
  double hand_radius_cm = 1.5;

  Point2 workspace_center_cm{0.0, 0.0};
  Point2 workspace_size_cm{65.0, 85.0};

  geometry::Plane reflector;
  geometry::CameraModel camera;
  double ambient = 1.0;
  TimestampMs timestamp_ms = 0;

  /// Throws InvalidArgument on negative hand height, non-positive extents, an ambient level
  /// outside [0, 1], or a phone footprint outside the workspace.
  void validate() const;
};

/// Front camera on the phone looking up at a planar reflector placed so the workspace
/// appears at 0.5 cm/px near the phone.
SceneState default_scene();

struct RenderConfig {
  int width = 1200;
  int height = 750;
  /// Full width and height of the lens region in the image.
  Point2 lens_size_px{130.0, 170.0};
  Point2 lens_offset_px{0.0, 0.0};
  double noise_sigma = 0.0;  ///< Gray levels.
  std::uint64_t seed = 0;
  /// Subsamples per axis on pixels straddling a material edge.
  int supersample = 4;
  /// Reference eye-to-surface distance for the hand-height size cue.
  double size_cue_distance_cm = 32.0;

  Rgb background{214, 214, 208};
  Rgb skin{205, 168, 140};
  Rgb lens{28, 28, 34};
  Rgb surface{40, 40, 46};
  Rgb phone_body{110, 20, 20};
  Rgb phone_marker{190, 40, 40};
  Rgb hand{25, 125, 25};

  void validate() const;
};

/// Sidecar record written next to each rendered frame.
struct GroundTruth {
  TimestampMs timestamp_ms = 0;
  std::optional<Point2> hand_ws_cm;
  std::optional<Point2> hand_px;
  double hand_radius_px = 0.0;
  Point2 phone_ws_cm = Point2::Zero();
  Point2 phone_px = Point2::Zero();
  /// Image positions of the phone corners (+x+y, -x+y, -x-y, +x-y in phone coordinates).
  std::array<Point2, 4> phone_corners_px{};
  geometry::Ellipse lens;
  bool touching = false;
};

struct RenderedFrame {
  Frame frame;
  GroundTruth truth;
};

/// Throws LensOutOfFrame when the lens ellipse misses the image.
RenderedFrame render_frame(const SceneState& scene, const RenderConfig& cfg);

/// Workspace-plane-to-image homography of the scene's virtual camera.
geometry::Homography workspace_to_image(const SceneState& scene);

/// Rendered hand radius in workspace cm after applying the height size cue.
double apparent_hand_radius_cm(const SceneState& scene, const RenderConfig& cfg);

/// Keyframe fields are optional; a missing field carries the previous keyframe's value.
struct Keyframe {
  TimestampMs t_ms = 0;
  std::optional<double> hand_x_cm;
  std::optional<double> hand_y_cm;
  std::optional<double> hand_h_cm;
  std::optional<bool> hand_visible;
  std::optional<double> phone_x_cm;
  std::optional<double> phone_y_cm;
  std::optional<double> ambient;
};

enum class Interpolation { Linear, Step };

struct TrajectorySpec {
  SceneState base = default_scene();
  std::vector<Keyframe> keyframes;
  Interpolation interpolation = Interpolation::Linear;
  /// Closed intervals during which hand height is forced to 0.
  std::vector<std::pair<TimestampMs, TimestampMs>> touch_intervals;
  double fps = 30.0;

  /// Throws InvalidArgument when keyframe times are not strictly increasing.
  void validate() const;
  TimestampMs start_ms() const;
  TimestampMs end_ms() const;
  /// Frame timestamps from the first to the last keyframe at `fps`.
  std::vector<TimestampMs> frame_times() const;
};

/// Throws OutOfRange for t outside [first, last] keyframe time.
SceneState sample_trajectory(const TrajectorySpec& spec, TimestampMs t);

}  // namespace glasshands::sim
