#pragma once

#include "glasshands/geometry.hpp"
#include "glasshands/image.hpp"

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace glasshands::interaction {

using geometry::Point2;

enum class Zone { Display, Around, OutOfRange };

std::string_view to_string(Zone z);

/// Phone footprint and workspace bounds, both centered on the phone, cm.
struct WorkspaceLayout {
  Point2 phone_half_extents_cm{3.5, 7.0};
  Point2 bounds_half_extents_cm{32.5, 42.5};
};

Zone classify_zone(const WorkspaceLayout& layout, const Point2& p_cm);

struct GestureConfig {
  double tap_max_ms = 300.0;
  double tap_max_displacement_cm = 1.5;
  double drag_start_cm = 1.5;
  double slide_min_speed_cm_s = 20.0;
  double slide_min_duration_ms = 150.0;
  double hold_min_ms = 600.0;
  int touch_dwell_frames = 3;
  double touch_speed_cm_s = 2.0;
  /// Hand radius on the surface and the accepted relative deviation for the size cue.
  double surface_radius_cm = 1.5;
  double radius_tolerance = 0.1;
  bool mid_air = false;

  /// Throws InvalidArgument unless every threshold is positive.
  void validate() const;
};

struct TouchSample {
  TimestampMs t_ms = 0;
  Point2 position_cm = Point2::Zero();
  double radius_cm = 0.0;
};

/// Onset test over the last `touch_dwell_frames` samples. Surface mode: net speed below the
/// threshold and mean radius within tolerance of the surface radius. Mid-air mode: the size
/// cue is ignored and a still hand counts as engaged.
/// Throws InsufficientHistory with fewer samples than the dwell count.
bool detect_touch(std::span<const TouchSample> samples, const GestureConfig& cfg);

/// Contact maintenance test once touching: size cue only in surface mode, presence in mid-air.
bool still_touching(std::span<const TouchSample> samples, const GestureConfig& cfg);

/// Stateful wrapper: onset via detect_touch, then held while still_touching.
class TouchDetector {
 public:
  explicit TouchDetector(GestureConfig cfg = {}) : cfg_(cfg) {}
  /// Returns the touch state after adding `sample`; nullopt clears the history.
  bool update(const std::optional<TouchSample>& sample);
  bool touching() const { return touching_; }
  void reset();

 private:
  GestureConfig cfg_;
  std::deque<TouchSample> history_;
  bool touching_ = false;
};

enum class EventKind { Tap, DragStart, DragMove, DragEnd, SlideLeft, SlideRight, HoldStart, Release };

std::string_view to_string(EventKind k);

struct InputEvent {
  EventKind kind = EventKind::Tap;
  Point2 position_cm = Point2::Zero();
  Zone zone = Zone::Around;
  TimestampMs t_ms = 0;
  std::string session;
};

/// One JSON object: kind, x_cm, y_cm, zone, t_ms, session.
std::string to_json(const InputEvent& e);

enum class Phase { Idle, Hovering, TouchPending, TouchDown, Dragging, Holding };

std::string_view to_string(Phase p);

struct GestureSample {
  TimestampMs t_ms = 0;
  std::optional<Point2> position_cm;  ///< Absent when no hand is tracked.
  Zone zone = Zone::OutOfRange;
  bool touching = false;
  /// Measured velocity; when absent it is differenced from consecutive positions.
  std::optional<Point2> velocity_cm_s;
};

struct GestureState {
  Phase phase = Phase::Idle;
  TimestampMs entered_ms = 0;
  Point2 anchor_cm = Point2::Zero();
  Zone anchor_zone = Zone::OutOfRange;
  Point2 last_cm = Point2::Zero();
  Zone last_zone = Zone::OutOfRange;
  Point2 velocity_cm_s = Point2::Zero();

  std::optional<TimestampMs> last_t_ms;
  TimestampMs touch_start_ms = 0;
  int slide_sign = 0;
  TimestampMs slide_start_ms = 0;
  bool slide_emitted = false;
};

struct GestureUpdate {
  GestureState state;
  std::vector<InputEvent> events;
};

/// Idle -> Hovering -> TouchPending -> TouchDown -> {Tap, Dragging, Holding}; slides from
/// Hovering. Throws NonMonotonicTimestamp when t goes backwards.
GestureUpdate update_gesture(const GestureState& state, const GestureSample& sample, const GestureConfig& cfg,
                             const std::string& session = {});

/// Localization standard deviation in cm: one pixel at the given scale, reduced by the
/// variance factor of an EMA (weight alpha) over `frames` samples. frames <= 1 means none.
double localization_sigma_cm(double scale_cm_per_px, double alpha = 1.0, int frames = 1);

/// Variance factor of an EMA seeded with the first of `frames` samples.
double ema_variance_factor(double alpha, int frames);

/// Greedy clustering of touch-down events (Tap, DragStart, HoldStart) inside the window
/// starting at the first such event. Points closer than `merge_radius_cm` to a cluster
/// center join it; centers are running means.
std::vector<Point2> resolve_two_touches(std::span<const InputEvent> events, TimestampMs window_ms,
                                        double merge_radius_cm);

}  // namespace glasshands::interaction
