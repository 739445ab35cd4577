#pragma once

#include "glasshands/calibration.hpp"
#include "glasshands/interaction.hpp"
#include "glasshands/vision.hpp"

#include <optional>
#include <string>
#include <vector>

namespace glasshands::io {

struct PipelineConfig {
  vision::VisionConfig vision;
  vision::TrackerConfig tracker;
  interaction::GestureConfig gesture;
  calib::PhoneCornerConfig phone;
  interaction::WorkspaceLayout layout;
  /// Preloaded map; when absent the pipeline calibrates from the first usable frame.
  std::optional<calib::CalibrationMap> calibration;
  /// Recalibrate when the lens center drifts beyond the staleness limit.
  bool auto_recalibrate = true;
  std::string session = "offline";
};

struct FrameOutput {
  vision::DetectionResult detection;
  bool calibrated = false;
  /// Unfiltered hand position mapped to the workspace.
  std::optional<geometry::Point2> hand_raw_cm;
  /// Tracked (EMA) hand position mapped to the workspace.
  std::optional<geometry::Point2> hand_cm;
  double hand_radius_cm = 0.0;
  interaction::Zone zone = interaction::Zone::OutOfRange;
  bool touching = false;
  interaction::Phase phase = interaction::Phase::Idle;
  std::vector<interaction::InputEvent> events;
};

/// detect -> calibrate (once, or after head motion) -> map -> track -> touch -> gesture.
/// Single-owner; frames must arrive in timestamp order.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg = {});

  /// Throws CorruptFrame for an inconsistent buffer and NonMonotonicTimestamp for
  /// out-of-order frames.
  FrameOutput process(const Frame& frame);

  const std::optional<calib::CalibrationMap>& calibration() const { return calibration_; }
  const interaction::GestureState& gesture_state() const { return gesture_; }
  const PipelineConfig& config() const { return cfg_; }
  int frames_processed() const { return frames_; }

 private:
  PipelineConfig cfg_;
  std::optional<calib::CalibrationMap> calibration_;
  vision::TrackState track_;
  std::optional<double> last_radius_cm_;
  std::optional<geometry::Point2> prev_raw_cm_;
  std::optional<TimestampMs> prev_raw_t_;
  interaction::TouchDetector touch_;
  interaction::GestureState gesture_;
  int frames_ = 0;
};

/// One JSON object per frame: t_ms, lens, phone, hand, calibrated, hand_raw_cm, hand_cm,
/// hand_radius_cm, zone, touching, phase.
std::string detection_json(const FrameOutput& out);

}  // namespace glasshands::io
