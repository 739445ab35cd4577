#include "glasshands/pipeline.hpp"

#include "glasshands/error.hpp"
#include "json_util.hpp"

#include <cmath>

namespace glasshands::io {

using geometry::Point2;

Pipeline::Pipeline(PipelineConfig cfg)
    : cfg_(std::move(cfg)), calibration_(cfg_.calibration), touch_(cfg_.gesture) {
  cfg_.tracker.validate();
  cfg_.gesture.validate();
  track_.cfg = cfg_.tracker;
}

FrameOutput Pipeline::process(const Frame& frame) {
  if (!frame.valid()) throw Error(ErrorCode::CorruptFrame, "frame buffer does not match its size");
  if (gesture_.last_t_ms && frame.timestamp_ms < *gesture_.last_t_ms) {
    throw Error(ErrorCode::NonMonotonicTimestamp, "frame at " + std::to_string(frame.timestamp_ms) +
                                                      " ms precedes the previous frame");
  }
  ++frames_;
  FrameOutput out;
  out.detection = vision::detect(frame, cfg_.vision);
  const auto& det = out.detection;

  if (calibration_ && det.lens && cfg_.auto_recalibrate && calib::is_stale(*calibration_, det.lens->center)) {
    calibration_.reset();
  }
  if (!calibration_ && det.lens && det.phone) {
    try {
      calibration_ = calib::calibrate_from_frame(frame, det, cfg_.phone);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CalibrationFailed) throw;
    }
  }
  out.calibrated = calibration_.has_value();

  std::optional<Point2> measured_px;
  if (out.calibrated && det.hand) {
    measured_px = det.hand->centroid;
    out.hand_raw_cm = calib::map_to_workspace(*calibration_, det.hand->centroid);
    const double area_scale = std::abs(calibration_->homography.jacobian(det.hand->centroid).determinant());
    last_radius_cm_ = det.hand->radius * std::sqrt(area_scale);
  }
  const auto tracked = vision::track(track_, measured_px, frame.timestamp_ms);
  track_ = tracked.state;

  std::optional<Point2> velocity;
  if (out.hand_raw_cm) {
    if (prev_raw_cm_ && prev_raw_t_ && frame.timestamp_ms > *prev_raw_t_) {
      velocity = (*out.hand_raw_cm - *prev_raw_cm_) * 1000.0 / static_cast<double>(frame.timestamp_ms - *prev_raw_t_);
    }
    prev_raw_cm_ = out.hand_raw_cm;
    prev_raw_t_ = frame.timestamp_ms;
  } else {
    prev_raw_cm_.reset();
    prev_raw_t_.reset();
  }

  std::optional<interaction::TouchSample> touch_sample;
  if (tracked.position && out.calibrated) {
    out.hand_cm = calib::map_to_workspace(*calibration_, *tracked.position);
    out.hand_radius_cm = last_radius_cm_.value_or(0.0);
    out.zone = interaction::classify_zone(cfg_.layout, *out.hand_cm);
    touch_sample = interaction::TouchSample{frame.timestamp_ms, *out.hand_cm, out.hand_radius_cm};
  } else {
    last_radius_cm_.reset();
  }
  out.touching = touch_.update(touch_sample);

  interaction::GestureSample gs;
  gs.t_ms = frame.timestamp_ms;
  gs.position_cm = out.hand_cm;
  gs.zone = out.zone;
  gs.touching = out.touching;
  gs.velocity_cm_s = out.hand_cm ? velocity.value_or(Point2::Zero()) : Point2::Zero();
  auto update = interaction::update_gesture(gesture_, gs, cfg_.gesture, cfg_.session);
  gesture_ = update.state;
  out.phase = gesture_.phase;
  out.events = std::move(update.events);
  return out;
}

std::string detection_json(const FrameOutput& out) { return detail::detection_object(out).dump(); }

}  // namespace glasshands::io
