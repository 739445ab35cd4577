#include "glasshands/interaction.hpp"

#include "glasshands/error.hpp"

#include <json.hpp>

#include <cmath>

namespace glasshands::interaction {

std::string_view to_string(Zone z) {
  switch (z) {
    case Zone::Display: return "Display";
    case Zone::Around: return "Around";
    case Zone::OutOfRange: return "OutOfRange";
  }
  return "OutOfRange";
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Tap: return "Tap";
    case EventKind::DragStart: return "DragStart";
    case EventKind::DragMove: return "DragMove";
    case EventKind::DragEnd: return "DragEnd";
    case EventKind::SlideLeft: return "SlideLeft";
    case EventKind::SlideRight: return "SlideRight";
    case EventKind::HoldStart: return "HoldStart";
    case EventKind::Release: return "Release";
  }
  return "Tap";
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "Idle";
    case Phase::Hovering: return "Hovering";
    case Phase::TouchPending: return "TouchPending";
    case Phase::TouchDown: return "TouchDown";
    case Phase::Dragging: return "Dragging";
    case Phase::Holding: return "Holding";
  }
  return "Idle";
}

Zone classify_zone(const WorkspaceLayout& layout, const Point2& p) {
  if (std::abs(p.x()) <= layout.phone_half_extents_cm.x() && std::abs(p.y()) <= layout.phone_half_extents_cm.y()) {
    return Zone::Display;
  }
  if (std::abs(p.x()) <= layout.bounds_half_extents_cm.x() && std::abs(p.y()) <= layout.bounds_half_extents_cm.y()) {
    return Zone::Around;
  }
  return Zone::OutOfRange;
}

void GestureConfig::validate() const {
  const double values[] = {tap_max_ms,    tap_max_displacement_cm, drag_start_cm,     slide_min_speed_cm_s,
                           slide_min_duration_ms, hold_min_ms,    touch_speed_cm_s,  surface_radius_cm,
                           radius_tolerance};
  for (double v : values) {
    if (!(v > 0.0)) throw Error(ErrorCode::InvalidArgument, "gesture thresholds must be positive");
  }
  if (touch_dwell_frames < 1) throw Error(ErrorCode::InvalidArgument, "touch dwell must be at least one frame");
}

namespace {

double mean_radius(std::span<const TouchSample> w) {
  double r = 0.0;
  for (const auto& s : w) r += s.radius_cm;
  return r / static_cast<double>(w.size());
}

bool size_cue(std::span<const TouchSample> w, const GestureConfig& cfg) {
  return std::abs(mean_radius(w) / cfg.surface_radius_cm - 1.0) <= cfg.radius_tolerance;
}

std::span<const TouchSample> dwell_window(std::span<const TouchSample> samples, const GestureConfig& cfg) {
  const auto n = static_cast<size_t>(cfg.touch_dwell_frames);
  if (samples.size() < n) {
    throw Error(ErrorCode::InsufficientHistory,
                "touch detection needs " + std::to_string(n) + " samples, got " + std::to_string(samples.size()));
  }
  return samples.subspan(samples.size() - n);
}

}  // namespace

bool detect_touch(std::span<const TouchSample> samples, const GestureConfig& cfg) {
  cfg.validate();
  const auto w = dwell_window(samples, cfg);
  const double span_s = static_cast<double>(w.back().t_ms - w.front().t_ms) / 1000.0;
  const double travel = (w.back().position_cm - w.front().position_cm).norm();
  const bool still = span_s <= 0.0 ? travel == 0.0 : travel / span_s < cfg.touch_speed_cm_s;
  if (cfg.mid_air) return still;
  return still && size_cue(w, cfg);
}

bool still_touching(std::span<const TouchSample> samples, const GestureConfig& cfg) {
  cfg.validate();
  if (samples.empty()) return false;
  if (cfg.mid_air) return true;
  const auto n = std::min(samples.size(), static_cast<size_t>(cfg.touch_dwell_frames));
  return size_cue(samples.subspan(samples.size() - n), cfg);
}

bool TouchDetector::update(const std::optional<TouchSample>& sample) {
  if (!sample) {
    reset();
    return false;
  }
  history_.push_back(*sample);
  while (history_.size() > static_cast<size_t>(cfg_.touch_dwell_frames)) history_.pop_front();
  const std::vector<TouchSample> window(history_.begin(), history_.end());
  if (touching_) {
    touching_ = still_touching(window, cfg_);
  } else if (window.size() >= static_cast<size_t>(cfg_.touch_dwell_frames)) {
    touching_ = detect_touch(window, cfg_);
  }
  return touching_;
}

void TouchDetector::reset() {
  history_.clear();
  touching_ = false;
}

std::string to_json(const InputEvent& e) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(e.kind);
  j["x_cm"] = e.position_cm.x();
  j["y_cm"] = e.position_cm.y();
  j["zone"] = to_string(e.zone);
  j["t_ms"] = e.t_ms;
  j["session"] = e.session;
  return j.dump();
}

GestureUpdate update_gesture(const GestureState& state, const GestureSample& sample, const GestureConfig& cfg,
                             const std::string& session) {
  cfg.validate();
  if (state.last_t_ms && sample.t_ms < *state.last_t_ms) {
    throw Error(ErrorCode::NonMonotonicTimestamp, "sample at " + std::to_string(sample.t_ms) +
                                                      " ms precedes previous sample at " +
                                                      std::to_string(*state.last_t_ms) + " ms");
  }
  GestureUpdate out{state, {}};
  GestureState& s = out.state;
  const TimestampMs t = sample.t_ms;
  auto emit = [&](EventKind kind, const Point2& p, Zone z) { out.events.push_back({kind, p, z, t, session}); };
  auto enter = [&](Phase p) {
    s.phase = p;
    s.entered_ms = t;
  };
  auto reset_slide = [&] {
    s.slide_sign = 0;
    s.slide_emitted = false;
  };

  const bool present = sample.position_cm.has_value();
  const bool had_position = state.phase != Phase::Idle;
  if (present) {
    if (sample.velocity_cm_s) {
      s.velocity_cm_s = *sample.velocity_cm_s;
    } else if (had_position && state.last_t_ms && t > *state.last_t_ms) {
      s.velocity_cm_s = (*sample.position_cm - state.last_cm) * 1000.0 / static_cast<double>(t - *state.last_t_ms);
    } else {
      s.velocity_cm_s = Point2::Zero();
    }
  } else {
    s.velocity_cm_s = Point2::Zero();
  }
  const bool released = !present || !sample.touching;

  switch (state.phase) {
    case Phase::Idle:
      if (present) {
        enter(Phase::Hovering);
        reset_slide();
      }
      break;

    case Phase::Hovering:
      if (!present) {
        enter(Phase::Idle);
        reset_slide();
      } else if (sample.touching) {
        enter(Phase::TouchPending);
        s.anchor_cm = *sample.position_cm;
        s.anchor_zone = sample.zone;
        s.touch_start_ms = t;
        reset_slide();
      } else {
        const double vx = s.velocity_cm_s.x();
        const int sign = std::abs(vx) >= cfg.slide_min_speed_cm_s ? (vx > 0 ? 1 : -1) : 0;
        if (sign == 0) {
          reset_slide();
        } else {
          if (sign != s.slide_sign) {
            s.slide_sign = sign;
            s.slide_emitted = false;
            // The first fast velocity measurement covers the interval since the previous sample.
            s.slide_start_ms = state.last_t_ms ? *state.last_t_ms : t;
          }
          if (!s.slide_emitted && static_cast<double>(t - s.slide_start_ms) >= cfg.slide_min_duration_ms) {
            emit(sign > 0 ? EventKind::SlideRight : EventKind::SlideLeft, *sample.position_cm, sample.zone);
            s.slide_emitted = true;
          }
        }
      }
      break;

    case Phase::TouchPending:
      if (!present) {
        enter(Phase::Idle);
      } else if (sample.touching) {
        enter(Phase::TouchDown);
      } else {
        enter(Phase::Hovering);
        reset_slide();
      }
      break;

    case Phase::TouchDown:
      if (released) {
        const double duration = static_cast<double>(t - s.touch_start_ms);
        const double moved = (state.last_cm - s.anchor_cm).norm();
        if (duration <= cfg.tap_max_ms && moved <= cfg.tap_max_displacement_cm) {
          emit(EventKind::Tap, s.anchor_cm, s.anchor_zone);
        }
        enter(Phase::Idle);
      } else if ((*sample.position_cm - s.anchor_cm).norm() > cfg.drag_start_cm) {
        emit(EventKind::DragStart, s.anchor_cm, s.anchor_zone);
        emit(EventKind::DragMove, *sample.position_cm, sample.zone);
        enter(Phase::Dragging);
      } else if (static_cast<double>(t - s.touch_start_ms) >= cfg.hold_min_ms) {
        emit(EventKind::HoldStart, s.anchor_cm, s.anchor_zone);
        enter(Phase::Holding);
      }
      break;

    case Phase::Dragging:
      if (released) {
        emit(EventKind::DragEnd, state.last_cm, state.last_zone);
        enter(Phase::Idle);
      } else {
        emit(EventKind::DragMove, *sample.position_cm, sample.zone);
      }
      break;

    case Phase::Holding:
      if (released) {
        emit(EventKind::Release, state.last_cm, state.last_zone);
        enter(Phase::Idle);
      }
      break;
  }

  if (present) {
    s.last_cm = *sample.position_cm;
    s.last_zone = sample.zone;
  }
  s.last_t_ms = t;
  return out;
}

double ema_variance_factor(double alpha, int frames) {
  if (frames <= 1 || alpha >= 1.0) return 1.0;
  const double keep = 1.0 - alpha;
  double sum = std::pow(keep, 2.0 * (frames - 1));
  for (int k = 2; k <= frames; ++k) sum += alpha * alpha * std::pow(keep, 2.0 * (frames - k));
  return sum;
}

double localization_sigma_cm(double scale_cm_per_px, double alpha, int frames) {
  return scale_cm_per_px * std::sqrt(ema_variance_factor(alpha, frames));
}

std::vector<Point2> resolve_two_touches(std::span<const InputEvent> events, TimestampMs window_ms,
                                        double merge_radius_cm) {
  struct Cluster {
    Point2 sum = Point2::Zero();
    int n = 0;
    Point2 center() const { return sum / n; }
  };
  std::vector<Cluster> clusters;
  std::optional<TimestampMs> start;
  for (const auto& e : events) {
    if (e.kind != EventKind::Tap && e.kind != EventKind::DragStart && e.kind != EventKind::HoldStart) continue;
    if (!start) start = e.t_ms;
    if (e.t_ms - *start > window_ms) continue;
    Cluster* best = nullptr;
    double best_d = merge_radius_cm;
    for (auto& c : clusters) {
      const double d = (c.center() - e.position_cm).norm();
      if (d < best_d) {
        best_d = d;
        best = &c;
      }
    }
    if (best) {
      best->sum += e.position_cm;
      ++best->n;
    } else {
      clusters.push_back({e.position_cm, 1});
    }
  }
  std::vector<Point2> out;
  for (const auto& c : clusters) out.push_back(c.center());
  return out;
}

}  // namespace glasshands::interaction
