#include "glasshands/session.hpp"

#include "glasshands/error.hpp"
#include "glasshands/image.hpp"
#include "json_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

namespace glasshands::io {

namespace fs = std::filesystem;
using detail::json;
using geometry::Point2;

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Offline: return "offline";
    case Mode::SimLive: return "sim-live";
    case Mode::FramesLive: return "frames-live";
  }
  return "offline";
}

Mode parse_mode(std::string_view s) {
  if (s == "offline") return Mode::Offline;
  if (s == "sim-live") return Mode::SimLive;
  if (s == "frames-live") return Mode::FramesLive;
  throw Error(ErrorCode::InvalidArgument, "unknown mode '" + std::string(s) + "'");
}

void SessionConfig::validate() const {
  render.validate();
  pipeline.tracker.validate();
  pipeline.gesture.validate();
  if (mode == Mode::Offline && !input) throw Error(ErrorCode::InvalidArgument, "offline mode needs an input path");
  if (calibration_source == CalibrationSource::File && !calibration_path) {
    throw Error(ErrorCode::InvalidArgument, "file calibration needs a calibration path");
  }
  if (mode != Mode::Offline && port == 0) throw Error(ErrorCode::InvalidArgument, "live modes need a port");
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InputNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

json parse_json(std::string_view text, ErrorCode code, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(code, std::string(what) + ": " + e.what());
  }
}

// Typed field access with InvalidArgument on a wrong type.
struct Reader {
  const json& j;
  std::string where;
  ErrorCode code = ErrorCode::InvalidArgument;

  [[noreturn]] void fail(const std::string& key, const char* expected) const {
    throw Error(code, where + "." + key + " must be " + expected);
  }
  double number(const std::string& key, const json& v) const {
    if (!v.is_number()) fail(key, "a number");
    return v.get<double>();
  }
  std::int64_t integer(const std::string& key, const json& v) const {
    if (!v.is_number_integer()) fail(key, "an integer");
    return v.get<std::int64_t>();
  }
  bool boolean(const std::string& key, const json& v) const {
    if (!v.is_boolean()) fail(key, "a boolean");
    return v.get<bool>();
  }
  std::string string(const std::string& key, const json& v) const {
    if (!v.is_string()) fail(key, "a string");
    return v.get<std::string>();
  }
  Point2 point(const std::string& key, const json& v) const {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) fail(key, "[x, y]");
    return {v[0].get<double>(), v[1].get<double>()};
  }
};

template <typename F>
void for_each_field(const json& j, const std::string& where, F&& f) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!f(key, value)) throw Error(ErrorCode::InvalidArgument, "unknown key " + where + "." + key);
  }
}

void apply_render(const json& j, sim::RenderConfig& r) {
  const Reader rd{j, "render"};
  for_each_field(j, "render", [&](const std::string& k, const json& v) {
    if (k == "noise_sigma") r.noise_sigma = rd.number(k, v);
    else if (k == "seed") r.seed = static_cast<std::uint64_t>(rd.integer(k, v));
    else if (k == "supersample") r.supersample = static_cast<int>(rd.integer(k, v));
    else if (k == "size_cue_distance_cm") r.size_cue_distance_cm = rd.number(k, v);
    else if (k == "lens_size_px") r.lens_size_px = rd.point(k, v);
    else if (k == "lens_offset_px") r.lens_offset_px = rd.point(k, v);
    else return false;
    return true;
  });
}

void apply_scene(const json& j, sim::SceneState& s) {
  const Reader rd{j, "scene"};
  for_each_field(j, "scene", [&](const std::string& k, const json& v) {
    if (k == "phone_x_cm") s.phone_center_cm.x() = rd.number(k, v);
    else if (k == "phone_y_cm") s.phone_center_cm.y() = rd.number(k, v);
    else if (k == "hand_radius_cm") s.hand_radius_cm = rd.number(k, v);
    else if (k == "ambient") s.ambient = rd.number(k, v);
    else return false;
    return true;
  });
}

void apply_gesture(const json& j, interaction::GestureConfig& g) {
  const Reader rd{j, "gesture"};
  for_each_field(j, "gesture", [&](const std::string& k, const json& v) {
    if (k == "tap_max_ms") g.tap_max_ms = rd.number(k, v);
    else if (k == "tap_max_displacement_cm") g.tap_max_displacement_cm = rd.number(k, v);
    else if (k == "drag_start_cm") g.drag_start_cm = rd.number(k, v);
    else if (k == "slide_min_speed_cm_s") g.slide_min_speed_cm_s = rd.number(k, v);
    else if (k == "slide_min_duration_ms") g.slide_min_duration_ms = rd.number(k, v);
    else if (k == "hold_min_ms") g.hold_min_ms = rd.number(k, v);
    else if (k == "touch_dwell_frames") g.touch_dwell_frames = static_cast<int>(rd.integer(k, v));
    else if (k == "touch_speed_cm_s") g.touch_speed_cm_s = rd.number(k, v);
    else if (k == "surface_radius_cm") g.surface_radius_cm = rd.number(k, v);
    else if (k == "radius_tolerance") g.radius_tolerance = rd.number(k, v);
    else if (k == "mid_air") g.mid_air = rd.boolean(k, v);
    else return false;
    return true;
  });
}

void apply_tracker(const json& j, vision::TrackerConfig& t) {
  const Reader rd{j, "tracker"};
  for_each_field(j, "tracker", [&](const std::string& k, const json& v) {
    if (k == "alpha") t.alpha = rd.number(k, v);
    else if (k == "reset_after_misses") t.reset_after_misses = static_cast<int>(rd.integer(k, v));
    else return false;
    return true;
  });
}

void apply_vision(const json& j, vision::VisionConfig& c) {
  const Reader rd{j, "vision"};
  for_each_field(j, "vision", [&](const std::string& k, const json& v) {
    if (k == "lens_threshold_factor") c.lens.threshold_factor = rd.number(k, v);
    else if (k == "lens_min_area_px") c.lens.min_area_px = rd.number(k, v);
    else if (k == "min_value_ratio") c.color.min_value_ratio = rd.number(k, v);
    else if (k == "min_blob_area_px") c.color.min_area_px = rd.number(k, v);
    else return false;
    return true;
  });
}

void apply_calibration(const json& j, SessionConfig& cfg) {
  const Reader rd{j, "calibration"};
  for_each_field(j, "calibration", [&](const std::string& k, const json& v) {
    if (k == "source") {
      const auto s = rd.string(k, v);
      if (s == "auto-phone-corners") cfg.calibration_source = CalibrationSource::AutoPhoneCorners;
      else if (s == "file") cfg.calibration_source = CalibrationSource::File;
      else throw Error(ErrorCode::InvalidArgument, "unknown calibration source '" + s + "'");
    } else if (k == "path") {
      cfg.calibration_path = rd.string(k, v);
    } else if (k == "auto_recalibrate") {
      cfg.pipeline.auto_recalibrate = rd.boolean(k, v);
    } else {
      return false;
    }
    return true;
  });
}

}  // namespace

SessionConfig parse_session_config(std::string_view text, SessionConfig cfg) {
  const json j = parse_json(text, ErrorCode::InvalidArgument, "config is not valid JSON");
  const Reader rd{j, "config"};
  for_each_field(j, "config", [&](const std::string& k, const json& v) {
    if (k == "mode") cfg.mode = parse_mode(rd.string(k, v));
    else if (k == "input") cfg.input = rd.string(k, v);
    else if (k == "out") cfg.out_dir = rd.string(k, v);
    else if (k == "mask_dump") cfg.mask_dump_dir = rd.string(k, v);
    else if (k == "session") cfg.pipeline.session = rd.string(k, v);
    else if (k == "host") cfg.host = rd.string(k, v);
    else if (k == "port") {
      const auto p = rd.integer(k, v);
      if (p < 0 || p > 65535) throw Error(ErrorCode::InvalidArgument, "port out of range");
      cfg.port = static_cast<std::uint16_t>(p);
    } else if (k == "seed") cfg.render.seed = static_cast<std::uint64_t>(rd.integer(k, v));
    else if (k == "render") apply_render(v, cfg.render);
    else if (k == "scene") apply_scene(v, cfg.scene);
    else if (k == "gesture") apply_gesture(v, cfg.pipeline.gesture);
    else if (k == "tracker") apply_tracker(v, cfg.pipeline.tracker);
    else if (k == "vision") apply_vision(v, cfg.pipeline.vision);
    else if (k == "calibration") apply_calibration(v, cfg);
    else return false;
    return true;
  });
  cfg.render.validate();
  cfg.scene.validate();
  cfg.pipeline.tracker.validate();
  cfg.pipeline.gesture.validate();
  return cfg;
}

SessionConfig load_session_config(const fs::path& path, SessionConfig base) {
  return parse_session_config(read_text(path), std::move(base));
}

namespace {

json config_object(const SessionConfig& cfg) {
  const auto& r = cfg.render;
  const auto& g = cfg.pipeline.gesture;
  json j;
  j["mode"] = to_string(cfg.mode);
  j["session"] = cfg.pipeline.session;
  j["input"] = cfg.input ? json(cfg.input->string()) : json(nullptr);
  j["out"] = cfg.out_dir.string();
  j["render"] = json{{"width", r.width},
                     {"height", r.height},
                     {"lens_size_px", json::array({r.lens_size_px.x(), r.lens_size_px.y()})},
                     {"noise_sigma", r.noise_sigma},
                     {"seed", r.seed},
                     {"supersample", r.supersample},
                     {"size_cue_distance_cm", r.size_cue_distance_cm}};
  j["tracker"] = json{{"alpha", cfg.pipeline.tracker.alpha},
                      {"reset_after_misses", cfg.pipeline.tracker.reset_after_misses}};
  j["gesture"] = json{{"tap_max_ms", g.tap_max_ms},
                      {"tap_max_displacement_cm", g.tap_max_displacement_cm},
                      {"drag_start_cm", g.drag_start_cm},
                      {"slide_min_speed_cm_s", g.slide_min_speed_cm_s},
                      {"slide_min_duration_ms", g.slide_min_duration_ms},
                      {"hold_min_ms", g.hold_min_ms},
                      {"touch_dwell_frames", g.touch_dwell_frames},
                      {"touch_speed_cm_s", g.touch_speed_cm_s},
                      {"surface_radius_cm", g.surface_radius_cm},
                      {"radius_tolerance", g.radius_tolerance},
                      {"mid_air", g.mid_air}};
  j["calibration"] = json{
      {"source", cfg.calibration_source == CalibrationSource::File ? "file" : "auto-phone-corners"},
      {"path", cfg.calibration_path ? json(cfg.calibration_path->string()) : json(nullptr)},
      {"auto_recalibrate", cfg.pipeline.auto_recalibrate}};
  return j;
}

}  // namespace

std::string config_echo(const SessionConfig& cfg) { return config_object(cfg).dump(); }

// ---------------------------------------------------------------------------------------------
// Trajectories and sidecars

sim::TrajectorySpec parse_trajectory(std::string_view text, const sim::SceneState& base) {
  const json j = parse_json(text, ErrorCode::InvalidArgument, "trajectory is not valid JSON");
  sim::TrajectorySpec spec;
  spec.base = base;
  const Reader rd{j, "trajectory"};
  bool have_keyframes = false;
  for_each_field(j, "trajectory", [&](const std::string& k, const json& v) {
    if (k == "fps") {
      spec.fps = rd.number(k, v);
    } else if (k == "interpolation") {
      const auto s = rd.string(k, v);
      if (s == "linear") spec.interpolation = sim::Interpolation::Linear;
      else if (s == "step") spec.interpolation = sim::Interpolation::Step;
      else throw Error(ErrorCode::InvalidArgument, "unknown interpolation '" + s + "'");
    } else if (k == "base") {
      apply_scene(v, spec.base);
    } else if (k == "touch_intervals") {
      if (!v.is_array()) rd.fail(k, "an array");
      for (const auto& iv : v) {
        if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number_integer() || !iv[1].is_number_integer()) {
          rd.fail(k, "a list of [start_ms, end_ms]");
        }
        spec.touch_intervals.emplace_back(iv[0].get<TimestampMs>(), iv[1].get<TimestampMs>());
      }
    } else if (k == "keyframes") {
      if (!v.is_array()) rd.fail(k, "an array");
      have_keyframes = true;
      for (const auto& item : v) {
        sim::Keyframe kf;
        bool has_t = false;
        const Reader kr{item, "keyframe"};
        for_each_field(item, "keyframe", [&](const std::string& kk, const json& vv) {
          if (kk == "t_ms") {
            kf.t_ms = kr.integer(kk, vv);
            has_t = true;
          } else if (kk == "hand_x_cm") kf.hand_x_cm = kr.number(kk, vv);
          else if (kk == "hand_y_cm") kf.hand_y_cm = kr.number(kk, vv);
          else if (kk == "hand_h_cm") kf.hand_h_cm = kr.number(kk, vv);
          else if (kk == "hand_visible") kf.hand_visible = kr.boolean(kk, vv);
          else if (kk == "phone_x_cm") kf.phone_x_cm = kr.number(kk, vv);
          else if (kk == "phone_y_cm") kf.phone_y_cm = kr.number(kk, vv);
          else if (kk == "ambient") kf.ambient = kr.number(kk, vv);
          else return false;
          return true;
        });
        if (!has_t) throw Error(ErrorCode::InvalidArgument, "keyframe without t_ms");
        spec.keyframes.push_back(kf);
      }
    } else {
      return false;
    }
    return true;
  });
  if (!have_keyframes) throw Error(ErrorCode::InvalidArgument, "trajectory has no keyframes");
  spec.base.validate();
  spec.validate();
  return spec;
}

sim::TrajectorySpec load_trajectory(const fs::path& path, const sim::SceneState& base) {
  return parse_trajectory(read_text(path), base);
}

std::string trajectory_to_json(const sim::TrajectorySpec& spec) {
  json j;
  j["fps"] = spec.fps;
  j["interpolation"] = spec.interpolation == sim::Interpolation::Step ? "step" : "linear";
  j["base"] = json{{"phone_x_cm", spec.base.phone_center_cm.x()},
                   {"phone_y_cm", spec.base.phone_center_cm.y()},
                   {"hand_radius_cm", spec.base.hand_radius_cm},
                   {"ambient", spec.base.ambient}};
  json kfs = json::array();
  for (const auto& k : spec.keyframes) {
    json o;
    o["t_ms"] = k.t_ms;
    if (k.hand_x_cm) o["hand_x_cm"] = *k.hand_x_cm;
    if (k.hand_y_cm) o["hand_y_cm"] = *k.hand_y_cm;
    if (k.hand_h_cm) o["hand_h_cm"] = *k.hand_h_cm;
    if (k.hand_visible) o["hand_visible"] = *k.hand_visible;
    if (k.phone_x_cm) o["phone_x_cm"] = *k.phone_x_cm;
    if (k.phone_y_cm) o["phone_y_cm"] = *k.phone_y_cm;
    if (k.ambient) o["ambient"] = *k.ambient;
    kfs.push_back(o);
  }
  j["keyframes"] = kfs;
  json iv = json::array();
  for (const auto& [a, b] : spec.touch_intervals) iv.push_back(json::array({a, b}));
  j["touch_intervals"] = iv;
  return j.dump(2);
}

std::string sidecar_json(const sim::GroundTruth& truth) { return detail::sidecar_object(truth).dump(); }

sim::GroundTruth parse_sidecar(std::string_view text) {
  const json j = parse_json(text, ErrorCode::CorruptFrame, "sidecar is not valid JSON");
  try {
    auto opt_point = [&](const char* key) -> std::optional<Point2> {
      const auto& v = j.at(key);
      if (v.is_null()) return std::nullopt;
      return Point2(v.at(0).get<double>(), v.at(1).get<double>());
    };
    sim::GroundTruth g;
    g.timestamp_ms = j.at("timestamp_ms").get<TimestampMs>();
    g.hand_ws_cm = opt_point("hand_ws_cm");
    g.hand_px = opt_point("hand_px");
    g.hand_radius_px = j.at("hand_radius_px").get<double>();
    g.phone_ws_cm = *opt_point("phone_ws_cm");
    g.phone_px = *opt_point("phone_px");
    const auto& corners = j.at("phone_corners_px");
    if (corners.size() != 4) throw Error(ErrorCode::CorruptFrame, "sidecar needs four phone corners");
    for (size_t i = 0; i < 4; ++i) g.phone_corners_px[i] = Point2(corners[i].at(0), corners[i].at(1));
    const auto& e = j.at("lens_ellipse");
    g.lens = {Point2(e.at("cx"), e.at("cy")), e.at("a"), e.at("b"), e.at("theta_deg")};
    g.touching = j.at("touching").get<bool>();
    return g;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFrame, std::string("malformed sidecar: ") + e.what());
  }
}

namespace {

std::string frame_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu", index);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

int render_to_directory(const sim::TrajectorySpec& spec, const sim::RenderConfig& cfg, const fs::path& dir) {
  ensure_dir(dir);
  const auto times = spec.frame_times();
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto rf = sim::render_frame(sim::sample_trajectory(spec, times[i]), cfg);
    write_ppm(dir / (frame_stem(i) + ".ppm"), rf.frame);
    write_text(dir / (frame_stem(i) + ".json"), sidecar_json(rf.truth) + "\n");
  }
  return static_cast<int>(times.size());
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::InputNotFound, "no frame directory at " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") out.push_back(e.path());
  }
  if (out.empty()) throw Error(ErrorCode::InputNotFound, "no .ppm frames in " + dir.string());
  std::sort(out.begin(), out.end());
  return out;
}

LoadedFrame load_frame(const fs::path& ppm, std::size_t index, double fps) {
  LoadedFrame lf;
  lf.frame = read_ppm(ppm);
  auto sidecar = ppm;
  sidecar.replace_extension(".json");
  if (fs::exists(sidecar)) {
    lf.truth = parse_sidecar(read_text(sidecar));
    lf.frame.timestamp_ms = lf.truth->timestamp_ms;
  } else {
    lf.frame.timestamp_ms = std::llround(static_cast<double>(index) * 1000.0 / fps);
  }
  return lf;
}

// ---------------------------------------------------------------------------------------------
// Reports

std::string report_json(const BenchmarkReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["localization_rmse_cm"] = opt(r.localization_rmse_cm);
  j["filtered_rmse_cm"] = opt(r.filtered_rmse_cm);
  j["scale_cm_per_px"] = detail::point_json(r.scale_cm_per_px);
  j["localization_samples"] = r.localization_samples;
  json sep = json::array();
  for (const auto& p : r.separation) {
    sep.push_back(json{{"distance_cm", p.distance_cm},
                       {"trials", p.trials},
                       {"single_frame_rate", p.single_frame_rate},
                       {"filtered_rate", p.filtered_rate}});
  }
  j["separation"] = sep;
  j["single_frame_threshold_cm"] = opt(r.single_frame_threshold_cm);
  j["filtered_threshold_cm"] = opt(r.filtered_threshold_cm);
  j["frames_processed"] = r.frames_processed;
  j["detection_records"] = r.detection_records;
  j["event_count"] = r.event_count;
  j["mean_latency_ms"] = r.mean_latency_ms;
  j["p95_latency_ms"] = r.p95_latency_ms;
  j["throughput_fps"] = r.throughput_fps;
  j["config"] = r.config_echo.empty() ? json(nullptr) : json::parse(r.config_echo);
  return j.dump(2);
}

namespace {

struct LatencyStats {
  std::vector<double> ms;
  void fill(BenchmarkReport& r) const {
    if (ms.empty()) return;
    double sum = 0.0;
    for (double v : ms) sum += v;
    r.mean_latency_ms = sum / static_cast<double>(ms.size());
    auto sorted = ms;
    std::sort(sorted.begin(), sorted.end());
    const auto k = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size()))) - 1;
    r.p95_latency_ms = sorted[std::min(k, sorted.size() - 1)];
    r.throughput_fps = sum > 0.0 ? 1000.0 * static_cast<double>(ms.size()) / sum : 0.0;
  }
};

struct ErrorAccumulator {
  double sq = 0.0;
  int n = 0;
  void add(const Point2& estimate, const Point2& truth) {
    sq += (estimate - truth).squaredNorm();
    ++n;
  }
  std::optional<double> rmse() const {
    if (n == 0) return std::nullopt;
    return std::sqrt(sq / n);
  }
};

double elapsed_ms(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

PipelineConfig pipeline_config(const SessionConfig& cfg) {
  PipelineConfig p = cfg.pipeline;
  if (cfg.calibration_source == CalibrationSource::File) {
    if (!cfg.calibration_path) throw Error(ErrorCode::InvalidArgument, "file calibration needs a calibration path");
    p.calibration = calib::load_calibration(*cfg.calibration_path);
  }
  return p;
}

void dump_masks(const fs::path& dir, std::size_t index, const Frame& frame, const FrameOutput& out,
                const vision::VisionConfig& vc) {
  ensure_dir(dir);
  const auto stem = frame_stem(index);
  write_pgm(dir / (stem + "_lens.pgm"), vision::lens_mask(frame, vc.lens));
  if (out.detection.lens) {
    write_pgm(dir / (stem + "_phone.pgm"),
              vision::class_mask(frame, *out.detection.lens, vision::BlobClass::Phone, vc.color));
    write_pgm(dir / (stem + "_hand.pgm"),
              vision::class_mask(frame, *out.detection.lens, vision::BlobClass::Hand, vc.color));
  }
}

}  // namespace

OfflineResult process_offline(const SessionConfig& cfg) {
  if (!cfg.input) throw Error(ErrorCode::InvalidArgument, "offline mode needs an input path");
  const fs::path input = *cfg.input;
  std::error_code ec;
  if (!fs::exists(input, ec)) throw Error(ErrorCode::InputNotFound, "input not found: " + input.string());

  // Frames are produced lazily so long sequences never sit in memory at once.
  std::size_t count = 0;
  std::function<LoadedFrame(std::size_t)> next;
  std::vector<fs::path> paths;
  std::optional<sim::TrajectorySpec> spec;
  std::vector<TimestampMs> times;
  if (fs::is_directory(input)) {
    paths = list_frames(input);
    count = paths.size();
    next = [&](std::size_t i) { return load_frame(paths[i], i); };
  } else {
    spec = load_trajectory(input, cfg.scene);
    times = spec->frame_times();
    count = times.size();
    next = [&](std::size_t i) {
      auto rf = sim::render_frame(sim::sample_trajectory(*spec, times[i]), cfg.render);
      return LoadedFrame{std::move(rf.frame), std::move(rf.truth)};
    };
  }

  Pipeline pipeline(pipeline_config(cfg));
  OfflineResult result;
  ErrorAccumulator raw_err, filtered_err;
  LatencyStats latency;
  std::optional<std::pair<int, int>> size;
  for (std::size_t i = 0; i < count; ++i) {
    const auto lf = next(i);
    if (!size) size = {lf.frame.width, lf.frame.height};
    if (size->first != lf.frame.width || size->second != lf.frame.height) {
      throw Error(ErrorCode::CorruptFrame, "frame " + std::to_string(i) + " is " + std::to_string(lf.frame.width) +
                                               "x" + std::to_string(lf.frame.height) + ", expected " +
                                               std::to_string(size->first) + "x" + std::to_string(size->second));
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto out = pipeline.process(lf.frame);
    result.detection_lines.push_back(detection_json(out));
    const auto t1 = std::chrono::steady_clock::now();
    latency.ms.push_back(elapsed_ms(t0, t1));

    if (cfg.mask_dump_dir) dump_masks(*cfg.mask_dump_dir, i, lf.frame, out, cfg.pipeline.vision);
    if (lf.truth && lf.truth->hand_ws_cm) {
      const Point2 truth = *lf.truth->hand_ws_cm - lf.truth->phone_ws_cm;
      if (out.hand_raw_cm) raw_err.add(*out.hand_raw_cm, truth);
      if (out.hand_cm) filtered_err.add(*out.hand_cm, truth);
    }
    for (auto& e : out.events) result.events.push_back(std::move(e));
  }

  auto& r = result.report;
  r.localization_rmse_cm = raw_err.rmse();
  r.filtered_rmse_cm = filtered_err.rmse();
  r.localization_samples = raw_err.n;
  if (pipeline.calibration()) r.scale_cm_per_px = pipeline.calibration()->scale_cm_per_px;
  result.calibrated = pipeline.calibration().has_value();
  r.frames_processed = pipeline.frames_processed();
  r.detection_records = static_cast<int>(result.detection_lines.size());
  r.event_count = static_cast<int>(result.events.size());
  latency.fill(r);
  r.config_echo = config_echo(cfg);
  return result;
}

BenchmarkReport run_offline(const SessionConfig& cfg) {
  const auto result = process_offline(cfg);
  ensure_dir(cfg.out_dir);
  std::string det, ev;
  for (const auto& line : result.detection_lines) det += line + "\n";
  for (const auto& e : result.events) ev += interaction::to_json(e) + "\n";
  write_text(cfg.out_dir / "detections.jsonl", det);
  write_text(cfg.out_dir / "events.jsonl", ev);
  write_text(cfg.out_dir / "report.json", report_json(result.report) + "\n");
  if (!result.calibrated && result.report.frames_processed > 0) {
    throw Error(ErrorCode::CalibrationFailed, "no frame yielded a usable phone outline");
  }
  return result.report;
}

calib::CalibrationMap calibrate_offline(const SessionConfig& cfg, const fs::path& out_file) {
  if (!cfg.input) throw Error(ErrorCode::InvalidArgument, "calibrate needs an input path");
  const fs::path input = *cfg.input;
  std::error_code ec;
  if (!fs::exists(input, ec)) throw Error(ErrorCode::InputNotFound, "input not found: " + input.string());

  auto attempt = [&](const Frame& f) -> std::optional<calib::CalibrationMap> {
    const auto det = vision::detect(f, cfg.pipeline.vision);
    try {
      return calib::calibrate_from_frame(f, det, cfg.pipeline.phone);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CalibrationFailed) throw;
      return std::nullopt;
    }
  };
  std::optional<calib::CalibrationMap> map;
  if (fs::is_directory(input)) {
    const auto paths = list_frames(input);
    for (std::size_t i = 0; i < paths.size() && !map; ++i) map = attempt(load_frame(paths[i], i).frame);
  } else {
    const auto spec = load_trajectory(input, cfg.scene);
    for (auto t : spec.frame_times()) {
      map = attempt(sim::render_frame(sim::sample_trajectory(spec, t), cfg.render).frame);
      if (map) break;
    }
  }
  if (!map) throw Error(ErrorCode::CalibrationFailed, "no frame yielded a usable phone outline");
  calib::save_calibration(out_file, *map);
  return *map;
}

// ---------------------------------------------------------------------------------------------
// Benchmarks

namespace {

// Hand positions inside the visible lens footprint, clear of the phone so the blobs never touch.
struct HandSampler {
  std::mt19937_64& rng;
  Point2 reach{30.0, 40.0};
  Point2 clearance{5.5, 9.0};

  bool ok(const Point2& h, const Point2& phone) const {
    return h.cwiseQuotient(reach).squaredNorm() <= 1.0 && ((h - phone).cwiseAbs() - clearance).maxCoeff() >= 0.0;
  }
  Point2 operator()(const Point2& phone) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
      const Point2 h(reach.x() * u(rng), reach.y() * u(rng));
      if (ok(h, phone)) return h;
    }
  }
};

std::optional<calib::CalibrationMap> calibrate_scene(const sim::SceneState& scene, const sim::RenderConfig& rc,
                                                     const PipelineConfig& pc) {
  const auto rf = sim::render_frame(scene, rc);
  const auto det = vision::detect(rf.frame, pc.vision);
  try {
    return calib::calibrate_from_frame(rf.frame, det, pc.phone);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CalibrationFailed) throw;
    return std::nullopt;
  }
}

std::optional<double> threshold(const std::vector<SeparationPoint>& pts, double target, bool filtered) {
  std::optional<double> best;
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    const double rate = filtered ? it->filtered_rate : it->single_frame_rate;
    if (rate < target) break;
    best = it->distance_cm;
  }
  return best;
}

}  // namespace

BenchmarkReport measure_localization(const SessionConfig& cfg, const LocalizationOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  HandSampler hands{rng};
  sim::RenderConfig rc = cfg.render;
  rc.noise_sigma = opt.noise_sigma;
  ErrorAccumulator err;
  Point2 scale_sum = Point2::Zero();
  int sessions = 0;
  TimestampMs t = 0;
  for (int s = 0; s < opt.sessions; ++s) {
    auto scene = cfg.scene;
    scene.phone_center_cm = Point2(4.0 * u(rng), 6.0 * u(rng));
    scene.hand_cm = Point2(25.0, 0.0);
    scene.hand_height_cm = 0.0;
    scene.timestamp_ms = t++;
    const auto map = calibrate_scene(scene, rc, cfg.pipeline);
    if (!map) throw Error(ErrorCode::CalibrationFailed, "localization session " + std::to_string(s) + " failed");
    scale_sum += map->scale_cm_per_px;
    ++sessions;
    for (int f = 0; f < opt.frames_per_session; ++f) {
      scene.hand_cm = hands(scene.phone_center_cm);
      scene.timestamp_ms = t++;
      const auto rf = sim::render_frame(scene, rc);
      const auto det = vision::detect(rf.frame, cfg.pipeline.vision);
      if (!det.hand) continue;
      err.add(calib::map_to_workspace(*map, det.hand->centroid), scene.hand_cm - scene.phone_center_cm);
    }
  }
  BenchmarkReport r;
  r.localization_rmse_cm = err.rmse();
  r.localization_samples = err.n;
  if (sessions > 0) r.scale_cm_per_px = scale_sum / sessions;
  r.frames_processed = static_cast<int>(t);
  r.config_echo = config_echo(cfg);
  return r;
}

BenchmarkReport measure_separation(const SessionConfig& cfg, const SeparationOptions& opt) {
  if (!(opt.step_cm > 0.0) || opt.trials < 1 || opt.frames_per_tap < 1) {
    throw Error(ErrorCode::InvalidArgument, "separation sweep needs a positive step, trials and frames");
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  HandSampler hands{rng};
  sim::RenderConfig rc = cfg.render;
  rc.noise_sigma = opt.noise_sigma;
  rc.seed = opt.seed;
  vision::TrackerConfig filter = cfg.pipeline.tracker;
  constexpr TimestampMs kFrameMs = 33;
  constexpr TimestampMs kWindowMs = 1000;

  BenchmarkReport r;
  TimestampMs t = 0;
  int frames = 0;
  const int steps = static_cast<int>(std::floor((opt.max_distance_cm - opt.min_distance_cm) / opt.step_cm + 1e-9)) + 1;
  for (int row = 0; row < steps; ++row) {
    const double d = opt.min_distance_cm + row * opt.step_cm;
    auto scene = cfg.scene;
    scene.hand_cm = Point2(25.0, 0.0);
    scene.hand_height_cm = 0.0;
    std::optional<calib::CalibrationMap> map;
    for (int attempt = 0; attempt < 20 && !map; ++attempt) {
      scene.timestamp_ms = t++;
      map = calibrate_scene(scene, rc, cfg.pipeline);
    }
    if (!map) throw Error(ErrorCode::CalibrationFailed, "no calibration for separation row");
    const double scale = map->scale_cm_per_px.maxCoeff();
    const double single_merge = 2.0 * interaction::localization_sigma_cm(scale);
    const double filtered_merge =
        2.0 * interaction::localization_sigma_cm(scale, filter.alpha, opt.frames_per_tap);

    SeparationPoint pt;
    pt.distance_cm = d;
    int single_ok = 0, filtered_ok = 0;
    for (int trial = 0; trial < opt.trials; ++trial) {
      Point2 a, b;
      do {
        const Point2 mid = hands(scene.phone_center_cm);
        const double th = angle(rng);
        const Point2 half = 0.5 * d * Point2(std::cos(th), std::sin(th));
        a = mid - half;
        b = mid + half;
      } while (!hands.ok(a, scene.phone_center_cm) || !hands.ok(b, scene.phone_center_cm));

      std::vector<interaction::InputEvent> single_taps, filtered_taps;
      for (const Point2& tap : {a, b}) {
        scene.hand_cm = scene.phone_center_cm + tap;
        vision::TrackState track;
        track.cfg = filter;
        std::optional<Point2> first;
        for (int f = 0; f < opt.frames_per_tap; ++f) {
          scene.timestamp_ms = t;
          t += kFrameMs;
          const auto rf = sim::render_frame(scene, rc);
          const auto det = vision::detect(rf.frame, cfg.pipeline.vision);
          ++frames;
          std::optional<Point2> px;
          if (det.hand) px = det.hand->centroid;
          if (f == 0) first = px;
          track = vision::track(track, px, scene.timestamp_ms).state;
        }
        const TimestampMs tap_t = scene.timestamp_ms;
        if (first) {
          single_taps.push_back({interaction::EventKind::Tap, calib::map_to_workspace(*map, *first),
                                 interaction::Zone::Around, tap_t, cfg.pipeline.session});
        }
        if (track.position) {
          filtered_taps.push_back({interaction::EventKind::Tap, calib::map_to_workspace(*map, *track.position),
                                   interaction::Zone::Around, tap_t, cfg.pipeline.session});
        }
        t += 100;
      }
      single_ok += interaction::resolve_two_touches(single_taps, kWindowMs, single_merge).size() == 2;
      filtered_ok += interaction::resolve_two_touches(filtered_taps, kWindowMs, filtered_merge).size() == 2;
    }
    pt.trials = opt.trials;
    pt.single_frame_rate = static_cast<double>(single_ok) / opt.trials;
    pt.filtered_rate = static_cast<double>(filtered_ok) / opt.trials;
    r.separation.push_back(pt);
    if (!r.scale_cm_per_px) r.scale_cm_per_px = map->scale_cm_per_px;
  }
  r.single_frame_threshold_cm = threshold(r.separation, opt.target_rate, false);
  r.filtered_threshold_cm = threshold(r.separation, opt.target_rate, true);
  r.frames_processed = frames;
  r.config_echo = config_echo(cfg);
  return r;
}

BenchmarkReport measure_throughput(const SessionConfig& cfg, const ThroughputOptions& opt) {
  if (opt.frames < 1) throw Error(ErrorCode::InvalidArgument, "throughput needs at least one frame");
  sim::RenderConfig rc = cfg.render;
  rc.noise_sigma = opt.noise_sigma;
  rc.seed = opt.seed;
  // A hand circling the phone at varying height so every pipeline stage is exercised.
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(opt.frames));
  for (int i = 0; i < opt.frames; ++i) {
    auto scene = cfg.scene;
    const double phase = 2.0 * std::numbers::pi * i / 90.0;
    scene.hand_cm = scene.phone_center_cm + Point2(14.0 * std::cos(phase), 18.0 * std::sin(phase));
    scene.hand_height_cm = (i / 45) % 2 == 0 ? 0.0 : 6.0;
    scene.timestamp_ms = std::llround(i * 1000.0 / 30.0);
    frames.push_back(sim::render_frame(scene, rc).frame);
  }
  Pipeline pipeline(pipeline_config(cfg));
  LatencyStats latency;
  int events = 0;
  std::size_t bytes = 0;
  for (const auto& f : frames) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = pipeline.process(f);
    bytes += detection_json(out).size();
    for (const auto& e : out.events) bytes += interaction::to_json(e).size();
    const auto t1 = std::chrono::steady_clock::now();
    latency.ms.push_back(elapsed_ms(t0, t1));
    events += static_cast<int>(out.events.size());
  }
  BenchmarkReport r;
  latency.fill(r);
  r.frames_processed = pipeline.frames_processed();
  r.detection_records = opt.frames;
  r.event_count = events;
  r.config_echo = config_echo(cfg);
  (void)bytes;
  return r;
}

}  // namespace glasshands::io
