#pragma once

#include "glasshands/pipeline.hpp"
#include "glasshands/simulation.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace glasshands::io {

enum class Mode { Offline, SimLive, FramesLive };

std::string_view to_string(Mode m);
/// Throws InvalidArgument for an unknown name.
Mode parse_mode(std::string_view s);

enum class CalibrationSource { AutoPhoneCorners, File };

struct SessionConfig {
  Mode mode = Mode::Offline;
  sim::RenderConfig render;
  sim::SceneState scene = sim::default_scene();
  PipelineConfig pipeline;
  CalibrationSource calibration_source = CalibrationSource::AutoPhoneCorners;
  std::optional<std::filesystem::path> calibration_path;
  /// Offline input: a trajectory JSON file or a directory of PPM frames.
  std::optional<std::filesystem::path> input;
  std::filesystem::path out_dir = "out";
  std::optional<std::filesystem::path> mask_dump_dir;
  std::string host = "127.0.0.1";
  std::uint16_t port = 8765;

  /// Throws InvalidArgument when a mode-specific field is missing.
  void validate() const;
};

/// Applies a JSON configuration document on top of `base`. Throws InvalidArgument.
SessionConfig parse_session_config(std::string_view json_text, SessionConfig base = {});
/// Throws InputNotFound or InvalidArgument.
SessionConfig load_session_config(const std::filesystem::path& path, SessionConfig base = {});
/// Effective configuration as JSON, echoed into reports and handshakes.
std::string config_echo(const SessionConfig& cfg);

/// Throws InvalidArgument on a malformed document.
sim::TrajectorySpec parse_trajectory(std::string_view json_text, const sim::SceneState& base = sim::default_scene());
/// Throws InputNotFound or InvalidArgument.
sim::TrajectorySpec load_trajectory(const std::filesystem::path& path,
                                    const sim::SceneState& base = sim::default_scene());
std::string trajectory_to_json(const sim::TrajectorySpec& spec);

/// One JSON object per frame (see docs/formats.md).
std::string sidecar_json(const sim::GroundTruth& truth);

/// Parses one sidecar document. Throws CorruptFrame.
sim::GroundTruth parse_sidecar(std::string_view json_text);

/// Renders every frame time of the trajectory into `dir` as frame_NNNNNN.ppm plus a
/// frame_NNNNNN.json sidecar. Returns the frame count. Throws IoError.
int render_to_directory(const sim::TrajectorySpec& spec, const sim::RenderConfig& cfg,
                        const std::filesystem::path& dir);

/// Every *.ppm in `dir`, in name order. Throws InputNotFound when the directory is missing or empty.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

struct LoadedFrame {
  Frame frame;
  std::optional<sim::GroundTruth> truth;
};

/// Loads a PPM and its sidecar when present. Without a sidecar the timestamp is derived from
/// the frame index and `fps`. Throws InputNotFound or CorruptFrame.
LoadedFrame load_frame(const std::filesystem::path& ppm, std::size_t index, double fps = 30.0);

struct SeparationPoint {
  double distance_cm = 0.0;
  int trials = 0;
  double single_frame_rate = 0.0;
  double filtered_rate = 0.0;
};

struct BenchmarkReport {
  std::optional<double> localization_rmse_cm;
  std::optional<double> filtered_rmse_cm;
  std::optional<geometry::Point2> scale_cm_per_px;
  int localization_samples = 0;
  std::vector<SeparationPoint> separation;
  /// Smallest swept distance from which every larger distance reaches the target rate.
  std::optional<double> single_frame_threshold_cm;
  std::optional<double> filtered_threshold_cm;
  int frames_processed = 0;
  int detection_records = 0;
  int event_count = 0;
  double mean_latency_ms = 0.0;
  double p95_latency_ms = 0.0;
  double throughput_fps = 0.0;
  std::string config_echo;
};

std::string report_json(const BenchmarkReport& r);

struct OfflineResult {
  BenchmarkReport report;
  /// False when no frame produced a calibration map.
  bool calibrated = false;
  std::vector<std::string> detection_lines;
  std::vector<interaction::InputEvent> events;
};

/// Runs the pipeline over cfg.input (trajectory or frame directory); writes nothing except
/// optional mask dumps. Throws InputNotFound or CorruptFrame (including size mismatches).
OfflineResult process_offline(const SessionConfig& cfg);

/// process_offline plus detections.jsonl, events.jsonl and report.json in cfg.out_dir.
/// Throws CalibrationFailed after writing the outputs when no frame could be calibrated.
BenchmarkReport run_offline(const SessionConfig& cfg);

/// Calibrates from the first usable frame of cfg.input and writes the map as JSON.
/// Throws CalibrationFailed when no frame yields a phone outline.
calib::CalibrationMap calibrate_offline(const SessionConfig& cfg, const std::filesystem::path& out_file);

struct LocalizationOptions {
  int sessions = 10;
  int frames_per_session = 50;
  std::uint64_t seed = 1;
  double noise_sigma = 0.0;
};

/// Static hands at random positions around randomly placed phones; one auto-calibration per
/// session. RMSE of the raw mapped hand position against ground truth.
BenchmarkReport measure_localization(const SessionConfig& cfg, const LocalizationOptions& opt);

struct SeparationOptions {
  double min_distance_cm = 1.0;
  double max_distance_cm = 10.0;
  double step_cm = 1.0;
  int trials = 200;
  int frames_per_tap = 5;
  double noise_sigma = 8.0;
  std::uint64_t seed = 1;
  double target_rate = 0.99;
};

/// Two taps per trial at the given separation; a trial counts as distinguished when
/// resolve_two_touches returns two points. Single-frame and EMA-filtered positions come from
/// the same rendered frames.
BenchmarkReport measure_separation(const SessionConfig& cfg, const SeparationOptions& opt);

struct ThroughputOptions {
  int frames = 300;
  double noise_sigma = 8.0;
  std::uint64_t seed = 1;
};

/// Pipeline latency on pre-rendered frames of a moving hand; rendering is excluded.
BenchmarkReport measure_throughput(const SessionConfig& cfg, const ThroughputOptions& opt);

}  // namespace glasshands::io
