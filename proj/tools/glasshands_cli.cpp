// glasshands command line: render, run, bench, serve, calibrate, replay.

#include "glasshands/error.hpp"
#include "glasshands/service.hpp"
#include "glasshands/session.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <pthread.h>
#include <thread>

namespace fs = std::filesystem;
using namespace glasshands;

namespace {

constexpr int kUsageError = 2;

struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::uint16_t> port;
  std::optional<std::string> mode;
  std::optional<std::string> session;
  std::optional<std::string> input;
  std::optional<double> noise;

  void add(CLI::App* app, bool with_input) {
    app->add_option("--config", config, "JSON configuration file");
    app->add_option("--seed", seed, "Render noise seed");
    app->add_option("--out", out, "Output directory");
    app->add_option("--port", port, "Service port");
    app->add_option("--mode", mode, "offline | sim-live | frames-live");
    app->add_option("--session", session, "Session id written into events");
    app->add_option("--noise", noise, "Pixel noise sigma in gray levels");
    if (with_input) app->add_option("--input,-i", input, "Trajectory JSON or frame directory")->required();
  }

  io::SessionConfig resolve() const {
    io::SessionConfig cfg;
    if (config) cfg = io::load_session_config(*config, cfg);
    if (seed) cfg.render.seed = *seed;
    if (out) cfg.out_dir = *out;
    if (port) cfg.port = *port;
    if (mode) cfg.mode = io::parse_mode(*mode);
    if (session) cfg.pipeline.session = *session;
    if (input) cfg.input = *input;
    if (noise) cfg.render.noise_sigma = *noise;
    return cfg;
  }
};

void write_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

void print_report_summary(const io::BenchmarkReport& r) {
  if (r.localization_rmse_cm) {
    std::printf("localization rmse: %.4f cm over %d samples", *r.localization_rmse_cm, r.localization_samples);
    if (r.scale_cm_per_px) std::printf(", scale %.4f / %.4f cm/px", r.scale_cm_per_px->x(), r.scale_cm_per_px->y());
    std::printf("\n");
  }
  for (const auto& p : r.separation) {
    std::printf("separation %5.1f cm: single %.3f  filtered %.3f  (%d trials)\n", p.distance_cm, p.single_frame_rate,
                p.filtered_rate, p.trials);
  }
  auto thr = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("none"); };
  if (!r.separation.empty()) {
    std::printf("99%% threshold: single %s cm, filtered %s cm\n", thr(r.single_frame_threshold_cm).c_str(),
                thr(r.filtered_threshold_cm).c_str());
  }
  if (r.throughput_fps > 0.0) {
    std::printf("latency mean %.2f ms, p95 %.2f ms, throughput %.1f fps over %d frames\n", r.mean_latency_ms,
                r.p95_latency_ms, r.throughput_fps, r.frames_processed);
  }
}

int serve(const io::SessionConfig& cfg) {
  // Block termination signals here so a dedicated thread can turn them into a clean stop.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  io::Service service(cfg);
  const auto port = service.bind();
  std::printf("listening on %s:%u (%s)\n", cfg.host.c_str(), port, std::string(io::to_string(cfg.mode)).c_str());
  std::fflush(stdout);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  service.run();
  // run() only returns after stop(), which the waiter triggered.
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Around-device input engine: render, process and serve reflected-hand sessions"};
  app.require_subcommand(1);

  CommonFlags render_f, run_f, bench_f, serve_f, calib_f, replay_f;

  auto* render = app.add_subcommand("render", "Render a trajectory into PPM frames plus sidecars");
  render_f.add(render, true);

  auto* run = app.add_subcommand("run", "Process frames or a trajectory into detections, events and a report");
  run_f.add(run, true);
  std::optional<std::string> mask_dump, calibration_file;
  run->add_option("--mask-dump", mask_dump, "Directory for lens/phone/hand mask PGMs");
  run->add_option("--calibration", calibration_file, "Use a saved calibration instead of auto phone corners");

  auto* bench = app.add_subcommand("bench", "Localization, two-touch separation sweep and throughput");
  bench_f.add(bench, false);
  std::string which = "all";
  io::SeparationOptions sep;
  io::LocalizationOptions loc;
  io::ThroughputOptions thr;
  bench->add_option("--what", which, "all | localization | separation | throughput")
      ->check(CLI::IsMember({"all", "localization", "separation", "throughput"}));
  bench->add_option("--trials", sep.trials, "Trials per separation distance");
  bench->add_option("--min-distance", sep.min_distance_cm, "First swept distance, cm");
  bench->add_option("--max-distance", sep.max_distance_cm, "Last swept distance, cm");
  bench->add_option("--step", sep.step_cm, "Distance step, cm");
  bench->add_option("--frames-per-tap", sep.frames_per_tap, "Frames per tap for the filtered estimate");
  bench->add_option("--sessions", loc.sessions, "Localization sessions");
  bench->add_option("--frames-per-session", loc.frames_per_session, "Localization frames per session");
  bench->add_option("--throughput-frames", thr.frames, "Frames timed for throughput");

  auto* serve_cmd = app.add_subcommand("serve", "Start the websocket session service");
  serve_f.add(serve_cmd, false);
  std::optional<std::string> host;
  serve_cmd->add_option("--host", host, "Listen address");

  auto* calibrate = app.add_subcommand("calibrate", "Calibrate from the first usable frame into calibration.json");
  calib_f.add(calibrate, true);

  auto* replay = app.add_subcommand("replay", "Stream a trajectory to a running sim-live service; write events.jsonl");
  replay_f.add(replay, true);
  std::string replay_host = "127.0.0.1";
  replay->add_option("--host", replay_host, "Service address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (render->parsed()) {
      const auto cfg = render_f.resolve();
      const auto spec = io::load_trajectory(*cfg.input, cfg.scene);
      const auto dir = render_f.out ? fs::path(*render_f.out) : fs::path("frames");
      const int n = io::render_to_directory(spec, cfg.render, dir);
      std::printf("rendered %d frames into %s\n", n, dir.string().c_str());
    } else if (run->parsed()) {
      auto cfg = run_f.resolve();
      cfg.mode = io::Mode::Offline;
      if (mask_dump) cfg.mask_dump_dir = *mask_dump;
      if (calibration_file) {
        cfg.calibration_source = io::CalibrationSource::File;
        cfg.calibration_path = *calibration_file;
      }
      cfg.validate();
      const auto report = io::run_offline(cfg);
      std::printf("%d frames, %d events -> %s\n", report.frames_processed, report.event_count,
                  cfg.out_dir.string().c_str());
      print_report_summary(report);
    } else if (bench->parsed()) {
      auto cfg = bench_f.resolve();
      if (bench_f.seed) sep.seed = loc.seed = thr.seed = *bench_f.seed;
      if (bench_f.noise) sep.noise_sigma = thr.noise_sigma = *bench_f.noise;
      io::BenchmarkReport report;
      if (which == "all" || which == "localization") {
        const auto l = io::measure_localization(cfg, loc);
        report.localization_rmse_cm = l.localization_rmse_cm;
        report.localization_samples = l.localization_samples;
        report.scale_cm_per_px = l.scale_cm_per_px;
      }
      if (which == "all" || which == "separation") {
        const auto s = io::measure_separation(cfg, sep);
        report.separation = s.separation;
        report.single_frame_threshold_cm = s.single_frame_threshold_cm;
        report.filtered_threshold_cm = s.filtered_threshold_cm;
      }
      if (which == "all" || which == "throughput") {
        const auto t = io::measure_throughput(cfg, thr);
        report.frames_processed = t.frames_processed;
        report.detection_records = t.detection_records;
        report.event_count = t.event_count;
        report.mean_latency_ms = t.mean_latency_ms;
        report.p95_latency_ms = t.p95_latency_ms;
        report.throughput_fps = t.throughput_fps;
      }
      report.config_echo = io::config_echo(cfg);
      const auto dir = bench_f.out ? fs::path(*bench_f.out) : fs::path("bench");
      write_file(dir / "report.json", io::report_json(report) + "\n");
      print_report_summary(report);
    } else if (serve_cmd->parsed()) {
      auto cfg = serve_f.resolve();
      if (host) cfg.host = *host;
      if (cfg.mode == io::Mode::Offline) cfg.mode = io::Mode::SimLive;
      cfg.validate();
      return serve(cfg);
    } else if (calibrate->parsed()) {
      const auto cfg = calib_f.resolve();
      const auto dir = calib_f.out ? fs::path(*calib_f.out) : fs::path(".");
      std::error_code ec;
      fs::create_directories(dir, ec);
      const auto map = io::calibrate_offline(cfg, dir / "calibration.json");
      std::printf("calibration.json written: scale %.4f / %.4f cm/px, rms %.4f cm\n", map.scale_cm_per_px.x(),
                  map.scale_cm_per_px.y(), map.rms_cm);
    } else if (replay->parsed()) {
      const auto cfg = replay_f.resolve();
      const auto spec = io::load_trajectory(*cfg.input, cfg.scene);
      io::ServiceClient client;
      client.connect(replay_host, cfg.port);
      const auto events = io::replay_trajectory(client, spec, cfg.pipeline.session);
      client.close();
      std::string text;
      for (const auto& e : events) text += e + "\n";
      write_file(cfg.out_dir / "events.jsonl", text);
      std::printf("%zu events -> %s\n", events.size(), (cfg.out_dir / "events.jsonl").string().c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
