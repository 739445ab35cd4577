// One PASS/FAIL line per primary acceptance criterion. Exit status is nonzero when any fails.
// Optional arguments select criteria by name.

#include "glasshands/error.hpp"
#include "glasshands/geometry.hpp"
#include "glasshands/service.hpp"
#include "glasshands/session.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#ifndef GLASSHANDS_CLI_PATH
#error "GLASSHANDS_CLI_PATH must name the glasshands executable"
#endif

namespace fs = std::filesystem;
using namespace glasshands;
using geometry::Point2;
using geometry::Point3;
using geometry::Matrix3;

namespace {

// Pinned tolerances.
constexpr double kLocRmseMin = 0.25;
constexpr double kLocRmseMax = 0.75;
constexpr double kScaleNominal = 0.5;
constexpr double kScaleRelTol = 0.05;
constexpr int kLocMinFrames = 500;
constexpr double kLocMaxSeconds = 120.0;

constexpr int kSepTrials = 200;
constexpr double kSepNoise = 8.0;
constexpr double kSepReliableCm = 5.0;
constexpr double kSepRate = 0.99;
constexpr double kSepMaxSeconds = 300.0;

constexpr int kGeomCases = 1000;
constexpr double kInvolutionTol = 1e-12;
constexpr double kVirtualCameraTolPx = 1e-9;
constexpr double kRoundTripTol = 1e-9;
constexpr double kDltRelTol = 1e-6;

constexpr int kOracleTrajectories = 100;
constexpr int kOracleMinMatches = 95;
constexpr double kOraclePositionTolCm = 1.0;

constexpr double kMinFps = 30.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
Outcome localization() {
  const auto t0 = std::chrono::steady_clock::now();
  io::SessionConfig cfg;
  io::LocalizationOptions opt;
  opt.noise_sigma = 0.0;
  const auto r = io::measure_localization(cfg, opt);
  const double secs = seconds_since(t0);
  if (!r.localization_rmse_cm || !r.scale_cm_per_px) return {false, "no localization result"};
  const double rmse = *r.localization_rmse_cm;
  const auto s = *r.scale_cm_per_px;
  auto scale_ok = [](double v) { return std::abs(v / kScaleNominal - 1.0) <= kScaleRelTol; };
  const bool ok = r.localization_samples >= kLocMinFrames && rmse >= kLocRmseMin && rmse <= kLocRmseMax &&
                  scale_ok(s.x()) && scale_ok(s.y()) && secs <= kLocMaxSeconds;
  return {ok, fmt("rmse %.4f cm over %d frames, scale %.4f/%.4f cm/px, %.1f s", rmse, r.localization_samples,
                  s.x(), s.y(), secs)};
}

// ---------------------------------------------------------------------------
Outcome separation() {
  const auto t0 = std::chrono::steady_clock::now();
  io::SessionConfig cfg;
  io::SeparationOptions opt;
  opt.min_distance_cm = 1.0;
  opt.max_distance_cm = 10.0;
  opt.step_cm = 1.0;
  opt.trials = kSepTrials;
  opt.frames_per_tap = 5;
  opt.noise_sigma = kSepNoise;
  const auto r = io::measure_separation(cfg, opt);
  const double secs = seconds_since(t0);
  bool reliable = !r.separation.empty();
  std::string rates;
  for (const auto& p : r.separation) {
    if (p.trials < kSepTrials) reliable = false;
    if (p.distance_cm >= kSepReliableCm - 1e-9 && p.single_frame_rate < kSepRate) reliable = false;
    rates += fmt(" %.0f:%.3f/%.3f", p.distance_cm, p.single_frame_rate, p.filtered_rate);
  }
  const bool thresholds = r.single_frame_threshold_cm && r.filtered_threshold_cm &&
                          *r.filtered_threshold_cm < *r.single_frame_threshold_cm;
  auto thr = [](const std::optional<double>& v) { return v ? fmt("%.1f", *v) : std::string("none"); };
  return {reliable && thresholds && secs <= kSepMaxSeconds,
          fmt("threshold single %s cm, filtered %s cm; rates%s; %.1f s", thr(r.single_frame_threshold_cm).c_str(),
              thr(r.filtered_threshold_cm).c_str(), rates.c_str(), secs)};
}

// ---------------------------------------------------------------------------
Matrix3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

Point3 random_point(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  return {u(rng), u(rng), u(rng)};
}

Outcome geometry_properties() {
  std::mt19937_64 rng(20240917);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_involution = 0.0, worst_virtual = 0.0, worst_round = 0.0, worst_dlt = 0.0;
  int cases = 0;
  for (int i = 0; i < kGeomCases; ++i, ++cases) {
    const geometry::Plane plane(random_point(rng, 1.0), u(rng) * 10.0);

    const Point3 p = random_point(rng, 50.0);
    worst_involution = std::max(
        worst_involution, (geometry::reflect_point(plane, geometry::reflect_point(plane, p)) - p).norm());

    const auto cam = geometry::CameraModel::from_fov(random_point(rng, 20.0), random_rotation(rng), 1200, 750,
                                                     60.0 + 30.0 * (u(rng) + 1.0) / 2.0);
    const auto virt = geometry::mirror_camera(cam, plane);
    // A point in front of the real camera, seen through the mirror.
    const Point3 dir(0.4 * u(rng), 0.3 * u(rng), 1.0);
    const Point3 y = cam.center + cam.rotation * (dir * (5.0 + 45.0 * (u(rng) + 1.0) / 2.0));
    const Point3 x = geometry::reflect_point(plane, y);
    worst_virtual = std::max(worst_virtual, (geometry::project(virt, x) - geometry::project(cam, y)).norm());

    Matrix3 m = Matrix3::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) += (r == 2 && c < 2 ? 0.002 : 0.2) * u(rng);
    const geometry::Homography h(m);
    const Point2 q(10.0 * u(rng), 10.0 * u(rng));
    worst_round = std::max(
        worst_round, (geometry::apply_homography(h.inverse(), geometry::apply_homography(h, q)) - q).norm());

    const int n = 4 + static_cast<int>(rng() % 17);
    std::vector<geometry::PointPair> pairs;
    for (int k = 0; k < n; ++k) {
      const Point2 a(10.0 * u(rng), 10.0 * u(rng));
      pairs.emplace_back(a, geometry::apply_homography(h, a));
    }
    const auto est = geometry::estimate_homography(pairs).homography.matrix();
    // Both matrices carry unit norm and a positive largest entry; align sign anyway.
    const double sign = est.cwiseProduct(h.matrix()).sum() < 0.0 ? -1.0 : 1.0;
    worst_dlt = std::max(worst_dlt, (sign * est - h.matrix()).norm() / h.matrix().norm());
  }
  const bool ok = worst_involution <= kInvolutionTol && worst_virtual <= kVirtualCameraTolPx &&
                  worst_round <= kRoundTripTol && worst_dlt <= kDltRelTol;
  return {ok, fmt("%d cases; worst involution %.2e, virtual camera %.2e px, round trip %.2e, DLT %.2e", cases,
                  worst_involution, worst_virtual, worst_round, worst_dlt)};
}

// ---------------------------------------------------------------------------
// Scripted trajectories. The hand hovers 8 cm above the surface between gestures and drops
// to the surface inside touch intervals; every path stays in the visible part of the lens.

constexpr double kHoverCm = 8.0;

bool visible(const Point2& p) {
  const double e = std::pow(p.x() / 30.0, 2) + std::pow(p.y() / 40.0, 2);
  return e <= 0.85 && (std::abs(p.x()) > 6.0 || std::abs(p.y()) > 9.5);
}

bool path_visible(const Point2& a, const Point2& b) {
  const int steps = std::max(1, static_cast<int>((b - a).norm() / 0.5));
  for (int i = 0; i <= steps; ++i) {
    if (!visible(a + (b - a) * (static_cast<double>(i) / steps))) return false;
  }
  return true;
}

enum class Gesture { Tap, Hold, Drag, Slide };

struct Script {
  sim::TrajectorySpec spec;
  std::vector<Gesture> gestures;
};

class ScriptBuilder {
 public:
  explicit ScriptBuilder(std::uint64_t seed) : rng_(seed) {}

  Script build(const std::vector<Gesture>& gestures) {
    Script s;
    s.gestures = gestures;
    pos_ = random_visible();
    t_ = 0;
    key(pos_);
    hold_still(300);
    for (auto g : gestures) {
      switch (g) {
        case Gesture::Tap: touch_gesture(s.spec, uniform(110, 200), 0.0); break;
        case Gesture::Hold: touch_gesture(s.spec, uniform(900, 1300), 0.0); break;
        case Gesture::Drag: touch_gesture(s.spec, uniform(750, 1000), uniform(3.5, 7.0)); break;
        case Gesture::Slide: slide(); break;
      }
      hold_still(300);
    }
    s.spec.keyframes = keys_;
    return s;
  }

 private:
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }

  Point2 random_visible() {
    for (;;) {
      const Point2 p(uniform(-28, 28), uniform(-38, 38));
      if (visible(p)) return p;
    }
  }

  void key(const Point2& p) {
    sim::Keyframe k;
    k.t_ms = t_;
    k.hand_x_cm = p.x();
    k.hand_y_cm = p.y();
    k.hand_h_cm = kHoverCm;
    keys_.push_back(k);
  }

  void hold_still(TimestampMs ms) {
    t_ += ms;
    key(pos_);
  }

  // Slow hovering transit to `to`, well below slide speed.
  void transit(const Point2& to) {
    const double d = (to - pos_).norm();
    t_ += std::max<TimestampMs>(300, static_cast<TimestampMs>(d / 12.0 * 1000.0));
    pos_ = to;
    key(pos_);
    hold_still(300);
  }

  void touch_gesture(sim::TrajectorySpec& spec, double duration_ms, double drag_cm) {
    Point2 start, end;
    for (;;) {
      start = random_visible();
      const double a = uniform(0.0, 2.0 * std::numbers::pi);
      end = start + drag_cm * Point2(std::cos(a), std::sin(a));
      if (path_visible(start, end) && path_visible(pos_, start)) break;
    }
    transit(start);
    const TimestampMs a = t_;
    const TimestampMs b = a + static_cast<TimestampMs>(duration_ms);
    if (drag_cm > 0.0) {
      t_ = a + 250;
      key(pos_);
      t_ = b - 200;
      pos_ = end;
      key(pos_);
    }
    t_ = b;
    key(pos_);
    spec.touch_intervals.emplace_back(a, b);
  }

  void slide() {
    Point2 start, end;
    double speed = 0.0;
    for (;;) {
      start = random_visible();
      const double len = uniform(10.0, 14.0) * (uniform(0, 1) < 0.5 ? -1.0 : 1.0);
      end = start + Point2(len, 0.0);
      speed = uniform(35.0, 45.0);
      if (path_visible(start, end) && path_visible(pos_, start)) break;
    }
    transit(start);
    t_ += static_cast<TimestampMs>((end - start).norm() / speed * 1000.0);
    pos_ = end;
    key(pos_);
  }

  std::mt19937_64 rng_;
  std::vector<sim::Keyframe> keys_;
  Point2 pos_ = Point2::Zero();
  TimestampMs t_ = 0;
};

struct OracleEvent {
  interaction::EventKind kind;
  Point2 position;
};

// Gestures computed straight from ground-truth sidecars: contact runs become taps, holds or
// drags by their true duration and travel; hovering runs above slide speed become slides.
std::vector<OracleEvent> oracle_events(const std::vector<sim::GroundTruth>& truth,
                                       const interaction::GestureConfig& g) {
  using interaction::EventKind;
  std::vector<OracleEvent> out;
  size_t i = 0;
  while (i < truth.size()) {
    const auto& f = truth[i];
    if (!f.hand_ws_cm) {
      ++i;
      continue;
    }
    auto rel = [&](size_t k) { return Point2(*truth[k].hand_ws_cm - truth[k].phone_ws_cm); };
    const bool touching = f.touching;
    size_t j = i;
    while (j + 1 < truth.size() && truth[j + 1].hand_ws_cm && truth[j + 1].touching == touching) ++j;
    if (touching) {
      const Point2 p0 = rel(i);
      double travel = 0.0;
      for (size_t k = i; k <= j; ++k) travel = std::max(travel, (rel(k) - p0).norm());
      const double duration = static_cast<double>(truth[j].timestamp_ms - truth[i].timestamp_ms);
      if (travel > g.drag_start_cm) {
        out.push_back({EventKind::DragStart, p0});
        out.push_back({EventKind::DragMove, rel(j)});
        out.push_back({EventKind::DragEnd, rel(j)});
      } else if (duration >= g.hold_min_ms) {
        out.push_back({EventKind::HoldStart, p0});
        out.push_back({EventKind::Release, rel(j)});
      } else if (duration <= g.tap_max_ms) {
        out.push_back({EventKind::Tap, p0});
      }
    } else {
      int sign = 0;
      TimestampMs run_start = 0;
      bool emitted = false;
      for (size_t k = i + 1; k <= j; ++k) {
        const double dt = static_cast<double>(truth[k].timestamp_ms - truth[k - 1].timestamp_ms) / 1000.0;
        const double vx = (rel(k).x() - rel(k - 1).x()) / dt;
        const int s = std::abs(vx) >= g.slide_min_speed_cm_s ? (vx > 0 ? 1 : -1) : 0;
        if (s != sign) {
          sign = s;
          run_start = truth[k - 1].timestamp_ms;
          emitted = false;
        }
        if (s != 0 && !emitted &&
            static_cast<double>(truth[k].timestamp_ms - run_start) >= g.slide_min_duration_ms) {
          out.push_back({s > 0 ? EventKind::SlideRight : EventKind::SlideLeft, rel(k)});
          emitted = true;
        }
      }
    }
    i = j + 1;
  }
  return out;
}

// Consecutive DragMove events collapse to one; the oracle only knows that at least one occurs.
std::vector<OracleEvent> collapse(const std::vector<interaction::InputEvent>& events) {
  std::vector<OracleEvent> out;
  for (const auto& e : events) {
    if (e.kind == interaction::EventKind::DragMove && !out.empty() &&
        out.back().kind == interaction::EventKind::DragMove) {
      out.back().position = e.position_cm;
      continue;
    }
    out.push_back({e.kind, e.position_cm});
  }
  return out;
}

std::string describe(const std::vector<OracleEvent>& ev) {
  std::string s;
  for (const auto& e : ev) {
    s += fmt("%s(%.2f,%.2f) ", std::string(interaction::to_string(e.kind)).c_str(), e.position.x(), e.position.y());
  }
  return s;
}

bool same_events(const std::vector<OracleEvent>& a, const std::vector<OracleEvent>& b) {
  if (a.size() != b.size()) return false;
  for (size_t k = 0; k < a.size(); ++k) {
    if (a[k].kind != b[k].kind) return false;
    const auto kind = a[k].kind;
    const bool positional = kind != interaction::EventKind::DragMove && kind != interaction::EventKind::SlideLeft &&
                            kind != interaction::EventKind::SlideRight;
    if (positional && (a[k].position - b[k].position).norm() > kOraclePositionTolCm) return false;
  }
  return true;
}

std::vector<Gesture> random_gestures(std::mt19937_64& rng) {
  const int n = 1 + static_cast<int>(rng() % 3);
  std::vector<Gesture> g;
  for (int k = 0; k < n; ++k) g.push_back(static_cast<Gesture>(rng() % 4));
  return g;
}

Outcome oracle_equivalence() {
  const auto root = fs::temp_directory_path() / "glasshands_acceptance_oracle";
  fs::remove_all(root);
  std::mt19937_64 rng(77);
  io::SessionConfig base;
  int matches = 0;
  int frames = 0;
  std::string log;
  for (int n = 0; n < kOracleTrajectories; ++n) {
    ScriptBuilder builder(1000 + n);
    const auto script = builder.build(random_gestures(rng));
    const auto dir = root / fmt("traj_%03d", n);
    const auto frames_dir = dir / "frames";
    sim::RenderConfig render;
    render.seed = static_cast<std::uint64_t>(n);
    frames += io::render_to_directory(script.spec, render, frames_dir);

    std::vector<sim::GroundTruth> truth;
    for (const auto& ppm : io::list_frames(frames_dir)) {
      auto side = ppm;
      side.replace_extension(".json");
      std::ifstream in(side);
      std::stringstream ss;
      ss << in.rdbuf();
      truth.push_back(io::parse_sidecar(ss.str()));
    }

    auto cfg = base;
    cfg.input = frames_dir;
    cfg.out_dir = dir / "out";
    cfg.pipeline.session = fmt("t%03d", n);
    io::run_offline(cfg);
    std::vector<interaction::InputEvent> events;
    std::ifstream lines(cfg.out_dir / "events.jsonl");
    for (std::string line; std::getline(lines, line);) {
      const auto j = nlohmann::json::parse(line);
      interaction::InputEvent e;
      const auto kind = j.at("kind").get<std::string>();
      for (auto k : {interaction::EventKind::Tap, interaction::EventKind::DragStart, interaction::EventKind::DragMove,
                     interaction::EventKind::DragEnd, interaction::EventKind::SlideLeft,
                     interaction::EventKind::SlideRight, interaction::EventKind::HoldStart,
                     interaction::EventKind::Release}) {
        if (interaction::to_string(k) == kind) e.kind = k;
      }
      e.position_cm = Point2(j.at("x_cm").get<double>(), j.at("y_cm").get<double>());
      events.push_back(e);
    }

    const auto expected = oracle_events(truth, cfg.pipeline.gesture);
    const auto got = collapse(events);
    if (same_events(expected, got)) {
      ++matches;
    } else {
      log += fmt("  trajectory %d\n    oracle:   %s\n    pipeline: %s\n", n, describe(expected).c_str(),
                 describe(got).c_str());
    }
    fs::remove_all(dir);
  }
  fs::remove_all(root);
  if (!log.empty()) std::printf("oracle discrepancies:\n%s", log.c_str());
  return {matches >= kOracleMinMatches,
          fmt("%d/%d trajectories match (%d frames)", matches, kOracleTrajectories, frames)};
}

// ---------------------------------------------------------------------------
Outcome throughput() {
  io::SessionConfig cfg;
  io::ThroughputOptions opt;
  const auto r = io::measure_throughput(cfg, opt);
  return {r.throughput_fps >= kMinFps && r.frames_processed >= opt.frames,
          fmt("%.1f fps over %d frames at 1200x750, mean %.2f ms, p95 %.2f ms", r.throughput_fps,
              r.frames_processed, r.mean_latency_ms, r.p95_latency_ms)};
}

// ---------------------------------------------------------------------------
std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome offline_online() {
  const auto dir = fs::temp_directory_path() / "glasshands_acceptance_equality";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ScriptBuilder builder(4242);
  const auto script = builder.build({Gesture::Tap, Gesture::Drag, Gesture::Slide, Gesture::Hold});
  const auto traj = dir / "trajectory.json";
  std::ofstream(traj) << io::trajectory_to_json(script.spec);

  const std::string session = "equality";
  const std::string cmd = std::string("\"") + GLASSHANDS_CLI_PATH + "\" run --input \"" + traj.string() +
                          "\" --out \"" + (dir / "cli").string() + "\" --session " + session + " > \"" +
                          (dir / "cli.log").string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc != 0) return {false, fmt("cli exited with status %d", rc)};
  const auto cli = read_file(dir / "cli" / "events.jsonl");

  io::SessionConfig cfg;
  cfg.mode = io::Mode::SimLive;
  cfg.port = 0;
  io::Service service(cfg);
  const auto port = service.bind();
  std::thread server([&] { service.run(); });
  std::string online;
  std::string failure;
  try {
    io::ServiceClient client;
    client.connect("127.0.0.1", port);
    for (const auto& line : io::replay_trajectory(client, script.spec, session)) online += line + "\n";
    client.close();
  } catch (const std::exception& e) {
    failure = e.what();
  }
  service.stop();
  server.join();
  fs::remove_all(dir);
  if (!failure.empty()) return {false, "service replay failed: " + failure};

  const auto count = std::count(cli.begin(), cli.end(), '\n');
  return {!cli.empty() && cli == online,
          fmt("%ld events via cli, %s via service", static_cast<long>(count),
              cli == online ? "byte-identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"localization_floor", localization},     {"two_touch_separation", separation},
      {"geometry_properties", geometry_properties}, {"pipeline_oracle_equivalence", oracle_equivalence},
      {"throughput", throughput},               {"offline_online_equivalence", offline_online},
  };
  std::vector<std::string> selected(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
