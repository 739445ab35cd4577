#include "glasshands/error.hpp"
#include "glasshands/geometry.hpp"
#include "glasshands/pipeline.hpp"
#include "glasshands/session.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

namespace py = pybind11;
using namespace glasshands;
using geometry::Point2;
using geometry::Point3;

namespace {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

Point2 p2(const Vec2& v) { return {v[0], v[1]}; }
Vec2 v2(const Point2& p) { return {p.x(), p.y()}; }

geometry::Homography homography(const Mat3& m) {
  geometry::Matrix3 h;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) h(r, c) = m[r][c];
  return geometry::Homography(h);
}

Mat3 rows(const geometry::Matrix3& h) {
  Mat3 m{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m[r][c] = h(r, c);
  return m;
}

io::SessionConfig config_from(const std::optional<std::string>& config_json) {
  return config_json ? io::parse_session_config(*config_json) : io::SessionConfig{};
}

// Frames in and detection/event JSON out, one pipeline per object.
class PyPipeline {
 public:
  PyPipeline(const std::optional<std::string>& config_json, const std::string& session) {
    auto cfg = config_from(config_json).pipeline;
    cfg.session = session;
    pipeline_ = std::make_unique<io::Pipeline>(std::move(cfg));
  }

  py::tuple process(int width, int height, const py::bytes& rgb, TimestampMs t_ms) {
    Frame f;
    f.width = width;
    f.height = height;
    f.timestamp_ms = t_ms;
    const std::string buf = rgb;
    f.rgb.assign(buf.begin(), buf.end());
    const auto out = pipeline_->process(f);
    std::vector<std::string> events;
    for (const auto& e : out.events) events.push_back(interaction::to_json(e));
    return py::make_tuple(io::detection_json(out), events);
  }

  bool calibrated() const { return pipeline_->calibration().has_value(); }
  int frames_processed() const { return pipeline_->frames_processed(); }

 private:
  std::unique_ptr<io::Pipeline> pipeline_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Around-device input engine: geometry, rendering, detection and gestures";

  static py::handle error_type = py::exception<Error>(m, "GlassHandsError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      inst.attr("exit_code") = exit_code(e.code());
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  m.def(
      "reflect_point",
      [](const Vec3& normal, double offset, const Vec3& p) {
        const auto r = geometry::reflect_point(geometry::Plane({normal[0], normal[1], normal[2]}, offset),
                                               {p[0], p[1], p[2]});
        return Vec3{r.x(), r.y(), r.z()};
      },
      py::arg("normal"), py::arg("offset"), py::arg("point"), "Mirror a 3D point across the plane n.x = offset.");

  m.def(
      "estimate_homography",
      [](const std::vector<std::pair<Vec2, Vec2>>& pairs) {
        std::vector<geometry::PointPair> pp;
        for (const auto& [a, b] : pairs) pp.emplace_back(p2(a), p2(b));
        const auto est = geometry::estimate_homography(pp);
        return py::make_tuple(rows(est.homography.matrix()), est.rms);
      },
      py::arg("pairs"), "Normalized DLT over (source, target) pairs; returns (3x3 rows, rms).");

  m.def(
      "apply_homography", [](const Mat3& h, const Vec2& p) { return v2(geometry::apply_homography(homography(h), p2(p))); },
      py::arg("matrix"), py::arg("point"));

  m.def(
      "classify_zone",
      [](double x, double y) { return std::string(interaction::to_string(interaction::classify_zone({}, {x, y}))); },
      py::arg("x_cm"), py::arg("y_cm"), "Display, Around or OutOfRange for the default phone and workspace.");

  m.def(
      "render_frame",
      [](double hand_x, double hand_y, double hand_h, bool hand_visible, double phone_x, double phone_y,
         double noise, std::uint64_t seed, TimestampMs t_ms) {
        auto scene = sim::default_scene();
        scene.hand_cm = {hand_x, hand_y};
        scene.hand_height_cm = hand_h;
        scene.hand_visible = hand_visible;
        scene.phone_center_cm = {phone_x, phone_y};
        scene.timestamp_ms = t_ms;
        sim::RenderConfig cfg;
        cfg.noise_sigma = noise;
        cfg.seed = seed;
        const auto rf = sim::render_frame(scene, cfg);
        py::dict d;
        d["width"] = rf.frame.width;
        d["height"] = rf.frame.height;
        d["t_ms"] = rf.frame.timestamp_ms;
        d["rgb"] = py::bytes(reinterpret_cast<const char*>(rf.frame.rgb.data()), rf.frame.rgb.size());
        d["sidecar"] = io::sidecar_json(rf.truth);
        return d;
      },
      py::arg("hand_x_cm") = 10.0, py::arg("hand_y_cm") = 0.0, py::arg("hand_h_cm") = 0.0,
      py::arg("hand_visible") = true, py::arg("phone_x_cm") = 0.0, py::arg("phone_y_cm") = 0.0,
      py::arg("noise_sigma") = 0.0, py::arg("seed") = 0, py::arg("t_ms") = 0,
      "Render one default-scene frame; returns width, height, t_ms, rgb bytes and the sidecar JSON.");

  m.def(
      "process_trajectory",
      [](const std::string& trajectory_json, const std::optional<std::string>& config_json,
         const std::string& session) {
        auto cfg = config_from(config_json);
        cfg.pipeline.session = session;
        const auto spec = io::parse_trajectory(trajectory_json, cfg.scene);
        // process_offline reads its input from disk; route the document through a temp file.
        static std::atomic<int> counter{0};
        const auto dir = std::filesystem::temp_directory_path() /
                         ("glasshands_py_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(dir);
        {
          std::ofstream(dir / "trajectory.json") << io::trajectory_to_json(spec);
        }
        cfg.input = dir / "trajectory.json";
        io::OfflineResult r;
        try {
          r = io::process_offline(cfg);
        } catch (...) {
          std::filesystem::remove_all(dir);
          throw;
        }
        std::filesystem::remove_all(dir);
        std::vector<std::string> events;
        for (const auto& e : r.events) events.push_back(interaction::to_json(e));
        py::dict d;
        d["events"] = events;
        d["detections"] = r.detection_lines;
        d["report"] = io::report_json(r.report);
        d["calibrated"] = r.calibrated;
        return d;
      },
      py::arg("trajectory_json"), py::arg("config_json") = py::none(), py::arg("session") = "offline",
      "Render and process a trajectory document; returns events and detections as JSON lines.");

  m.def(
      "run_offline",
      [](const std::string& config_json) { return io::report_json(io::run_offline(io::parse_session_config(config_json))); },
      py::arg("config_json"), "Offline run as configured (input and out are required); returns report.json text.");

  m.def(
      "exit_code", [](const std::string& name) {
        for (int c = 0; c <= static_cast<int>(ErrorCode::IoError); ++c) {
          if (to_string(static_cast<ErrorCode>(c)) == name) return exit_code(static_cast<ErrorCode>(c));
        }
        throw py::value_error("unknown error class: " + name);
      },
      py::arg("name"), "CLI exit status for an error class name.");

  py::class_<PyPipeline>(m, "Pipeline")
      .def(py::init<const std::optional<std::string>&, const std::string&>(), py::arg("config_json") = py::none(),
           py::arg("session") = "offline")
      .def("process", &PyPipeline::process, py::arg("width"), py::arg("height"), py::arg("rgb"), py::arg("t_ms"),
           "Process one RGB8 frame; returns (detection JSON, list of event JSON).")
      .def_property_readonly("calibrated", &PyPipeline::calibrated)
      .def_property_readonly("frames_processed", &PyPipeline::frames_processed);
}
