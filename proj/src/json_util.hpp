#pragma once

#include "glasshands/interaction.hpp"
#include "glasshands/pipeline.hpp"
#include "glasshands/simulation.hpp"

#include <json.hpp>

#include <optional>

namespace glasshands::io::detail {

using json = nlohmann::ordered_json;

inline json point_json(const std::optional<geometry::Point2>& p) {
  if (!p) return nullptr;
  return json::array({p->x(), p->y()});
}

inline json ellipse_json(const geometry::Ellipse& e) {
  return json{{"cx", e.center.x()}, {"cy", e.center.y()}, {"a", e.a}, {"b", e.b}, {"theta_deg", e.rotation_deg}};
}

inline json blob_json(const std::optional<vision::Blob>& b) {
  if (!b) return nullptr;
  return json{{"x_px", b->centroid.x()},
              {"y_px", b->centroid.y()},
              {"area_px", b->area},
              {"radius_px", b->radius},
              {"confidence", b->confidence}};
}

inline json event_object(const interaction::InputEvent& e) {
  return json{{"kind", interaction::to_string(e.kind)},
              {"x_cm", e.position_cm.x()},
              {"y_cm", e.position_cm.y()},
              {"zone", interaction::to_string(e.zone)},
              {"t_ms", e.t_ms},
              {"session", e.session}};
}

inline json detection_object(const FrameOutput& out) {
  const auto& d = out.detection;
  json j;
  j["t_ms"] = d.timestamp_ms;
  j["lens"] = d.lens ? ellipse_json(*d.lens) : json(nullptr);
  j["phone"] = blob_json(d.phone);
  j["hand"] = blob_json(d.hand);
  j["calibrated"] = out.calibrated;
  j["hand_raw_cm"] = point_json(out.hand_raw_cm);
  j["hand_cm"] = point_json(out.hand_cm);
  j["hand_radius_cm"] = out.hand_radius_cm;
  j["zone"] = interaction::to_string(out.zone);
  j["touching"] = out.touching;
  j["phase"] = interaction::to_string(out.phase);
  return j;
}

inline json sidecar_object(const sim::GroundTruth& g) {
  json j;
  j["timestamp_ms"] = g.timestamp_ms;
  j["hand_ws_cm"] = point_json(g.hand_ws_cm);
  j["hand_px"] = point_json(g.hand_px);
  j["hand_radius_px"] = g.hand_radius_px;
  j["phone_ws_cm"] = point_json(g.phone_ws_cm);
  j["phone_px"] = point_json(g.phone_px);
  json corners = json::array();
  for (const auto& c : g.phone_corners_px) corners.push_back(point_json(c));
  j["phone_corners_px"] = corners;
  j["lens_ellipse"] = ellipse_json(g.lens);
  j["touching"] = g.touching;
  return j;
}

}  // namespace glasshands::io::detail
