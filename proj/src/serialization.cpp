#include "ncap/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ncap/errors.hpp"

namespace ncap {

namespace {

template <typename T>
void opt(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    field = it->template get<T>();
  }
}

}  // namespace

void to_json(json& j, const Vec2& v) { j = json{{"x", v.x}, {"y", v.y}}; }

void from_json(const json& j, Vec2& v) {
  v.x = j.at("x").get<double>();
  v.y = j.at("y").get<double>();
}

void to_json(json& j, const Pose2& p) { j = json{{"x", p.x}, {"y", p.y}, {"heading", p.heading}}; }

void from_json(const json& j, Pose2& p) {
  p = Pose2{j.at("x").get<double>(), j.at("y").get<double>(), j.value("heading", 0.0)};
}

void to_json(json& j, const EgoState& s) { j = json{{"pose", s.pose}, {"speed", s.speed}, {"time", s.time}}; }

void from_json(const json& j, EgoState& s) {
  s = EgoState{};
  s.pose = j.at("pose").get<Pose2>();
  opt(j, "speed", s.speed);
  opt(j, "time", s.time);
}

void to_json(json& j, const OrientedBox& b) {
  j = json{{"center", b.center}, {"length", b.length}, {"width", b.width}};
}

void from_json(const json& j, OrientedBox& b) {
  b.center = j.at("center").get<Pose2>();
  b.length = j.at("length").get<double>();
  b.width = j.at("width").get<double>();
}

void to_json(json& j, const ActorState& a) {
  j = json{{"actor_id", a.actor_id}, {"class_label", to_string(a.class_label)}, {"pose", a.box.center},
           {"length", a.box.length},  {"width", a.box.width},                    {"velocity", a.velocity}};
}

void from_json(const json& j, ActorState& a) {
  a = ActorState{};
  a.actor_id = j.at("actor_id").get<std::string>();
  a.class_label = actor_class_from_string(j.value("class_label", std::string("car")));
  a.box.center = j.at("pose").get<Pose2>();
  a.box.length = j.at("length").get<double>();
  a.box.width = j.at("width").get<double>();
  opt(j, "velocity", a.velocity);
}

void to_json(json& j, const Waypoint& w) {
  j = json{{"t", w.time_offset}, {"x", w.pose.x}, {"y", w.pose.y}, {"heading", w.pose.heading}};
  if (w.speed) {
    j["speed"] = *w.speed;
  }
}

void from_json(const json& j, Waypoint& w) {
  w = Waypoint{};
  w.time_offset = j.at("t").get<double>();
  w.pose = Pose2{j.at("x").get<double>(), j.at("y").get<double>(), j.at("heading").get<double>()};
  if (auto it = j.find("speed"); it != j.end() && !it->is_null()) {
    w.speed = it->get<double>();
  }
}

void to_json(json& j, const PlannedTrajectory& t) {
  j = json{{"issued_at", t.issued_at},
           {"origin", t.origin},
           {"origin_speed", t.origin_speed},
           {"waypoints", t.waypoints}};
}

void from_json(const json& j, PlannedTrajectory& t) {
  t = PlannedTrajectory{};
  opt(j, "issued_at", t.issued_at);
  opt(j, "origin", t.origin);
  opt(j, "origin_speed", t.origin_speed);
  t.waypoints = j.at("waypoints").get<std::vector<Waypoint>>();
}

void to_json(json& j, const ControlInput& u) {
  j = json{{"steering", u.steering}, {"acceleration", u.acceleration}};
}

void from_json(const json& j, ControlInput& u) {
  u.steering = j.at("steering").get<double>();
  u.acceleration = j.at("acceleration").get<double>();
}

void to_json(json& j, const VehicleParams& p) {
  j = json{{"wheelbase", p.wheelbase},
           {"max_steering", p.max_steering},
           {"min_acceleration", p.min_acceleration},
           {"max_acceleration", p.max_acceleration},
           {"max_speed", p.max_speed},
           {"length", p.length},
           {"width", p.width},
           {"integration_substep", p.integration_substep}};
}

void from_json(const json& j, VehicleParams& p) {
  p = VehicleParams{};
  opt(j, "wheelbase", p.wheelbase);
  opt(j, "max_steering", p.max_steering);
  opt(j, "min_acceleration", p.min_acceleration);
  opt(j, "max_acceleration", p.max_acceleration);
  opt(j, "max_speed", p.max_speed);
  opt(j, "length", p.length);
  opt(j, "width", p.width);
  opt(j, "integration_substep", p.integration_substep);
}

void to_json(json& j, const LqrConfig& c) {
  j = json{{"state_weights", {c.state_weights[0], c.state_weights[1], c.state_weights[2], c.state_weights[3]}},
           {"control_weights", {c.control_weights[0], c.control_weights[1]}},
           {"preview_time", c.preview_time},
           {"discretization_dt", c.discretization_dt},
           {"riccati_max_iterations", c.riccati_max_iterations},
           {"riccati_tolerance", c.riccati_tolerance},
           {"speed_bucket", c.speed_bucket},
           {"min_linearization_speed", c.min_linearization_speed}};
}

void from_json(const json& j, LqrConfig& c) {
  c = LqrConfig{};
  if (auto it = j.find("state_weights"); it != j.end()) {
    const auto w = it->get<std::vector<double>>();
    if (w.size() != 4) throw ConfigError("state_weights needs 4 entries");
    c.state_weights = Eigen::Vector4d(w[0], w[1], w[2], w[3]);
  }
  if (auto it = j.find("control_weights"); it != j.end()) {
    const auto w = it->get<std::vector<double>>();
    if (w.size() != 2) throw ConfigError("control_weights needs 2 entries");
    c.control_weights = Eigen::Vector2d(w[0], w[1]);
  }
  opt(j, "preview_time", c.preview_time);
  opt(j, "discretization_dt", c.discretization_dt);
  opt(j, "riccati_max_iterations", c.riccati_max_iterations);
  opt(j, "riccati_tolerance", c.riccati_tolerance);
  opt(j, "speed_bucket", c.speed_bucket);
  opt(j, "min_linearization_speed", c.min_linearization_speed);
}

void to_json(json& j, const RoutePoint& r) { j = json{{"x", r.x}, {"y", r.y}, {"speed", r.speed}}; }

void from_json(const json& j, RoutePoint& r) {
  r.x = j.at("x").get<double>();
  r.y = j.at("y").get<double>();
  r.speed = j.value("speed", 0.0);
}

void to_json(json& j, const Interval& i) { j = json::array({i.lo, i.hi}); }

void from_json(const json& j, Interval& i) {
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError("interval must be a [lo, hi] pair");
  }
  i.lo = j[0].get<double>();
  i.hi = j[1].get<double>();
}

void to_json(json& j, const JitterRanges& r) {
  j = json{{"longitudinal", r.longitudinal}, {"lateral", r.lateral}, {"rotation", r.rotation}, {"speed", r.speed}};
}

void from_json(const json& j, JitterRanges& r) {
  r = JitterRanges{};
  opt(j, "longitudinal", r.longitudinal);
  opt(j, "lateral", r.lateral);
  opt(j, "rotation", r.rotation);
  opt(j, "speed", r.speed);
}

void to_json(json& j, const TargetTemplate& t) {
  j = json{{"actor_id", t.actor_id},   {"class_label", to_string(t.class_label)},
           {"length", t.length},       {"width", t.width},
           {"speed", t.speed},         {"lateral_offset", t.lateral_offset},
           {"heading_offset", t.heading_offset}};
}

void from_json(const json& j, TargetTemplate& t) {
  t = TargetTemplate{};
  opt(j, "actor_id", t.actor_id);
  if (j.contains("class_label")) t.class_label = actor_class_from_string(j.at("class_label").get<std::string>());
  opt(j, "length", t.length);
  opt(j, "width", t.width);
  opt(j, "speed", t.speed);
  opt(j, "lateral_offset", t.lateral_offset);
  opt(j, "heading_offset", t.heading_offset);
}

void to_json(json& j, const ActorTrack& t) {
  json frames = json::array();
  for (const auto& k : t.keyframes) {
    frames.push_back(json{{"time", k.time}, {"pose", k.pose}});
  }
  j = json{{"actor_id", t.actor_id}, {"class_label", to_string(t.class_label)},
           {"length", t.length},     {"width", t.width},
           {"keyframes", frames}};
}

void from_json(const json& j, ActorTrack& t) {
  t = ActorTrack{};
  t.actor_id = j.at("actor_id").get<std::string>();
  t.class_label = actor_class_from_string(j.value("class_label", std::string("car")));
  t.length = j.at("length").get<double>();
  t.width = j.at("width").get<double>();
  for (const auto& k : j.at("keyframes")) {
    t.keyframes.push_back({k.at("time").get<double>(), k.at("pose").get<Pose2>()});
  }
}

void to_json(json& j, const ScenarioSpec& s) {
  j = json{{"name", s.name},
           {"type", to_string(s.type)},
           {"ego_init", s.ego_init},
           {"ego_route", s.ego_route},
           {"target", s.target},
           {"jitter", s.jitter},
           {"background_actors", s.background_actors},
           {"t_pre", s.t_pre},
           {"horizon", s.horizon},
           {"ttc_init", s.ttc_init},
           {"ttc_tolerance", s.ttc_tolerance},
           {"runs", s.runs},
           {"seed", s.seed},
           {"max_attempts", s.max_attempts},
           {"collision_check_dt", s.collision_check_dt},
           {"vehicle", s.vehicle},
           {"controller", s.controller}};
}

void from_json(const json& j, ScenarioSpec& s) {
  s = ScenarioSpec{};
  s.name = j.at("name").get<std::string>();
  s.type = scenario_type_from_string(j.at("type").get<std::string>());
  s.ego_init = j.at("ego_init").get<EgoState>();
  opt(j, "target", s.target);
  opt(j, "jitter", s.jitter);
  opt(j, "background_actors", s.background_actors);
  opt(j, "t_pre", s.t_pre);
  opt(j, "horizon", s.horizon);
  opt(j, "ttc_init", s.ttc_init);
  opt(j, "ttc_tolerance", s.ttc_tolerance);
  opt(j, "runs", s.runs);
  opt(j, "seed", s.seed);
  opt(j, "max_attempts", s.max_attempts);
  opt(j, "collision_check_dt", s.collision_check_dt);
  opt(j, "vehicle", s.vehicle);
  opt(j, "controller", s.controller);
  if (j.contains("ego_route")) {
    s.ego_route = j.at("ego_route").get<Route>();
  } else {
    // Straight lane along the initial heading covering the whole run.
    const Pose2& p = s.ego_init.pose;
    const double length = s.ego_init.speed * (s.horizon + s.t_pre) + 100.0;
    const Vec2 a = p.position() + p.forward() * (-s.ego_init.speed * s.t_pre);
    const Vec2 b = p.position() + p.forward() * length;
    s.ego_route = {{a.x, a.y, s.ego_init.speed}, {b.x, b.y, s.ego_init.speed}};
  }
}

void to_json(json& j, const RealizedJitter& r) {
  j = json{{"longitudinal", r.longitudinal}, {"lateral", r.lateral}, {"rotation", r.rotation}, {"speed", r.speed}};
}

void from_json(const json& j, RealizedJitter& r) {
  r.longitudinal = j.at("longitudinal").get<double>();
  r.lateral = j.at("lateral").get<double>();
  r.rotation = j.at("rotation").get<double>();
  r.speed = j.at("speed").get<double>();
}

void to_json(json& j, const ScenarioInstance& s) {
  j = json{{"scenario_name", s.scenario_name},
           {"type", to_string(s.type)},
           {"run_index", s.run_index},
           {"derived_seed", s.derived_seed},
           {"attempts", s.attempts},
           {"jitter", s.jitter},
           {"ego_init", s.ego_init},
           {"ego_route", s.ego_route},
           {"target", s.target},
           {"background", s.background},
           {"t_pre", s.t_pre},
           {"horizon", s.horizon},
           {"ttc_init", s.ttc_init},
           {"collision_check_dt", s.collision_check_dt},
           {"reference_contact_time", s.reference_contact_time},
           {"reference_impact_speed", s.reference_impact_speed},
           {"vehicle", s.vehicle},
           {"controller", s.controller}};
}

void from_json(const json& j, ScenarioInstance& s) {
  s = ScenarioInstance{};
  s.scenario_name = j.at("scenario_name").get<std::string>();
  s.type = scenario_type_from_string(j.at("type").get<std::string>());
  s.run_index = j.at("run_index").get<int>();
  s.derived_seed = j.at("derived_seed").get<std::uint64_t>();
  s.attempts = j.at("attempts").get<int>();
  s.jitter = j.at("jitter").get<RealizedJitter>();
  s.ego_init = j.at("ego_init").get<EgoState>();
  s.ego_route = j.at("ego_route").get<Route>();
  s.target = j.at("target").get<ActorTrack>();
  s.background = j.at("background").get<std::vector<ActorTrack>>();
  s.t_pre = j.at("t_pre").get<double>();
  s.horizon = j.at("horizon").get<double>();
  s.ttc_init = j.at("ttc_init").get<double>();
  s.collision_check_dt = j.at("collision_check_dt").get<double>();
  s.reference_contact_time = j.at("reference_contact_time").get<double>();
  s.reference_impact_speed = j.at("reference_impact_speed").get<double>();
  s.vehicle = j.at("vehicle").get<VehicleParams>();
  s.controller = j.at("controller").get<LqrConfig>();
}

void to_json(json& j, const CameraSpec& c) {
  const auto& e = c.extrinsic;
  const auto& i = c.intrinsic;
  j = json{{"camera_id", c.camera_id},
           {"extrinsic", {{"x", e.x}, {"y", e.y}, {"z", e.z}, {"yaw", e.yaw}, {"pitch", e.pitch}, {"roll", e.roll}}},
           {"intrinsic",
            {{"fx", i.fx}, {"fy", i.fy}, {"cx", i.cx}, {"cy", i.cy}, {"width", i.width}, {"height", i.height}}}};
}

void from_json(const json& j, CameraSpec& c) {
  c.camera_id = j.at("camera_id").get<std::string>();
  const json& e = j.at("extrinsic");
  c.extrinsic = {e.at("x").get<double>(),   e.at("y").get<double>(),     e.at("z").get<double>(),
                 e.at("yaw").get<double>(), e.at("pitch").get<double>(), e.at("roll").get<double>()};
  const json& i = j.at("intrinsic");
  c.intrinsic = {i.at("fx").get<double>(), i.at("fy").get<double>(),  i.at("cx").get<double>(),
                 i.at("cy").get<double>(), i.at("width").get<int>(), i.at("height").get<int>()};
}

void to_json(json& j, const PerceptionNoiseModel& n) {
  j = json{{"position_sigma", n.position_sigma},
           {"heading_sigma", n.heading_sigma},
           {"velocity_sigma", n.velocity_sigma},
           {"dropout", n.dropout},
           {"dropout_outside_bins", n.dropout_outside_bins},
           {"detection_range", n.detection_range}};
}

void from_json(const json& j, PerceptionNoiseModel& n) {
  n = PerceptionNoiseModel{};
  opt(j, "position_sigma", n.position_sigma);
  opt(j, "heading_sigma", n.heading_sigma);
  opt(j, "velocity_sigma", n.velocity_sigma);
  opt(j, "dropout", n.dropout);
  opt(j, "dropout_outside_bins", n.dropout_outside_bins);
  opt(j, "detection_range", n.detection_range);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    ScenarioSpec spec = j.get<ScenarioSpec>();
    validate(spec);
    return spec;
  } catch (const std::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw ConfigError("cannot write " + tmp.string());
    }
    out << text;
    if (!out) {
      throw ConfigError("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace ncap
