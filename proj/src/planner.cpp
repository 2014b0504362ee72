#include "ncap/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ncap/errors.hpp"
#include "ncap/serialization.hpp"

namespace ncap {

void validate(const PlannerVerdict& verdict, double max_horizon) {
  if (verdict.plan.has_value() == verdict.controls.has_value()) {
    throw std::invalid_argument("verdict must carry exactly one of plan or controls");
  }
  if (verdict.plan) {
    validate_trajectory(*verdict.plan, max_horizon);
    return;
  }
  const auto& controls = *verdict.controls;
  if (controls.empty()) {
    throw std::invalid_argument("control sequence is empty");
  }
  double prev = -1.0;
  for (const auto& c : controls) {
    if (!(c.time_offset >= 0.0) || !(c.time_offset > prev)) {
      throw std::invalid_argument("control offsets must be non-negative and strictly increasing");
    }
    if (!std::isfinite(c.input.steering) || !std::isfinite(c.input.acceleration)) {
      throw std::invalid_argument("control values must be finite");
    }
    prev = c.time_offset;
  }
  if (prev > max_horizon + 1e-9) {
    throw std::invalid_argument("control sequence exceeds the configured horizon");
  }
}

namespace {

PlannedTrajectory empty_plan(const Observation& obs) {
  PlannedTrajectory traj;
  traj.issued_at = obs.time;
  traj.origin = obs.ego.pose;
  traj.origin_speed = obs.ego.speed;
  return traj;
}

int plan_steps() { return static_cast<int>(std::lround(kPlanHorizon / kPlanSpacing)); }

PlannerVerdict wrap(PlannedTrajectory traj) {
  PlannerVerdict v;
  v.plan = std::move(traj);
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

PlannerVerdict plan_constant_velocity(const Observation& obs) {
  PlannedTrajectory traj = empty_plan(obs);
  const Pose2& p = obs.ego.pose;
  const double v = obs.ego.speed;
  for (int k = 1; k <= plan_steps(); ++k) {
    const double t = k * kPlanSpacing;
    const Vec2 q = p.position() + p.forward() * (v * t);
    traj.waypoints.push_back({t, Pose2{q.x, q.y, p.heading}, v});
  }
  return wrap(std::move(traj));
}

PlannedTrajectory braking_plan(const Observation& obs, double deceleration) {
  if (!(deceleration < 0.0)) {
    throw std::invalid_argument("braking deceleration must be negative");
  }
  PlannedTrajectory traj = empty_plan(obs);
  const Pose2& p = obs.ego.pose;
  const double v0 = std::max(0.0, obs.ego.speed);
  const double t_stop = v0 / -deceleration;
  for (int k = 1; k <= plan_steps(); ++k) {
    const double t = k * kPlanSpacing;
    const double tau = std::min(t, t_stop);
    const double s = v0 * tau + 0.5 * deceleration * tau * tau;
    const Vec2 q = p.position() + p.forward() * s;
    traj.waypoints.push_back({t, Pose2{q.x, q.y, p.heading}, std::max(0.0, v0 + deceleration * tau)});
  }
  return traj;
}

bool corridor_occupied(const Observation& obs, const NaiveBaselineConfig& cfg) {
  const double reach = cfg.corridor_time * std::max(0.0, obs.ego.speed);
  const Pose2& ego = obs.ego.pose;
  const Vec2 mid = from_ego_frame(Vec2{0.5 * reach, 0.0}, ego);
  const OrientedBox corridor{Pose2{mid.x, mid.y, ego.heading}, reach, 2.0 * cfg.corridor_half_width};
  for (const ActorState& obj : obs.objects) {
    if (cfg.use_box_overlap) {
      if (boxes_intersect(corridor, obj.box)) return true;
      continue;
    }
    const Vec2 local = to_ego_frame(obj.box.center.position(), ego);
    if (std::abs(local.y) <= cfg.corridor_half_width && local.x >= 0.0 && local.x <= reach) {
      return true;
    }
  }
  return false;
}

PlannerVerdict plan_naive_baseline(const Observation& obs, const NaiveBaselineConfig& cfg) {
  if (corridor_occupied(obs, cfg)) {
    PlannerVerdict v = wrap(braking_plan(obs, cfg.deceleration));
    v.diagnostics["braking"] = "1";
    return v;
  }
  return plan_constant_velocity(obs);
}

PlannerVerdict NaiveBaselinePlanner::plan(const Observation& obs) {
  if (cfg_.hold_until_stop && braking_) {
    PlannerVerdict v = wrap(braking_plan(obs, cfg_.deceleration));
    v.diagnostics["braking"] = "held";
    return v;
  }
  PlannerVerdict v = plan_naive_baseline(obs, cfg_);
  braking_ = v.diagnostics.count("braking") > 0;
  return v;
}

PlannerVerdict plan_scripted_oracle(const Observation& obs, const ScenarioInstance& instance,
                                    const OracleConfig& cfg) {
  if (obs.time < 0.0) {
    return plan_constant_velocity(obs);
  }
  if (instance.type != ScenarioType::kFrontal) {
    return wrap(braking_plan(obs, cfg.deceleration));
  }
  // Lane change to the right along a cosine profile fixed in scenario time.
  const Pose2& lane = instance.ego_init.pose;
  const Pose2 local = to_ego_frame(obs.ego.pose, lane);
  const double v = std::max(0.0, obs.ego.speed);
  const double T = cfg.shift_duration;
  auto offset = [&](double t) {
    const double tc = std::clamp(t, 0.0, T);
    return -cfg.lateral_shift * 0.5 * (1.0 - std::cos(kPi * tc / T));
  };
  auto offset_rate = [&](double t) {
    return t >= T ? 0.0 : -cfg.lateral_shift * 0.5 * kPi / T * std::sin(kPi * std::max(t, 0.0) / T);
  };
  PlannedTrajectory traj = empty_plan(obs);
  for (int k = 1; k <= plan_steps(); ++k) {
    const double dt = k * kPlanSpacing;
    const double t = obs.time + dt;
    const double heading = v > 0.0 ? std::atan2(offset_rate(t), v) : 0.0;
    const Pose2 q = from_ego_frame(Pose2{local.x + v * dt, offset(t), heading}, lane);
    traj.waypoints.push_back({dt, q, v});
  }
  return wrap(std::move(traj));
}

double inflation(const PostprocessConfig& cfg) { return cfg.inflate_extent ? cfg.ego_half_width + cfg.margin : 0.0; }

double penetration_depth(const Vec2& p, const OrientedBox& box) {
  const Vec2 local = to_ego_frame(p, box.center);
  return std::min(0.5 * box.length - std::abs(local.x), 0.5 * box.width - std::abs(local.y));
}

namespace {

// Gradient of the penetration depth. `origin` decides the push direction
// when the point sits on a symmetry axis of the box.
Vec2 depth_gradient(const Vec2& p, const OrientedBox& box, const Vec2& origin) {
  const Vec2 local = to_ego_frame(p, box.center);
  const Vec2 origin_local = to_ego_frame(origin, box.center);
  const double exit_lon = 0.5 * box.length - std::abs(local.x);
  const double exit_lat = 0.5 * box.width - std::abs(local.y);
  auto side = [](double coord, double fallback) {
    if (coord != 0.0) return coord > 0.0 ? 1.0 : -1.0;
    if (fallback != 0.0) return fallback > 0.0 ? 1.0 : -1.0;
    return 1.0;
  };
  if (exit_lat <= exit_lon) {
    return box.center.left() * -side(local.y, origin_local.y);
  }
  return box.center.forward() * -side(local.x, origin_local.x);
}

}  // namespace

PlannedTrajectory postprocess_waypoints(const PlannedTrajectory& plan, const std::vector<OccupancyEntry>& occupancy,
                                        const PostprocessConfig& cfg) {
  if (plan.waypoints.empty()) {
    throw std::invalid_argument("cannot post-process an empty plan");
  }
  const double grow = 2.0 * inflation(cfg);
  PlannedTrajectory out = plan;
  const Vec2 origin = plan.origin.position();
  for (Waypoint& wp : out.waypoints) {
    std::vector<OrientedBox> boxes;
    for (const auto& occ : occupancy) {
      if (occ.time_offset == wp.time_offset) {
        boxes.push_back({occ.box.center, occ.box.length + grow, occ.box.width + grow});
      }
    }
    const Vec2 anchor = wp.pose.position();
    auto cost = [&](const Vec2& p) {
      const Vec2 d = p - anchor;
      double c = cfg.anchor_weight * d.dot(d);
      for (const auto& b : boxes) {
        const double depth = penetration_depth(p, b) + cfg.clearance;
        if (depth > 0.0) c += cfg.obstacle_weight * depth * depth;
      }
      return c;
    };
    const bool active = std::any_of(boxes.begin(), boxes.end(), [&](const OrientedBox& b) {
      return penetration_depth(anchor, b) + cfg.clearance > 0.0;
    });
    if (!active) {
      continue;
    }
    Vec2 p = anchor;
    Vec2 best = anchor;
    double best_cost = cost(anchor);
    for (int it = 0; it < cfg.iterations; ++it) {
      Vec2 grad = (p - anchor) * (2.0 * cfg.anchor_weight);
      for (const auto& b : boxes) {
        const double depth = penetration_depth(p, b) + cfg.clearance;
        if (depth > 0.0) {
          grad = grad + depth_gradient(p, b, origin) * (2.0 * cfg.obstacle_weight * depth);
        }
      }
      p = p - grad * cfg.step_size;
      const double c = cost(p);
      if (c < best_cost) {
        best_cost = c;
        best = p;
      }
    }
    wp.pose = Pose2{best.x, best.y, wp.pose.heading};
  }
  return out;
}

std::vector<OccupancyEntry> predict_occupancy(const Observation& obs, const PlannedTrajectory& plan) {
  std::vector<OccupancyEntry> out;
  for (const auto& wp : plan.waypoints) {
    for (const auto& obj : obs.objects) {
      const Vec2 c = obj.box.center.position() + obj.velocity * wp.time_offset;
      out.push_back({wp.time_offset, OrientedBox{Pose2{c.x, c.y, obj.box.center.heading}, obj.box.length,
                                                 obj.box.width}});
    }
  }
  return out;
}

PostProcessingPlanner::PostProcessingPlanner(std::unique_ptr<Planner> inner, PostprocessConfig cfg)
    : inner_(std::move(inner)), cfg_(cfg) {
  if (!inner_) {
    throw std::invalid_argument("post-processing planner needs an inner planner");
  }
}

std::string PostProcessingPlanner::name() const { return inner_->name() + "+postprocess"; }

PlannerVerdict PostProcessingPlanner::plan(const Observation& obs) {
  PlannerVerdict v = inner_->plan(obs);
  if (!v.plan) {
    return v;
  }
  const PlannedTrajectory raw = *v.plan;
  v.plan = postprocess_waypoints(raw, predict_occupancy(obs, raw), cfg_);
  v.diagnostics["raw_heading_discontinuity"] = fmt(max_heading_discontinuity(raw));
  v.diagnostics["processed_heading_discontinuity"] = fmt(max_heading_discontinuity(*v.plan));
  return v;
}

std::string to_string(Capability c) { return c == Capability::kControls ? "controls" : "waypoints"; }

namespace {

Capability capability_from_string(const std::string& s) {
  if (s == "waypoints") return Capability::kWaypoints;
  if (s == "controls") return Capability::kControls;
  throw ProtocolError("unknown planner capability '" + s + "'");
}

}  // namespace

json make_hello(int version) { return json{{"type", "hello"}, {"version", version}}; }

json make_hello_reply(Capability capability, int version) {
  return json{{"type", "hello"}, {"version", version}, {"capability", to_string(capability)}};
}

json make_error(const std::string& message) { return json{{"type", "error"}, {"message", message}}; }

json encode_step(const Observation& obs) {
  json payloads = json::object();
  for (const auto& [cam, bytes] : obs.sensor_payload) {
    payloads[cam] = wire::base64_encode(bytes);
  }
  return json{{"type", "step"},
              {"version", wire::kProtocolVersion},
              {"time", obs.time},
              {"ego_pose", obs.ego.pose},
              {"ego_speed", obs.ego.speed},
              {"command", to_string(obs.command)},
              {"actors", obs.objects},
              {"cameras", obs.camera_rig ? json(*obs.camera_rig) : json::array()},
              {"payloads", payloads}};
}

Observation decode_step(const json& msg) {
  try {
    if (msg.at("type").get<std::string>() != "step") {
      throw ProtocolError("expected a step message");
    }
    Observation obs;
    obs.time = msg.at("time").get<double>();
    obs.ego.pose = msg.at("ego_pose").get<Pose2>();
    obs.ego.speed = msg.at("ego_speed").get<double>();
    obs.ego.time = obs.time;
    obs.command = command_from_string(msg.at("command").get<std::string>());
    obs.objects = msg.at("actors").get<std::vector<ActorState>>();
    auto cams = msg.at("cameras").get<CameraRig>();
    if (!cams.empty()) obs.camera_rig = std::move(cams);
    for (const auto& [cam, text] : msg.at("payloads").items()) {
      obs.sensor_payload[cam] = wire::base64_decode(text.get<std::string>());
    }
    return obs;
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("malformed step message: ") + e.what());
  }
}

json encode_verdict(const PlannerVerdict& verdict) {
  json j{{"type", "verdict"}, {"latency", verdict.latency}, {"diagnostics", verdict.diagnostics}};
  if (verdict.plan) {
    j["waypoints"] = verdict.plan->waypoints;
  }
  if (verdict.controls) {
    json controls = json::array();
    for (const auto& c : *verdict.controls) {
      controls.push_back(json{{"t", c.time_offset}, {"steering", c.input.steering}, {"acceleration", c.input.acceleration}});
    }
    j["controls"] = controls;
  }
  return j;
}

PlannerVerdict decode_verdict(const json& msg, const Observation& obs, double max_horizon) {
  PlannerVerdict v;
  try {
    const std::string type = msg.at("type").get<std::string>();
    if (type == "error") {
      throw ProtocolError("planner reported an error: " + msg.value("message", std::string("unspecified")));
    }
    if (type != "verdict") {
      throw ProtocolError("expected a verdict message, got '" + type + "'");
    }
    v.latency = msg.value("latency", 0.0);
    if (auto it = msg.find("diagnostics"); it != msg.end()) {
      v.diagnostics = it->get<std::map<std::string, std::string>>();
    }
    if (auto it = msg.find("waypoints"); it != msg.end()) {
      PlannedTrajectory traj = empty_plan(obs);
      traj.waypoints = it->get<std::vector<Waypoint>>();
      v.plan = std::move(traj);
    }
    if (auto it = msg.find("controls"); it != msg.end()) {
      std::vector<TimedControl> controls;
      for (const auto& c : *it) {
        controls.push_back({c.at("t").get<double>(), {c.at("steering").get<double>(), c.at("acceleration").get<double>()}});
      }
      v.controls = std::move(controls);
    }
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("malformed verdict: ") + e.what());
  }
  try {
    validate(v, max_horizon);
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(std::string("verdict violates invariants: ") + e.what());
  }
  return v;
}

ExternalPlanner::ExternalPlanner(std::unique_ptr<wire::ByteStream> stream, std::chrono::milliseconds timeout,
                                 std::string name)
    : stream_(std::move(stream)), timeout_(timeout), name_(std::move(name)) {
  if (!stream_) {
    throw std::invalid_argument("external planner needs a connected stream");
  }
  wire::send_message(*stream_, make_hello());
  const json reply = wire::recv_message(*stream_, timeout_);
  const std::string type = reply.value("type", "");
  if (type == "error") {
    throw ProtocolError("planner refused the handshake: " + reply.value("message", std::string("unspecified")));
  }
  if (type != "hello" || reply.value("version", -1) != wire::kProtocolVersion) {
    throw ProtocolError("planner handshake failed: unsupported reply or protocol version");
  }
  capability_ = capability_from_string(reply.value("capability", std::string("waypoints")));
}

ExternalPlanner::~ExternalPlanner() {
  try {
    wire::send_message(*stream_, json{{"type", "bye"}});
    stream_->close();
  } catch (...) {
    // Peer already gone; nothing left to release.
  }
}

PlannerVerdict ExternalPlanner::plan(const Observation& obs) {
  wire::send_message(*stream_, encode_step(obs));
  return decode_verdict(wire::recv_message(*stream_, timeout_), obs);
}

int serve_planner(wire::ByteStream& stream, Planner& planner, std::chrono::milliseconds timeout) {
  int answered = 0;
  try {
    const json hello = wire::recv_message(stream, timeout);
    if (hello.value("type", "") != "hello") {
      wire::send_message(stream, make_error("expected hello"));
      return answered;
    }
    if (hello.value("version", -1) != wire::kProtocolVersion) {
      wire::send_message(stream, make_error("unsupported protocol version"));
      return answered;
    }
    wire::send_message(stream, make_hello_reply(Capability::kWaypoints));
    while (true) {
      const json msg = wire::recv_message(stream, timeout);
      const std::string type = msg.value("type", "");
      if (type == "bye") {
        return answered;
      }
      if (type != "step") {
        wire::send_message(stream, make_error("unexpected message type '" + type + "'"));
        return answered;
      }
      PlannerVerdict verdict;
      try {
        verdict = planner.plan(decode_step(msg));
      } catch (const std::exception& e) {
        wire::send_message(stream, make_error(e.what()));
        return answered;
      }
      wire::send_message(stream, encode_verdict(verdict));
      ++answered;
    }
  } catch (const TransportError&) {
    return answered;
  }
}

}  // namespace ncap
