#include "ncap/scenario.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>

#include "ncap/errors.hpp"

namespace ncap {

std::string to_string(ScenarioType t) {
  switch (t) {
    case ScenarioType::kStationary: return "stationary";
    case ScenarioType::kFrontal: return "frontal";
    case ScenarioType::kSide: return "side";
  }
  return "stationary";
}

ScenarioType scenario_type_from_string(const std::string& s) {
  if (s == "stationary") return ScenarioType::kStationary;
  if (s == "frontal") return ScenarioType::kFrontal;
  if (s == "side") return ScenarioType::kSide;
  throw ScenarioError("unknown scenario type '" + s + "'");
}

std::string to_string(HighLevelCommand c) {
  switch (c) {
    case HighLevelCommand::kLeft: return "left";
    case HighLevelCommand::kStraight: return "straight";
    case HighLevelCommand::kRight: return "right";
  }
  return "straight";
}

HighLevelCommand command_from_string(const std::string& s) {
  if (s == "left") return HighLevelCommand::kLeft;
  if (s == "straight") return HighLevelCommand::kStraight;
  if (s == "right") return HighLevelCommand::kRight;
  throw std::invalid_argument("unknown high-level command '" + s + "'");
}

ActorState ActorTrack::state_at(double t) const {
  ActorState out;
  out.actor_id = actor_id;
  out.class_label = class_label;
  out.box.length = length;
  out.box.width = width;
  if (keyframes.empty()) {
    throw std::logic_error("actor track '" + actor_id + "' has no keyframes");
  }
  if (keyframes.size() == 1) {
    out.box.center = keyframes.front().pose;
    return out;
  }
  std::size_t k = 1;
  while (k + 1 < keyframes.size() && t > keyframes[k].time) {
    ++k;
  }
  const Keyframe& a = keyframes[k - 1];
  const Keyframe& b = keyframes[k];
  const double span = b.time - a.time;
  const Vec2 delta = b.pose.position() - a.pose.position();
  const double alpha = (t - a.time) / span;
  const Vec2 p = a.pose.position() + delta * alpha;
  out.box.center = Pose2{p.x, p.y, a.pose.heading + alpha * normalize_angle(b.pose.heading - a.pose.heading)};
  out.velocity = delta * (1.0 / span);
  return out;
}

ActorTrack constant_velocity_track(const ActorState& at_zero, double t0, double t1) {
  ActorTrack track;
  track.actor_id = at_zero.actor_id;
  track.class_label = at_zero.class_label;
  track.length = at_zero.box.length;
  track.width = at_zero.box.width;
  const Pose2& c = at_zero.box.center;
  for (double t : {t0, t1}) {
    const Vec2 p = c.position() + at_zero.velocity * t;
    track.keyframes.push_back({t, Pose2{p.x, p.y, c.heading}});
  }
  return track;
}

void validate(const ScenarioSpec& spec) {
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) {
      throw ScenarioError("scenario '" + spec.name + "': " + what);
    }
  };
  check(spec.ttc_init > 0.0, "ttc_init must be positive");
  check(spec.horizon > spec.ttc_init, "horizon must exceed ttc_init");
  check(spec.t_pre >= 0.0, "t_pre must be non-negative");
  check(spec.ttc_tolerance > 0.0, "ttc tolerance must be positive");
  check(spec.runs > 0, "runs must be positive");
  check(spec.max_attempts > 0, "max_attempts must be positive");
  check(spec.collision_check_dt > 0.0, "collision_check_dt must be positive");
  check(spec.ego_init.speed > 0.0 && spec.ego_init.speed <= spec.vehicle.max_speed,
        "ego speed must lie in (0, max_speed]");
  check(spec.target.length > 0.0 && spec.target.width > 0.0, "target dimensions must be positive");
  check(spec.target.speed >= 0.0, "target speed must be non-negative");
  check(!spec.ego_route.empty(), "ego route must not be empty");
  for (const Interval* iv : {&spec.jitter.longitudinal, &spec.jitter.lateral, &spec.jitter.rotation,
                             &spec.jitter.speed}) {
    check(iv->lo <= 0.0 && iv->hi >= 0.0, "jitter intervals must contain zero");
  }
  for (const auto& a : spec.background_actors) {
    check(a.actor_id != spec.target.actor_id, "background actor ids must differ from the target id");
  }
  try {
    validate(spec.vehicle);
    validate(spec.controller);
  } catch (const std::exception& e) {
    throw ScenarioError("scenario '" + spec.name + "': " + e.what());
  }
}

EgoState ScenarioInstance::scripted_ego(double t) const {
  EgoState s = ego_init;
  const Vec2 p = ego_init.pose.position() + ego_init.pose.forward() * (ego_init.speed * t);
  s.pose = Pose2{p.x, p.y, ego_init.pose.heading};
  s.time = t;
  return s;
}

std::vector<ActorState> ScenarioInstance::actors_at(double t) const {
  std::vector<ActorState> out;
  out.reserve(background.size() + 1);
  out.push_back(target.state_at(t));
  for (const auto& b : background) {
    out.push_back(b.state_at(t));
  }
  return out;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
  return mix64(mix64(mix64(seed) ^ index) ^ (stream * 0xd1b54a32d192ed03ULL));
}

RolloutContact no_action_rollout(const EgoState& ego, const std::vector<ActorTrack>& actors, double horizon,
                                 double dt, const VehicleParams& p) {
  const long ticks = std::lround(horizon / dt);
  const ControlInput hold{0.0, 0.0};
  EgoState s = ego;
  for (long k = 1; k <= ticks; ++k) {
    s = step(s, hold, dt, p);
    s.time = static_cast<double>(k) * dt;
    const OrientedBox ego_box = ego_footprint(s, p);
    for (const auto& track : actors) {
      const ActorState a = track.state_at(s.time);
      if (boxes_intersect(ego_box, a.box)) {
        return {true, s.time, impact_speed(s.velocity(), a.velocity), a.actor_id};
      }
    }
  }
  return {};
}

double reference_impact_speed(const ScenarioInstance& instance) {
  std::vector<ActorTrack> actors{instance.target};
  actors.insert(actors.end(), instance.background.begin(), instance.background.end());
  const RolloutContact c =
      no_action_rollout(instance.ego_init, actors, instance.horizon, instance.collision_check_dt, instance.vehicle);
  if (!c.collided) {
    throw ScenarioError("no-action rollout of '" + instance.scenario_name + "' run " +
                        std::to_string(instance.run_index) + " never reaches contact");
  }
  return c.impact_speed;
}

namespace {

double base_heading(ScenarioType t) {
  switch (t) {
    case ScenarioType::kStationary: return 0.0;
    case ScenarioType::kFrontal: return kPi;
    case ScenarioType::kSide: return 0.5 * kPi;
  }
  return 0.0;
}

double draw(std::mt19937_64& rng, const Interval& iv) {
  return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
}

// Target state at the collision instant in the ego-lane frame, with its
// center at longitudinal position `s`.
ActorState local_target_at_collision(const ScenarioSpec& spec, const RealizedJitter& j, double s) {
  ActorState a;
  a.actor_id = spec.target.actor_id;
  a.class_label = spec.target.class_label;
  a.box.length = spec.target.length;
  a.box.width = spec.target.width;
  a.box.center = Pose2{s, spec.target.lateral_offset + j.lateral,
                       base_heading(spec.type) + spec.target.heading_offset + j.rotation};
  const double speed =
      spec.type == ScenarioType::kStationary ? 0.0 : std::max(0.0, spec.target.speed + j.speed);
  a.velocity = a.box.center.forward() * speed;
  if (speed == 0.0) {
    a.velocity = Vec2{};
  }
  return a;
}

// Longitudinal placement such that the straight constant-speed ego first
// touches the target exactly at ttc.
double solve_placement(const ScenarioSpec& spec, const RealizedJitter& j) {
  const double v0 = spec.ego_init.speed;
  const double ttc = spec.ttc_init;
  const OrientedBox ego_at_ttc{Pose2{v0 * ttc, 0.0, 0.0}, spec.vehicle.length, spec.vehicle.width};
  auto overlaps = [&](double s) {
    return boxes_intersect(ego_at_ttc, local_target_at_collision(spec, j, s).box);
  };
  double inside = v0 * ttc;
  double outside = inside + spec.vehicle.length + spec.vehicle.width + spec.target.length + spec.target.width;
  if (!overlaps(inside)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  for (int i = 0; i < 200 && outside - inside > 1e-10; ++i) {
    const double mid = 0.5 * (inside + outside);
    (overlaps(mid) ? inside : outside) = mid;
  }
  return inside;
}

ActorTrack to_global_track(const ActorState& local_at_collision, double ttc, double t0, double t1,
                           const Pose2& frame) {
  ActorTrack track;
  track.actor_id = local_at_collision.actor_id;
  track.class_label = local_at_collision.class_label;
  track.length = local_at_collision.box.length;
  track.width = local_at_collision.box.width;
  const Pose2& c = local_at_collision.box.center;
  for (double t : {t0, t1}) {
    const Vec2 p = c.position() + local_at_collision.velocity * (t - ttc);
    track.keyframes.push_back({t, from_ego_frame(Pose2{p.x, p.y, c.heading}, frame)});
  }
  return track;
}

}  // namespace

ScenarioInstance instantiate_run(const ScenarioSpec& spec, int run_index) {
  validate(spec);
  if (run_index < 0 || run_index >= spec.runs) {
    throw ScenarioError("run index " + std::to_string(run_index) + " outside [0, " + std::to_string(spec.runs) +
                        ") for scenario '" + spec.name + "'");
  }
  ScenarioInstance inst;
  inst.scenario_name = spec.name;
  inst.type = spec.type;
  inst.run_index = run_index;
  inst.derived_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(run_index));
  inst.ego_init = spec.ego_init;
  inst.ego_init.time = 0.0;
  inst.ego_route = spec.ego_route;
  inst.t_pre = spec.t_pre;
  inst.horizon = spec.horizon;
  inst.ttc_init = spec.ttc_init;
  inst.collision_check_dt = spec.collision_check_dt;
  inst.vehicle = spec.vehicle;
  inst.controller = spec.controller;
  // Tracks extend past the horizon so that 3 s predictions stay defined.
  const double t_end = spec.horizon + 5.0;
  for (const auto& b : spec.background_actors) {
    inst.background.push_back(constant_velocity_track(b, -spec.t_pre, t_end));
  }

  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    std::mt19937_64 rng(derive_seed(inst.derived_seed, static_cast<std::uint64_t>(attempt),
                                    static_cast<std::uint64_t>(SeedStream::kJitter)));
    RealizedJitter j;
    j.longitudinal = draw(rng, spec.jitter.longitudinal);
    j.lateral = draw(rng, spec.jitter.lateral);
    j.rotation = draw(rng, spec.jitter.rotation);
    j.speed = draw(rng, spec.jitter.speed);
    if (spec.type == ScenarioType::kStationary) {
      j.speed = 0.0;
    }

    const double s = solve_placement(spec, j);
    if (!std::isfinite(s)) {
      continue;
    }
    ActorState local = local_target_at_collision(spec, j, s + j.longitudinal);
    inst.target = to_global_track(local, spec.ttc_init, -spec.t_pre, t_end, spec.ego_init.pose);
    inst.jitter = j;
    inst.attempts = attempt + 1;

    std::vector<ActorTrack> actors{inst.target};
    actors.insert(actors.end(), inst.background.begin(), inst.background.end());
    const RolloutContact c =
        no_action_rollout(inst.ego_init, actors, spec.horizon, spec.collision_check_dt, spec.vehicle);
    if (!c.collided || c.actor_id != spec.target.actor_id ||
        std::abs(c.time - spec.ttc_init) > spec.ttc_tolerance || !(c.impact_speed > 0.0)) {
      continue;
    }
    inst.reference_contact_time = c.time;
    inst.reference_impact_speed = c.impact_speed;
    return inst;
  }
  throw ScenarioError("scenario '" + spec.name + "' run " + std::to_string(run_index) + ": no feasible jitter in " +
                      std::to_string(spec.max_attempts) + " attempts");
}

HighLevelCommand high_level_command(const EgoState& ego, const Route& route, const CommandConfig& cfg) {
  if (route.size() < 2) {
    return HighLevelCommand::kStraight;
  }
  const Vec2 p = ego.pose.position();
  std::size_t best_seg = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  double best_param = 0.0;
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    const Vec2 a{route[i].x, route[i].y};
    const Vec2 d = Vec2{route[i + 1].x, route[i + 1].y} - a;
    const double len2 = d.dot(d);
    const double u = len2 > 0.0 ? (p - a).dot(d) / len2 : 0.0;
    const double uc = std::clamp(u, 0.0, 1.0);
    const double dist = (p - (a + d * uc)).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best_seg = i;
      best_param = u;
    }
  }
  if (best_seg + 2 == route.size() && best_param >= 1.0) {
    return HighLevelCommand::kStraight;
  }

  auto seg_dir = [&](std::size_t i) {
    return std::atan2(route[i + 1].y - route[i].y, route[i + 1].x - route[i].x);
  };
  auto seg_len = [&](std::size_t i) {
    return std::hypot(route[i + 1].x - route[i].x, route[i + 1].y - route[i].y);
  };
  // Arc length remaining to the end of the current segment.
  double travelled = seg_len(best_seg) * (1.0 - std::clamp(best_param, 0.0, 1.0));
  double prev_dir = seg_dir(best_seg);
  double turn = 0.0;
  for (std::size_t i = best_seg + 1; i + 1 < route.size() && travelled <= cfg.horizon; ++i) {
    if (seg_len(i) == 0.0) {
      continue;
    }
    turn += normalize_angle(seg_dir(i) - prev_dir);
    prev_dir = seg_dir(i);
    travelled += seg_len(i);
  }
  if (turn > cfg.threshold) return HighLevelCommand::kLeft;
  if (turn < -cfg.threshold) return HighLevelCommand::kRight;
  return HighLevelCommand::kStraight;
}

}  // namespace ncap
