#include "ncap/simulation.hpp"

#include <cmath>
#include <stdexcept>

#include "ncap/errors.hpp"
#include "ncap/serialization.hpp"

namespace ncap {

void validate(const SimConfig& cfg) {
  if (!(cfg.physics_dt > 0.0) || !(cfg.planner_period > 0.0) || !(cfg.max_plan_horizon > 0.0)) {
    throw std::invalid_argument("simulation periods must be positive");
  }
  const double ratio = cfg.planner_period / cfg.physics_dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
    throw std::invalid_argument("planner period must be a whole multiple of the physics step");
  }
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kCollision: return "collision";
    case Termination::kHorizonReached: return "horizon_reached";
    case Termination::kTransportFailure: return "transport_failure";
  }
  return "horizon_reached";
}

Termination termination_from_string(const std::string& s) {
  if (s == "collision") return Termination::kCollision;
  if (s == "horizon_reached") return Termination::kHorizonReached;
  if (s == "transport_failure") return Termination::kTransportFailure;
  throw ConfigError("unknown termination reason '" + s + "'");
}

std::string config_fingerprint(const ScenarioInstance& instance, const std::string& planner, const SimConfig& sim) {
  const json j{{"instance", instance}, {"planner", planner}, {"sim", sim}};
  return hex64(fnv1a64(j.dump()));
}

ControlInput control_at(const std::vector<TimedControl>& controls, double elapsed) {
  if (controls.empty()) {
    throw std::invalid_argument("empty control sequence");
  }
  const TimedControl* pick = &controls.front();
  for (const auto& c : controls) {
    if (c.time_offset <= elapsed) pick = &c;
  }
  return pick->input;
}

namespace {

long whole_steps(double span, double dt) { return std::lround(span / dt); }

WorldSnapshot snapshot(const ScenarioInstance& inst, double t, const EgoState& ego) {
  WorldSnapshot w;
  w.time = t;
  w.ego = ego;
  w.actors = inst.actors_at(t);
  w.route = &inst.ego_route;
  return w;
}

PlannerTick planner_tick(Planner& planner, Observer& observer, const WorldSnapshot& world, bool live,
                         double max_horizon) {
  PlannerTick tick;
  tick.time = world.time;
  tick.live = live;
  tick.ego = world.ego;
  const Observation obs = observer.observe(world);
  tick.command = obs.command;
  tick.objects = obs.objects;
  tick.verdict = planner.plan(obs);
  try {
    validate(tick.verdict, max_horizon);
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(std::string("planner verdict rejected: ") + e.what());
  }
  return tick;
}

std::optional<CollisionEvent> detect(const EgoState& ego, const VehicleParams& vp,
                                     const std::vector<ActorState>& actors) {
  const OrientedBox ego_box = ego_footprint(ego, vp);
  for (const auto& a : actors) {
    if (boxes_intersect(ego_box, a.box)) {
      CollisionEvent ev;
      ev.time = ego.time;
      ev.impact_point = contact_point(ego_box, a.box);
      ev.ego_velocity = ego.velocity();
      ev.actor_velocity = a.velocity;
      ev.impact_speed = impact_speed(ev.ego_velocity, ev.actor_velocity);
      ev.actor_id = a.actor_id;
      return ev;
    }
  }
  return std::nullopt;
}

}  // namespace

RunLog run_scenario(const ScenarioInstance& instance, Planner& planner, Observer& observer, const SimConfig& cfg,
                    std::shared_ptr<GainCache> cache) {
  validate(cfg);
  if (!cache) cache = std::make_shared<GainCache>();
  RunLog log;
  log.instance = instance;
  log.planner = planner.name();
  log.sim = cfg;
  log.fingerprint = config_fingerprint(instance, log.planner, cfg);

  const LqrController controller(instance.controller, instance.vehicle, cache);
  const double dt = cfg.physics_dt;
  const long steps_per_plan = whole_steps(cfg.planner_period, dt);
  const long n_steps = whole_steps(instance.horizon, dt);
  const long n_warm = static_cast<long>(std::ceil(instance.t_pre / cfg.planner_period - 1e-9));

  try {
    for (long k = 0; k < n_warm; ++k) {
      const double t = -static_cast<double>(n_warm - k) * cfg.planner_period;
      log.planner_ticks.push_back(
          planner_tick(planner, observer, snapshot(instance, t, instance.scripted_ego(t)), false,
                       cfg.max_plan_horizon));
    }

    EgoState ego = instance.ego_init;
    ego.time = 0.0;
    for (long k = 0; k < n_steps; ++k) {
      if (k % steps_per_plan == 0) {
        log.planner_ticks.push_back(
            planner_tick(planner, observer, snapshot(instance, ego.time, ego), true, cfg.max_plan_horizon));
      }
      const PlannerVerdict& verdict = log.planner_ticks.back().verdict;
      PhysicsTick tick;
      if (verdict.plan) {
        const ControlCommand cmd = controller.compute(ego, *verdict.plan);
        tick.control = cmd.input;
        tick.fallback = cmd.fallback;
      } else {
        const double elapsed = ego.time - log.planner_ticks.back().time;
        tick.control = clamp_control(control_at(*verdict.controls, elapsed), instance.vehicle);
      }
      ego = step(ego, tick.control, dt, instance.vehicle);
      ego.time = static_cast<double>(k + 1) * dt;
      tick.time = ego.time;
      tick.ego = ego;
      log.ticks.push_back(tick);
      if (auto hit = detect(ego, instance.vehicle, instance.actors_at(ego.time))) {
        log.collision = std::move(hit);
        log.termination = Termination::kCollision;
        return log;
      }
    }
    log.termination = Termination::kHorizonReached;
  } catch (const TransportError& e) {
    log.termination = Termination::kTransportFailure;
    log.failure = std::string("transport: ") + e.what();
  } catch (const ProtocolError& e) {
    log.termination = Termination::kTransportFailure;
    log.failure = std::string("protocol: ") + e.what();
  }
  return log;
}

std::optional<double> fine_contact_time(const RunLog& log, double fine_dt) {
  const ScenarioInstance& inst = log.instance;
  const double dt = log.sim.physics_dt;
  const long n = whole_steps(dt, fine_dt);
  EgoState ego = inst.ego_init;
  ego.time = 0.0;
  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    const double t0 = static_cast<double>(k) * dt;
    for (long j = 1; j <= n; ++j) {
      const double h = static_cast<double>(j) * fine_dt;
      EgoState e = step(ego, log.ticks[k].control, h, inst.vehicle);
      e.time = t0 + h;
      if (detect(e, inst.vehicle, inst.actors_at(e.time))) {
        return e.time;
      }
    }
    ego = log.ticks[k].ego;
  }
  return std::nullopt;
}

void to_json(json& j, const PlannerVerdict& v) {
  j = json{{"latency", v.latency}, {"diagnostics", v.diagnostics}};
  if (v.plan) j["plan"] = *v.plan;
  if (v.controls) {
    json controls = json::array();
    for (const auto& c : *v.controls) {
      controls.push_back(json::array({c.time_offset, c.input.steering, c.input.acceleration}));
    }
    j["controls"] = controls;
  }
}

void from_json(const json& j, PlannerVerdict& v) {
  v = PlannerVerdict{};
  v.latency = j.at("latency").get<double>();
  v.diagnostics = j.at("diagnostics").get<std::map<std::string, std::string>>();
  if (j.contains("plan")) v.plan = j.at("plan").get<PlannedTrajectory>();
  if (j.contains("controls")) {
    std::vector<TimedControl> controls;
    for (const auto& c : j.at("controls")) {
      controls.push_back({c.at(0).get<double>(), {c.at(1).get<double>(), c.at(2).get<double>()}});
    }
    v.controls = std::move(controls);
  }
}

void to_json(json& j, const SimConfig& c) {
  j = json{{"physics_dt", c.physics_dt}, {"planner_period", c.planner_period}, {"max_plan_horizon", c.max_plan_horizon}};
}

void from_json(const json& j, SimConfig& c) {
  c = SimConfig{};
  if (j.contains("physics_dt")) c.physics_dt = j.at("physics_dt").get<double>();
  if (j.contains("planner_period")) c.planner_period = j.at("planner_period").get<double>();
  if (j.contains("max_plan_horizon")) c.max_plan_horizon = j.at("max_plan_horizon").get<double>();
}

void to_json(json& j, const CollisionEvent& c) {
  j = json{{"time", c.time},
           {"impact_point", c.impact_point},
           {"impact_speed", c.impact_speed},
           {"actor_id", c.actor_id},
           {"ego_velocity", c.ego_velocity},
           {"actor_velocity", c.actor_velocity}};
}

void from_json(const json& j, CollisionEvent& c) {
  c.time = j.at("time").get<double>();
  c.impact_point = j.at("impact_point").get<Vec2>();
  c.impact_speed = j.at("impact_speed").get<double>();
  c.actor_id = j.at("actor_id").get<std::string>();
  c.ego_velocity = j.at("ego_velocity").get<Vec2>();
  c.actor_velocity = j.at("actor_velocity").get<Vec2>();
}

std::string runlog_content_hash(const json& body) {
  json copy = body;
  copy.erase("content_hash");
  return hex64(fnv1a64(copy.dump()));
}

json runlog_to_json(const RunLog& log) {
  // Physics ticks as rows: time, x, y, heading, speed, steering, acceleration, fallback.
  json ticks = json::array();
  for (const auto& t : log.ticks) {
    ticks.push_back(json::array({t.time, t.ego.pose.x, t.ego.pose.y, t.ego.pose.heading, t.ego.speed,
                                 t.control.steering, t.control.acceleration, t.fallback ? 1 : 0}));
  }
  json planner_ticks = json::array();
  for (const auto& p : log.planner_ticks) {
    planner_ticks.push_back(json{{"time", p.time},
                                 {"live", p.live},
                                 {"ego", p.ego},
                                 {"command", to_string(p.command)},
                                 {"objects", p.objects},
                                 {"verdict", p.verdict}});
  }
  json j{{"schema", "ncap.runlog/1"},
         {"fingerprint", log.fingerprint},
         {"planner", log.planner},
         {"sim", log.sim},
         {"instance", log.instance},
         {"termination", to_string(log.termination)},
         {"failure", log.failure},
         {"collision", log.collision ? json(*log.collision) : json(nullptr)},
         {"tick_count", log.ticks.size()},
         {"ticks", ticks},
         {"planner_ticks", planner_ticks}};
  j["content_hash"] = runlog_content_hash(j);
  return j;
}

RunLog runlog_from_json(const json& j) {
  RunLog log;
  try {
    if (j.at("schema").get<std::string>() != "ncap.runlog/1") {
      throw ConfigError("unsupported run log schema");
    }
    if (j.at("content_hash").get<std::string>() != runlog_content_hash(j)) {
      throw ConfigError("run log content hash mismatch");
    }
    log.fingerprint = j.at("fingerprint").get<std::string>();
    log.planner = j.at("planner").get<std::string>();
    log.sim = j.at("sim").get<SimConfig>();
    log.instance = j.at("instance").get<ScenarioInstance>();
    log.termination = termination_from_string(j.at("termination").get<std::string>());
    log.failure = j.at("failure").get<std::string>();
    if (!j.at("collision").is_null()) log.collision = j.at("collision").get<CollisionEvent>();
    for (const auto& r : j.at("ticks")) {
      PhysicsTick t;
      t.time = r.at(0).get<double>();
      t.ego.pose = Pose2{r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>()};
      t.ego.speed = r.at(4).get<double>();
      t.ego.time = t.time;
      t.control = {r.at(5).get<double>(), r.at(6).get<double>()};
      t.fallback = r.at(7).get<int>() != 0;
      log.ticks.push_back(t);
    }
    for (const auto& p : j.at("planner_ticks")) {
      PlannerTick t;
      t.time = p.at("time").get<double>();
      t.live = p.at("live").get<bool>();
      t.ego = p.at("ego").get<EgoState>();
      t.command = command_from_string(p.at("command").get<std::string>());
      t.objects = p.at("objects").get<std::vector<ActorState>>();
      t.verdict = p.at("verdict").get<PlannerVerdict>();
      log.planner_ticks.push_back(std::move(t));
    }
    if (j.at("tick_count").get<std::size_t>() != log.ticks.size()) {
      throw ConfigError("run log tick count mismatch");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed run log: ") + e.what());
  }
  if (config_fingerprint(log.instance, log.planner, log.sim) != log.fingerprint) {
    throw ConfigError("run log fingerprint mismatch");
  }
  return log;
}

void check_consistency(const RunLog& log) {
  auto fail = [](const std::string& what) { throw ConfigError("inconsistent run log: " + what); };
  const double dt = log.sim.physics_dt;
  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    if (log.ticks[k].time != static_cast<double>(k + 1) * dt) fail("tick times are not contiguous");
  }
  switch (log.termination) {
    case Termination::kCollision: {
      if (!log.collision || log.ticks.empty()) fail("collision termination without event");
      const CollisionEvent& c = *log.collision;
      if (c.time != log.ticks.back().time) fail("collision time differs from the final tick");
      if (c.ego_velocity != log.ticks.back().ego.velocity()) fail("collision ego velocity differs from the final tick");
      if (c.impact_speed != impact_speed(c.ego_velocity, c.actor_velocity)) fail("impact speed mismatch");
      break;
    }
    case Termination::kHorizonReached:
      if (log.collision) fail("collision event on a completed run");
      if (static_cast<long>(log.ticks.size()) != whole_steps(log.instance.horizon, dt)) fail("run ended early");
      break;
    case Termination::kTransportFailure:
      if (log.collision) fail("collision event on a failed run");
      break;
  }
}

}  // namespace ncap
