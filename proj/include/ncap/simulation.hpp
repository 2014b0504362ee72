#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncap/controller.hpp"
#include "ncap/observation.hpp"
#include "ncap/planner.hpp"
#include "ncap/scenario.hpp"

namespace ncap {

struct SimConfig {
  double physics_dt{0.01};
  double planner_period{0.5};
  double max_plan_horizon{3.0};

  bool operator==(const SimConfig&) const = default;
};

void validate(const SimConfig& cfg);

enum class Termination { kCollision, kHorizonReached, kTransportFailure };

std::string to_string(Termination t);
Termination termination_from_string(const std::string& s);

struct CollisionEvent {
  double time{0.0};
  Vec2 impact_point;
  double impact_speed{0.0};  ///< v_i
  std::string actor_id;
  Vec2 ego_velocity;
  Vec2 actor_velocity;

  bool operator==(const CollisionEvent&) const = default;
};

/// State after one physics substep and the control that produced it.
struct PhysicsTick {
  double time{0.0};
  EgoState ego;
  ControlInput control;
  bool fallback{false};

  bool operator==(const PhysicsTick&) const = default;
};

struct PlannerTick {
  double time{0.0};
  bool live{false};  ///< false during warm-up, where plans are not executed
  EgoState ego;
  HighLevelCommand command{HighLevelCommand::kStraight};
  std::vector<ActorState> objects;
  PlannerVerdict verdict;

  bool operator==(const PlannerTick&) const = default;
};

struct RunLog {
  ScenarioInstance instance;
  std::string planner;
  SimConfig sim;
  std::vector<PhysicsTick> ticks;
  std::vector<PlannerTick> planner_ticks;
  std::optional<CollisionEvent> collision;
  Termination termination{Termination::kHorizonReached};
  std::string failure;
  std::string fingerprint;  ///< hash of instance, planner name and sim config

  bool operator==(const RunLog&) const = default;
};

std::string config_fingerprint(const ScenarioInstance& instance, const std::string& planner, const SimConfig& sim);

/// Warm-up replays the scripted approach over [-t_pre, 0) feeding the
/// planner without executing its plans. The live phase replans every
/// planner period, recomputes control every physics substep, and stops at
/// the first ego-actor contact or the horizon.
RunLog run_scenario(const ScenarioInstance& instance, Planner& planner, Observer& observer, const SimConfig& cfg = {},
                    std::shared_ptr<GainCache> cache = nullptr);

/// Control from a direct control sequence at `elapsed` seconds after issue:
/// the latest entry not after `elapsed`, or the first entry before it.
ControlInput control_at(const std::vector<TimedControl>& controls, double elapsed);

/// Re-integrates the logged controls at `fine_dt` between physics ticks and
/// returns the earliest contact time found, if any.
std::optional<double> fine_contact_time(const RunLog& log, double fine_dt);

void to_json(nlohmann::json& j, const PlannerVerdict& v);
void from_json(const nlohmann::json& j, PlannerVerdict& v);
void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);
void to_json(nlohmann::json& j, const CollisionEvent& c);
void from_json(const nlohmann::json& j, CollisionEvent& c);

/// Stable JSON document. `content_hash` and `tick_count` guard against edits.
nlohmann::json runlog_to_json(const RunLog& log);
/// Throws ConfigError when the document is malformed, its content hash or
/// tick count disagrees with the body, or its fingerprint does not match.
RunLog runlog_from_json(const nlohmann::json& j);
std::string runlog_content_hash(const nlohmann::json& body);

/// Throws ConfigError on violated log invariants (tick spacing, collision
/// consistency, termination reason).
void check_consistency(const RunLog& log);

}  // namespace ncap
