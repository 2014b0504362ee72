#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncap/controller.hpp"
#include "ncap/geometry.hpp"
#include "ncap/vehicle_model.hpp"

namespace ncap {

enum class ScenarioType { kStationary, kFrontal, kSide };

std::string to_string(ScenarioType t);
ScenarioType scenario_type_from_string(const std::string& s);

enum class HighLevelCommand { kLeft, kStraight, kRight };

std::string to_string(HighLevelCommand c);
HighLevelCommand command_from_string(const std::string& s);

struct RoutePoint {
  double x{0.0};
  double y{0.0};
  double speed{0.0};

  bool operator==(const RoutePoint&) const = default;
};

using Route = std::vector<RoutePoint>;

/// Closed interval [lo, hi] containing zero.
struct Interval {
  double lo{0.0};
  double hi{0.0};

  bool contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const Interval&) const = default;
};

/// Per-run perturbation ranges of the target actor, in the ego-lane frame.
struct JitterRanges {
  Interval longitudinal;  ///< m, shift along the ego lane after placement
  Interval lateral;       ///< m, lateral offset at the collision instant
  Interval rotation;      ///< rad, heading perturbation
  Interval speed;         ///< m/s, target speed perturbation (ignored for stationary)

  bool operator==(const JitterRanges&) const = default;
};

/// Nominal target actor. Poses are relative to the ego-lane frame (origin
/// at the ego start pose, x along its heading) at the collision instant.
struct TargetTemplate {
  std::string actor_id{"target"};
  ActorClass class_label{ActorClass::kCar};
  double length{4.5};
  double width{1.9};
  double speed{0.0};
  double lateral_offset{0.0};
  double heading_offset{0.0};  ///< added to the type's base heading (0, pi, pi/2)

  bool operator==(const TargetTemplate&) const = default;
};

/// Piecewise-linear actor motion through timestamped keyframes; linear
/// extrapolation outside the keyframe span.
struct ActorTrack {
  struct Keyframe {
    double time{0.0};
    Pose2 pose;

    bool operator==(const Keyframe&) const = default;
  };

  std::string actor_id;
  ActorClass class_label{ActorClass::kCar};
  double length{4.5};
  double width{1.9};
  std::vector<Keyframe> keyframes;

  ActorState state_at(double t) const;
  bool operator==(const ActorTrack&) const = default;
};

/// Constant-velocity track through `pose_at_zero` over [t0, t1].
ActorTrack constant_velocity_track(const ActorState& at_zero, double t0, double t1);

struct ScenarioSpec {
  std::string name;
  ScenarioType type{ScenarioType::kStationary};
  EgoState ego_init;
  Route ego_route;
  TargetTemplate target;
  JitterRanges jitter;
  std::vector<ActorState> background_actors;  ///< states at t = 0, constant velocity
  double t_pre{4.0};
  double horizon{20.0};
  double ttc_init{4.0};
  double ttc_tolerance{0.5};
  int runs{100};
  std::uint64_t seed{0};
  int max_attempts{16};
  double collision_check_dt{0.01};
  VehicleParams vehicle;
  LqrConfig controller;

  bool operator==(const ScenarioSpec&) const = default;
};

/// Throws ScenarioError on violated invariants.
void validate(const ScenarioSpec& spec);

struct RealizedJitter {
  double longitudinal{0.0};
  double lateral{0.0};
  double rotation{0.0};
  double speed{0.0};

  bool operator==(const RealizedJitter&) const = default;
};

struct ScenarioInstance {
  std::string scenario_name;
  ScenarioType type{ScenarioType::kStationary};
  int run_index{0};
  std::uint64_t derived_seed{0};
  int attempts{1};
  RealizedJitter jitter;
  EgoState ego_init;
  Route ego_route;
  ActorTrack target;
  std::vector<ActorTrack> background;
  double t_pre{4.0};
  double horizon{20.0};
  double ttc_init{4.0};
  double collision_check_dt{0.01};
  double reference_contact_time{0.0};  ///< first contact of the no-action rollout
  double reference_impact_speed{0.0};  ///< v_r
  VehicleParams vehicle;
  LqrConfig controller;

  /// Ego pose on the scripted warm-up approach (t < 0).
  EgoState scripted_ego(double t) const;
  std::vector<ActorState> actors_at(double t) const;

  bool operator==(const ScenarioInstance&) const = default;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);
/// Counter-based seed for (seed, index, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t stream = 0);

enum class SeedStream : std::uint64_t { kJitter = 1, kObservation = 2 };

struct RolloutContact {
  bool collided{false};
  double time{0.0};
  double impact_speed{0.0};
  std::string actor_id;
};

/// Ego under constant initial speed and zero steering, stepped with the
/// vehicle model at `dt`, checked against every actor until `horizon`.
RolloutContact no_action_rollout(const EgoState& ego, const std::vector<ActorTrack>& actors, double horizon,
                                 double dt, const VehicleParams& p);

/// v_r of an instance whose target track is realized. Throws ScenarioError
/// when the no-action rollout never reaches contact.
double reference_impact_speed(const ScenarioInstance& instance);

/// Realizes run `run_index`. Infeasible jitter draws are redrawn with the
/// next sub-seed up to spec.max_attempts; exhaustion throws ScenarioError.
ScenarioInstance instantiate_run(const ScenarioSpec& spec, int run_index);

struct CommandConfig {
  double horizon{20.0};          ///< m of route arc length
  double threshold{15.0 * kPi / 180.0};
};

HighLevelCommand high_level_command(const EgoState& ego, const Route& route, const CommandConfig& cfg = {});

}  // namespace ncap
