#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace ncap {

constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double angle);

struct Vec2 {
  double x{0.0};
  double y{0.0};

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator-() const { return {-x, -y}; }
  bool operator==(const Vec2&) const = default;

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

/// Planar pose in the global frame. Heading is kept in (-pi, pi].
struct Pose2 {
  double x{0.0};
  double y{0.0};
  double heading{0.0};

  Pose2() = default;
  Pose2(double x_, double y_, double heading_) : x(x_), y(y_), heading(normalize_angle(heading_)) {}

  Vec2 position() const { return {x, y}; }
  Vec2 forward() const { return {std::cos(heading), std::sin(heading)}; }
  Vec2 left() const { return {-std::sin(heading), std::cos(heading)}; }
  bool operator==(const Pose2&) const = default;
};

/// Ego vehicle state: pose, forward speed and time since scenario start.
struct EgoState {
  Pose2 pose;
  double speed{0.0};
  double time{0.0};

  Vec2 velocity() const { return pose.forward() * speed; }
  bool operator==(const EgoState&) const = default;
};

/// Rectangle footprint. Length runs along the center heading.
struct OrientedBox {
  Pose2 center;
  double length{1.0};
  double width{1.0};

  /// Corners in counter-clockwise order starting at front-left.
  std::array<Vec2, 4> corners() const;
  bool contains(const Vec2& p) const;
  bool operator==(const OrientedBox&) const = default;
};

enum class ActorClass { kCar, kTruck, kBus, kMotorcycle, kBicycle, kOther };

std::string to_string(ActorClass c);
ActorClass actor_class_from_string(const std::string& s);

struct ActorState {
  std::string actor_id;
  ActorClass class_label{ActorClass::kCar};
  OrientedBox box;
  Vec2 velocity;

  bool operator==(const ActorState&) const = default;
};

struct Waypoint {
  double time_offset{0.0};
  Pose2 pose;
  std::optional<double> speed;

  bool operator==(const Waypoint&) const = default;
};

/// Planner output. Waypoint times are offsets from `issued_at`; the plan
/// implicitly starts at `origin` with `origin_speed` at offset 0.
struct PlannedTrajectory {
  double issued_at{0.0};
  Pose2 origin;
  double origin_speed{0.0};
  std::vector<Waypoint> waypoints;

  double horizon() const { return waypoints.empty() ? 0.0 : waypoints.back().time_offset; }
  bool operator==(const PlannedTrajectory&) const = default;
};

/// Checks the trajectory invariants; throws std::invalid_argument.
void validate_trajectory(const PlannedTrajectory& traj, double max_horizon = 3.0);

/// Reference state sampled from a trajectory.
struct TrajectorySample {
  Pose2 pose;
  double speed{0.0};
  double curvature{0.0};     ///< 1/m, left positive
  double acceleration{0.0};  ///< m/s^2
};

/// Samples the trajectory at `t` seconds after issue. Piecewise linear in
/// position and speed, shortest arc in heading. Throws std::out_of_range
/// outside [0, horizon].
TrajectorySample interpolate_pose(const PlannedTrajectory& traj, double t);

/// Largest absolute turn between consecutive segment directions of the
/// plan polyline (origin included), ignoring segments shorter than `min_len`.
double max_heading_discontinuity(const PlannedTrajectory& traj, double min_len = 1e-6);

Vec2 to_ego_frame(const Vec2& point, const Pose2& ego);
Vec2 from_ego_frame(const Vec2& point, const Pose2& ego);
Pose2 to_ego_frame(const Pose2& pose, const Pose2& ego);
Pose2 from_ego_frame(const Pose2& pose, const Pose2& ego);

/// Closed-rectangle overlap via the separating-axis test.
bool boxes_intersect(const OrientedBox& a, const OrientedBox& b);

/// Largest projected gap over the four SAT axes. Positive when separated,
/// negative (minus the smallest penetration) when overlapping.
double signed_separation(const OrientedBox& a, const OrientedBox& b);

/// Representative contact point of two overlapping boxes.
Vec2 contact_point(const OrientedBox& a, const OrientedBox& b);

/// Magnitude of the relative velocity.
double impact_speed(const Vec2& ego_velocity, const Vec2& actor_velocity);

}  // namespace ncap
