#include "ncap/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace ncap {

double normalize_angle(double angle) {
  double r = std::remainder(angle, 2.0 * kPi);
  if (r <= -kPi) {
    r += 2.0 * kPi;
  }
  return r;
}

std::array<Vec2, 4> OrientedBox::corners() const {
  const Vec2 c = center.position();
  const Vec2 f = center.forward() * (0.5 * length);
  const Vec2 l = center.left() * (0.5 * width);
  return {c + f + l, c - f + l, c - f - l, c + f - l};
}

bool OrientedBox::contains(const Vec2& p) const {
  const Vec2 local = to_ego_frame(p, center);
  return std::abs(local.x) <= 0.5 * length && std::abs(local.y) <= 0.5 * width;
}

std::string to_string(ActorClass c) {
  switch (c) {
    case ActorClass::kCar: return "car";
    case ActorClass::kTruck: return "truck";
    case ActorClass::kBus: return "bus";
    case ActorClass::kMotorcycle: return "motorcycle";
    case ActorClass::kBicycle: return "bicycle";
    case ActorClass::kOther: return "other";
  }
  return "other";
}

ActorClass actor_class_from_string(const std::string& s) {
  if (s == "car") return ActorClass::kCar;
  if (s == "truck") return ActorClass::kTruck;
  if (s == "bus") return ActorClass::kBus;
  if (s == "motorcycle") return ActorClass::kMotorcycle;
  if (s == "bicycle") return ActorClass::kBicycle;
  if (s == "other") return ActorClass::kOther;
  throw std::invalid_argument("unknown actor class '" + s + "'");
}

void validate_trajectory(const PlannedTrajectory& traj, double max_horizon) {
  if (traj.waypoints.empty()) {
    throw std::invalid_argument("trajectory has no waypoints");
  }
  double prev = 0.0;
  for (const auto& wp : traj.waypoints) {
    if (!std::isfinite(wp.time_offset) || !std::isfinite(wp.pose.x) || !std::isfinite(wp.pose.y) ||
        !std::isfinite(wp.pose.heading) || (wp.speed && !std::isfinite(*wp.speed))) {
      throw std::invalid_argument("trajectory contains non-finite values");
    }
    if (!(wp.time_offset > prev)) {
      throw std::invalid_argument("waypoint time offsets must be positive and strictly increasing");
    }
    prev = wp.time_offset;
  }
  if (traj.horizon() > max_horizon + 1e-9) {
    throw std::invalid_argument("trajectory horizon exceeds the configured maximum");
  }
}

namespace {

struct Node {
  double t;
  Pose2 pose;
  double speed;
};

std::vector<Node> build_nodes(const PlannedTrajectory& traj) {
  const std::size_t n = traj.waypoints.size() + 1;
  std::vector<Node> nodes;
  nodes.reserve(n);
  nodes.push_back({0.0, traj.origin, traj.origin_speed});
  for (const auto& wp : traj.waypoints) {
    nodes.push_back({wp.time_offset, wp.pose, 0.0});
  }
  // Segment speeds from finite differences, used where a waypoint has no speed.
  std::vector<double> seg(n - 1);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    seg[j] = (nodes[j + 1].pose.position() - nodes[j].pose.position()).norm() /
             (nodes[j + 1].t - nodes[j].t);
  }
  for (std::size_t k = 1; k < n; ++k) {
    const auto& explicit_speed = traj.waypoints[k - 1].speed;
    if (explicit_speed) {
      nodes[k].speed = *explicit_speed;
    } else if (k + 1 < n) {
      nodes[k].speed = 0.5 * (seg[k - 1] + seg[k]);
    } else {
      nodes[k].speed = seg[k - 1];
    }
  }
  return nodes;
}

void segment_rates(const Node& a, const Node& b, TrajectorySample& out) {
  const double len = (b.pose.position() - a.pose.position()).norm();
  out.curvature = len > 1e-9 ? normalize_angle(b.pose.heading - a.pose.heading) / len : 0.0;
  out.acceleration = (b.speed - a.speed) / (b.t - a.t);
}

}  // namespace

TrajectorySample interpolate_pose(const PlannedTrajectory& traj, double t) {
  if (traj.waypoints.empty()) {
    throw std::out_of_range("cannot sample an empty trajectory");
  }
  if (!(t >= 0.0) || t > traj.horizon()) {
    throw std::out_of_range("sample time outside trajectory horizon");
  }
  const auto nodes = build_nodes(traj);
  TrajectorySample out;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (t == nodes[k].t) {
      out.pose = nodes[k].pose;
      out.speed = nodes[k].speed;
      if (k + 1 < nodes.size()) {
        segment_rates(nodes[k], nodes[k + 1], out);
      } else {
        segment_rates(nodes[k - 1], nodes[k], out);
      }
      return out;
    }
    if (t < nodes[k].t) {
      const Node& a = nodes[k - 1];
      const Node& b = nodes[k];
      const double alpha = (t - a.t) / (b.t - a.t);
      const Vec2 p = a.pose.position() + (b.pose.position() - a.pose.position()) * alpha;
      const double dh = normalize_angle(b.pose.heading - a.pose.heading);
      out.pose = Pose2{p.x, p.y, a.pose.heading + alpha * dh};
      out.speed = a.speed + alpha * (b.speed - a.speed);
      segment_rates(a, b, out);
      return out;
    }
  }
  // Unreachable: t <= horizon is the last node time.
  throw std::out_of_range("sample time outside trajectory horizon");
}

double max_heading_discontinuity(const PlannedTrajectory& traj, double min_len) {
  std::vector<Vec2> pts;
  pts.push_back(traj.origin.position());
  for (const auto& wp : traj.waypoints) {
    pts.push_back(wp.pose.position());
  }
  double worst = 0.0;
  std::optional<double> prev_dir;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 d = pts[i + 1] - pts[i];
    if (d.norm() < min_len) {
      continue;
    }
    const double dir = std::atan2(d.y, d.x);
    if (prev_dir) {
      worst = std::max(worst, std::abs(normalize_angle(dir - *prev_dir)));
    }
    prev_dir = dir;
  }
  return worst;
}

Vec2 to_ego_frame(const Vec2& point, const Pose2& ego) {
  const double c = std::cos(ego.heading);
  const double s = std::sin(ego.heading);
  const double dx = point.x - ego.x;
  const double dy = point.y - ego.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

Vec2 from_ego_frame(const Vec2& point, const Pose2& ego) {
  const double c = std::cos(ego.heading);
  const double s = std::sin(ego.heading);
  return {ego.x + c * point.x - s * point.y, ego.y + s * point.x + c * point.y};
}

Pose2 to_ego_frame(const Pose2& pose, const Pose2& ego) {
  const Vec2 p = to_ego_frame(pose.position(), ego);
  return Pose2{p.x, p.y, pose.heading - ego.heading};
}

Pose2 from_ego_frame(const Pose2& pose, const Pose2& ego) {
  const Vec2 p = from_ego_frame(pose.position(), ego);
  return Pose2{p.x, p.y, pose.heading + ego.heading};
}

namespace {

// Half-extent of `box` projected onto the unit axis `n`.
double projected_radius(const OrientedBox& box, const Vec2& n) {
  return 0.5 * box.length * std::abs(box.center.forward().dot(n)) +
         0.5 * box.width * std::abs(box.center.left().dot(n));
}

}  // namespace

double signed_separation(const OrientedBox& a, const OrientedBox& b) {
  const std::array<Vec2, 4> axes = {a.center.forward(), a.center.left(), b.center.forward(),
                                    b.center.left()};
  const Vec2 d = b.center.position() - a.center.position();
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& n : axes) {
    const double gap = std::abs(d.dot(n)) - projected_radius(a, n) - projected_radius(b, n);
    best = std::max(best, gap);
  }
  return best;
}

bool boxes_intersect(const OrientedBox& a, const OrientedBox& b) {
  // Touching boundaries count as overlap.
  return signed_separation(a, b) <= 0.0;
}

Vec2 contact_point(const OrientedBox& a, const OrientedBox& b) {
  Vec2 sum;
  int count = 0;
  for (const auto& c : a.corners()) {
    if (b.contains(c)) {
      sum = sum + c;
      ++count;
    }
  }
  for (const auto& c : b.corners()) {
    if (a.contains(c)) {
      sum = sum + c;
      ++count;
    }
  }
  if (count == 0) {
    return (a.center.position() + b.center.position()) * 0.5;
  }
  return sum * (1.0 / count);
}

double impact_speed(const Vec2& ego_velocity, const Vec2& actor_velocity) {
  return (ego_velocity - actor_velocity).norm();
}

}  // namespace ncap
