#pragma once

#include <vector>

#include "ncap/controller.hpp"
#include "ncap/vehicle_model.hpp"

namespace ncap::fixtures {

// Straight reference along +x from the origin at constant speed.
inline PlannedTrajectory straight_reference(double speed, double horizon) {
  PlannedTrajectory plan;
  plan.origin = Pose2{0, 0, 0};
  plan.origin_speed = speed;
  for (int k = 1; k * 0.5 <= horizon + 1e-9; ++k) {
    plan.waypoints.push_back({0.5 * k, Pose2{speed * 0.5 * k, 0.0, 0}, speed});
  }
  return plan;
}

// Closed-loop ego states of a run starting `offset` m left of
// a straight reference, sampled every physics step.
inline std::vector<EgoState> track_straight(double offset, double speed, double duration, const LqrConfig& cfg = {},
                                            const VehicleParams& p = {}, double dt = 0.01) {
  const PlannedTrajectory plan = straight_reference(speed, duration + 1.0);
  LqrController ctrl(cfg, p, std::make_shared<GainCache>());
  EgoState s;
  s.pose = Pose2{0.0, offset, 0.0};
  s.speed = speed;
  std::vector<EgoState> out{s};
  const int n = static_cast<int>(std::llround(duration / dt));
  for (int k = 0; k < n; ++k) {
    const ControlInput u = ctrl.compute(s, plan).input;
    s = step(s, u, dt, p);
    s.time = (k + 1) * dt;
    out.push_back(s);
  }
  return out;
}

}  // namespace ncap::fixtures
