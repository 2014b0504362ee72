#include "ncap/vehicle_model.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "ncap/errors.hpp"

namespace ncap {

void validate(const VehicleParams& p) {
  if (!(p.wheelbase > 0.0) || !(p.max_steering > 0.0) || !(p.max_speed > 0.0) ||
      !(p.length > 0.0) || !(p.width > 0.0) || !(p.integration_substep > 0.0)) {
    throw std::invalid_argument("vehicle parameters must be strictly positive");
  }
  if (!(p.min_acceleration < 0.0) || !(p.max_acceleration > 0.0)) {
    throw std::invalid_argument("acceleration limits must bracket zero");
  }
}

OrientedBox ego_footprint(const EgoState& s, const VehicleParams& p) {
  return OrientedBox{s.pose, p.length, p.width};
}

ControlInput clamp_control(const ControlInput& u, const VehicleParams& p) {
  return {std::clamp(u.steering, -p.max_steering, p.max_steering),
          std::clamp(u.acceleration, p.min_acceleration, p.max_acceleration)};
}

namespace {

using State = std::array<double, 4>;  // x, y, heading, speed

State derivative(const State& s, double tan_steer, double accel, const VehicleParams& p) {
  const double v = std::clamp(s[3], 0.0, p.max_speed);
  double dv = accel;
  if ((s[3] <= 0.0 && accel < 0.0) || (s[3] >= p.max_speed && accel > 0.0)) {
    dv = 0.0;
  }
  return {v * std::cos(s[2]), v * std::sin(s[2]), v * tan_steer / p.wheelbase, dv};
}

State axpy(const State& s, double h, const State& k) {
  return {s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2], s[3] + h * k[3]};
}

}  // namespace

EgoState step(const EgoState& s, const ControlInput& u, double dt, const VehicleParams& p) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("step duration must be positive");
  }
  const int substeps = std::max(1, static_cast<int>(std::ceil(dt / p.integration_substep - 1e-9)));
  const double h = dt / substeps;
  const double tan_steer = std::tan(u.steering);

  State x{s.pose.x, s.pose.y, s.pose.heading, s.speed};
  for (int i = 0; i < substeps; ++i) {
    const State k1 = derivative(x, tan_steer, u.acceleration, p);
    const State k2 = derivative(axpy(x, 0.5 * h, k1), tan_steer, u.acceleration, p);
    const State k3 = derivative(axpy(x, 0.5 * h, k2), tan_steer, u.acceleration, p);
    const State k4 = derivative(axpy(x, h, k3), tan_steer, u.acceleration, p);
    for (int j = 0; j < 4; ++j) {
      x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    x[2] = normalize_angle(x[2]);
    x[3] = std::clamp(x[3], 0.0, p.max_speed);
  }
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw IntegrationError("vehicle state became non-finite; check planner and controller outputs");
    }
  }
  EgoState out;
  out.pose = Pose2{x[0], x[1], x[2]};
  out.speed = x[3];
  out.time = s.time + dt;
  return out;
}

}  // namespace ncap
