#pragma once

#include "ncap/geometry.hpp"

namespace ncap {

struct ControlInput {
  double steering{0.0};      ///< front wheel angle, rad, left positive
  double acceleration{0.0};  ///< m/s^2

  bool operator==(const ControlInput&) const = default;
};

/// Kinematic bicycle parameters. Defaults follow a Renault Zoe class
/// vehicle; the ego pose refers to the footprint center.
struct VehicleParams {
  double wheelbase{2.588};
  double max_steering{0.78};
  double min_acceleration{-7.0};
  double max_acceleration{3.0};
  double max_speed{40.0};
  double length{4.084};
  double width{1.730};
  double integration_substep{0.01};

  bool operator==(const VehicleParams&) const = default;
};

/// Throws std::invalid_argument when a parameter is out of range.
void validate(const VehicleParams& p);

OrientedBox ego_footprint(const EgoState& s, const VehicleParams& p);

/// Component-wise saturation to the configured limits.
ControlInput clamp_control(const ControlInput& u, const VehicleParams& p);

/// Advances `s` by `dt` under constant control `u` using fixed-step RK4
/// substeps no longer than `p.integration_substep`. Speed is held inside
/// [0, max_speed]. Throws IntegrationError on a non-finite result.
EgoState step(const EgoState& s, const ControlInput& u, double dt, const VehicleParams& p);

}  // namespace ncap
