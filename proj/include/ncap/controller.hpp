#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <shared_mutex>

#include "ncap/geometry.hpp"
#include "ncap/vehicle_model.hpp"

namespace ncap {

/// Tracking error of the ego relative to the reference pose.
struct TrackingError {
  double lateral{0.0};       ///< m, left of the reference positive
  double heading{0.0};       ///< rad in (-pi, pi]
  double longitudinal{0.0};  ///< m, ahead of the reference positive
  double speed{0.0};         ///< m/s
};

/// Error-state LQR settings. State order: lateral, heading, longitudinal,
/// speed. Control order: steering, acceleration.
struct LqrConfig {
  Eigen::Vector4d state_weights{1.0, 10.0, 1.0, 1.0};
  Eigen::Vector2d control_weights{10.0, 1.0};
  double preview_time{0.1};
  double discretization_dt{0.1};
  int riccati_max_iterations{10000};
  double riccati_tolerance{1e-10};
  double speed_bucket{1.0};  ///< linearization speed granularity, m/s
  double min_linearization_speed{1.0};

  bool operator==(const LqrConfig&) const = default;
};

void validate(const LqrConfig& cfg);

using GainMatrix = Eigen::Matrix<double, 2, 4>;

/// Solves the discrete algebraic Riccati equation by fixed-point iteration
/// starting from P = Q and returns K = (R + B'PB)^-1 B'PA. Throws
/// ControllerConfigError if the iteration does not converge.
Eigen::MatrixXd solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                           const Eigen::MatrixXd& R, int max_iterations = 10000, double tolerance = 1e-10);

/// Zero-order-hold discretization of the error dynamics linearized about
/// `speed` for a straight reference.
void linearized_error_model(double speed, double dt, const VehicleParams& p, Eigen::Matrix4d& A,
                            Eigen::Matrix<double, 4, 2>& B);

GainMatrix solve_tracking_gain(double linearization_speed, const LqrConfig& cfg, const VehicleParams& p);

/// Thread-safe gain cache keyed by speed bucket. Entries are computed once
/// and never mutated afterwards.
class GainCache {
 public:
  GainMatrix get(long bucket, const LqrConfig& cfg, const VehicleParams& p);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<long, GainMatrix> gains_;
};

TrackingError tracking_error(const EgoState& ego, const TrajectorySample& ref, double preview_time);

struct ControlCommand {
  ControlInput input;
  bool fallback{false};  ///< empty plan, hold-brake command issued
};

class LqrController {
 public:
  LqrController(LqrConfig cfg, VehicleParams params, std::shared_ptr<GainCache> cache = nullptr);

  ControlCommand compute(const EgoState& ego, const PlannedTrajectory& plan) const;

  /// Reference the controller tracks at `ego.time`.
  TrajectorySample reference(const EgoState& ego, const PlannedTrajectory& plan) const;

  long speed_bucket(double reference_speed) const;
  const LqrConfig& config() const { return cfg_; }
  const VehicleParams& params() const { return params_; }

 private:
  LqrConfig cfg_;
  VehicleParams params_;
  std::shared_ptr<GainCache> cache_;
};

/// Uncached convenience wrapper around LqrController.
ControlInput compute_control(const EgoState& ego, const PlannedTrajectory& plan, const LqrConfig& cfg,
                             const VehicleParams& p);

}  // namespace ncap
