#include "ncap/controller.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>

#include "ncap/errors.hpp"

namespace ncap {

void validate(const LqrConfig& cfg) {
  if ((cfg.state_weights.array() < 0.0).any() || !cfg.state_weights.allFinite()) {
    throw ControllerConfigError("LQR state weights must be non-negative");
  }
  if (!(cfg.control_weights.array() > 0.0).all() || !cfg.control_weights.allFinite()) {
    throw ControllerConfigError("LQR control weights must be strictly positive");
  }
  if (!(cfg.discretization_dt > 0.0) || !(cfg.preview_time >= 0.0) || cfg.riccati_max_iterations < 1 ||
      !(cfg.riccati_tolerance > 0.0) || !(cfg.speed_bucket > 0.0) || !(cfg.min_linearization_speed > 0.0)) {
    throw ControllerConfigError("invalid LQR timing or iteration settings");
  }
}

Eigen::MatrixXd solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                           const Eigen::MatrixXd& R, int max_iterations, double tolerance) {
  const auto n = A.rows();
  const auto m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m || R.cols() != m) {
    throw ControllerConfigError("DARE matrix dimensions are inconsistent");
  }
  Eigen::MatrixXd P = Q;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::MatrixXd BtP = B.transpose() * P;
    const Eigen::MatrixXd S = R + BtP * B;
    const Eigen::MatrixXd gain = S.ldlt().solve(BtP * A);
    const Eigen::MatrixXd next = A.transpose() * P * A - A.transpose() * P * B * gain + Q;
    if (!next.allFinite()) {
      break;
    }
    const double delta = (next - P).cwiseAbs().rowwise().sum().maxCoeff();
    P = 0.5 * (next + next.transpose());
    if (delta < tolerance) {
      const Eigen::MatrixXd BtPf = B.transpose() * P;
      return (R + BtPf * B).ldlt().solve(BtPf * A);
    }
  }
  throw ControllerConfigError("Riccati iteration did not converge within " + std::to_string(max_iterations) +
                              " iterations");
}

void linearized_error_model(double speed, double dt, const VehicleParams& p, Eigen::Matrix4d& A,
                            Eigen::Matrix<double, 4, 2>& B) {
  // Continuous error dynamics: lat' = v*head, head' = v/L*steer,
  // lon' = speed_err, speed' = accel. The state matrix is nilpotent, so
  // the ZOH discretization below is exact.
  A.setIdentity();
  A(0, 1) = speed * dt;
  A(2, 3) = dt;
  B.setZero();
  B(0, 0) = speed * speed * dt * dt / (2.0 * p.wheelbase);
  B(1, 0) = speed * dt / p.wheelbase;
  B(2, 1) = 0.5 * dt * dt;
  B(3, 1) = dt;
}

GainMatrix solve_tracking_gain(double linearization_speed, const LqrConfig& cfg, const VehicleParams& p) {
  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 2> B;
  linearized_error_model(linearization_speed, cfg.discretization_dt, p, A, B);
  const Eigen::Matrix4d Q = cfg.state_weights.asDiagonal();
  const Eigen::Matrix2d R = cfg.control_weights.asDiagonal();
  const Eigen::MatrixXd K = solve_dare(A, B, Q, R, cfg.riccati_max_iterations, cfg.riccati_tolerance);
  return K;
}

GainMatrix GainCache::get(long bucket, const LqrConfig& cfg, const VehicleParams& p) {
  {
    std::shared_lock lock(mutex_);
    auto it = gains_.find(bucket);
    if (it != gains_.end()) {
      return it->second;
    }
  }
  const GainMatrix fresh = solve_tracking_gain(static_cast<double>(bucket) * cfg.speed_bucket, cfg, p);
  std::unique_lock lock(mutex_);
  return gains_.try_emplace(bucket, fresh).first->second;
}

std::size_t GainCache::size() const {
  std::shared_lock lock(mutex_);
  return gains_.size();
}

TrackingError tracking_error(const EgoState& ego, const TrajectorySample& ref, double preview_time) {
  const Vec2 local = to_ego_frame(ego.pose.position(), ref.pose);
  TrackingError e;
  e.lateral = local.y;
  e.heading = normalize_angle(ego.pose.heading - ref.pose.heading);
  // The reference is sampled preview_time ahead, so an ego exactly on
  // schedule sits speed*preview behind it.
  e.longitudinal = local.x + ref.speed * preview_time;
  e.speed = ego.speed - ref.speed;
  return e;
}

LqrController::LqrController(LqrConfig cfg, VehicleParams params, std::shared_ptr<GainCache> cache)
    : cfg_(std::move(cfg)), params_(params), cache_(std::move(cache)) {
  validate(cfg_);
  validate(params_);
}

long LqrController::speed_bucket(double reference_speed) const {
  const double v = std::max(std::abs(reference_speed), cfg_.min_linearization_speed);
  return std::max(1L, std::lround(v / cfg_.speed_bucket));
}

TrajectorySample LqrController::reference(const EgoState& ego, const PlannedTrajectory& plan) const {
  const double t = std::max(0.0, ego.time - plan.issued_at + cfg_.preview_time);
  if (t > plan.horizon()) {
    // Plan exhausted: hold the final pose at standstill.
    TrajectorySample hold;
    hold.pose = plan.waypoints.back().pose;
    return hold;
  }
  return interpolate_pose(plan, t);
}

ControlCommand LqrController::compute(const EgoState& ego, const PlannedTrajectory& plan) const {
  if (plan.waypoints.empty()) {
    return {ControlInput{0.0, params_.min_acceleration}, true};
  }
  const TrajectorySample ref = reference(ego, plan);
  const TrackingError e = tracking_error(ego, ref, cfg_.preview_time);

  const long bucket = speed_bucket(ref.speed);
  const GainMatrix K = cache_ ? cache_->get(bucket, cfg_, params_)
                              : solve_tracking_gain(static_cast<double>(bucket) * cfg_.speed_bucket, cfg_, params_);
  const Eigen::Vector4d x{e.lateral, e.heading, e.longitudinal, e.speed};
  const Eigen::Vector2d u = -(K * x);

  ControlInput cmd;
  cmd.steering = u(0) + std::atan(params_.wheelbase * ref.curvature);
  cmd.acceleration = u(1) + ref.acceleration;
  return {clamp_control(cmd, params_), false};
}

ControlInput compute_control(const EgoState& ego, const PlannedTrajectory& plan, const LqrConfig& cfg,
                             const VehicleParams& p) {
  return LqrController(cfg, p).compute(ego, plan).input;
}

}  // namespace ncap
