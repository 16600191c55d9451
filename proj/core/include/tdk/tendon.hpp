#pragma once

// Joint <-> tendon <-> motor conversions.
//
// Each tendon route is a sum of per-joint terms on top of its rest length:
//   LINEAR  (moment arm m):       sign * m * q_j
//   ROLLING (effective radius p): sign * 2 p sin(q_j / 2)
// The measured length of a motor is the length of its primary attachment.

#include <optional>
#include <vector>

#include "tdk/handmodel.hpp"
#include "tdk/stats.hpp"
#include "tdk/types.hpp"

namespace tdk {

struct TendonLengths {
  Vec l;                    // m, one per motor
  std::optional<Vec> ldot;  // m/s
};

/// d l / d q_act, motors x actuated coordinates (m/rad).
using MuscleJacobian = Mat;

struct Calibration {
  Vec theta_cal;  // motor angles at the reference pose (rad)
  Vec q_cal;      // reference pose (rad)
  Vec l_cal;      // f(q_cal) (m)
};

/// Length of every tendon route (one entry per route, not per motor).
Vec route_lengths(const HandModel& model, const Vec& q_act);

TendonLengths tendon_lengths(const HandModel& model, const Vec& q_act);
MuscleJacobian muscle_jacobian(const HandModel& model, const Vec& q_act);

/// d(J_m(q) qdot)/dq. Every route term depends on a single coordinate, so
/// this is J_m's per-entry second derivative scaled column-wise by qdot.
Mat muscle_jacobian_rate(const HandModel& model, const Vec& q_act, const Vec& qdot_act);

Calibration calibrate(const HandModel& model, const Vec& theta_observed, const Vec& q_known);

/// theta_k = theta_cal,k + winding_k * (f_k(q_des) - l_cal,k) / spool_k
Vec joints_to_motor_angles(const HandModel& model, const Calibration& cal, const Vec& q_des);

/// l_k = l_cal,k + winding_k * spool_k * (theta_k - theta_cal,k); ldot from
/// motor velocities by the same linear map when they are given.
TendonLengths motor_angles_to_tendon_lengths(const HandModel& model, const Calibration& cal,
                                             const Vec& theta,
                                             const std::optional<Vec>& theta_dot = std::nullopt);

/// Tendon velocity from successive length samples when motor velocities are
/// not available: exponentially smoothed finite differences. The first sample
/// yields zero velocity.
class TendonRateEstimator {
 public:
  explicit TendonRateEstimator(double alpha = 0.5) : smoother_(alpha) {}
  Vec update(const Vec& l, double dt);
  void reset();

 private:
  ExponentialSmoother smoother_;
  std::optional<Vec> previous_;
};

struct AntagonisticReport {
  double max_deviation = 0.0;  // m
  std::vector<std::pair<std::size_t, double>> per_motor;  // (motor index, max deviation)
  bool within_tolerance = true;
};

/// For every two-attachment motor, sweeps each joint its routes cross over
/// the joint range (others held at zero) and compares the secondary tendon's
/// length change predicted through the shared spool with the route model.
AntagonisticReport antagonistic_consistency_check(const HandModel& model, int samples_per_joint = 101);

}  // namespace tdk
