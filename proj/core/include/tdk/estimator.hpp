#pragma once

// Extended Kalman filter over x = [q; qdot] with tendon observations
// z = [l; ldot].
//
//   predict: x <- F x,  P <- F P F^T + Q,   F = [[I, I dt], [0, I]]
//   update:  h(x) = [f(q); J_m(q) qdot]
//            H    = [[J_m(q), 0], [d(J_m qdot)/dq, J_m(q)]]
//
// The lower-left block of H is zero unless exact_curvature is set. The
// covariance correction uses the Joseph form.

#include "tdk/handmodel.hpp"
#include "tdk/tendon.hpp"
#include "tdk/types.hpp"

namespace tdk {

struct EkfNoise {
  double q_var = 1e-8;     // process, joint position block (rad^2)
  double qdot_var = 1e-4;  // process, joint velocity block (rad^2/s^2)
  double l_var = 1e-8;     // measurement, tendon length block (m^2)
  double ldot_var = 1e-6;  // measurement, tendon velocity block (m^2/s^2)
};

struct EkfState {
  Vec x;  // [q; qdot]
  Mat P;
  Mat Q;
  Mat R;
  double dt = 0.05;
  bool exact_curvature = false;

  Eigen::Index dof() const { return x.size() / 2; }
  Vec q() const { return x.head(dof()); }
  Vec qdot() const { return x.tail(dof()); }
};

class EstimatorError : public Error {
 public:
  using Error::Error;
};

/// x = [q0; 0], P = p0 I. `motors` sizes the measurement noise R.
EkfState ekf_init(const Vec& q0, std::size_t motors, double p0, const EkfNoise& noise, double dt,
                  bool exact_curvature = false);

EkfState ekf_predict(const EkfState& s);

/// Throws DimensionError when z lacks ldot or has the wrong size, and
/// EstimatorError when the innovation covariance is not positive definite.
EkfState ekf_update(const EkfState& s, const TendonLengths& z, const HandModel& model);

/// Predicted observation h(x).
Vec ekf_observation(const EkfState& s, const HandModel& model);

/// Convenience wrapper used by the runtime and the `estimate` command:
/// motor angles in, joint estimate out.
class JointEstimator {
 public:
  struct Options {
    double p0 = 0.01;
    EkfNoise noise;
    double dt = 0.05;
    bool exact_curvature = false;
    double rate_smoothing = 0.5;  // for ldot when motor velocities are absent
  };

  JointEstimator(const HandModel& model, Calibration cal, const Options& options);
  JointEstimator(const HandModel& model, Calibration cal) : JointEstimator(model, std::move(cal), Options{}) {}

  /// One predict + update. Returns the tendon lengths that were fed in.
  TendonLengths step(const Vec& theta, const std::optional<Vec>& theta_dot = std::nullopt);

  const EkfState& state() const { return state_; }
  Vec q() const { return state_.q(); }
  const Calibration& calibration() const { return cal_; }

 private:
  const HandModel* model_;
  Calibration cal_;
  EkfState state_;
  TendonRateEstimator rates_;
};

}  // namespace tdk
