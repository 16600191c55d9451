#pragma once

// Closed-loop policy runner. One tick:
//   read motors -> tendon lengths -> EKF -> history (raw q estimate) ->
//   actor mean on build_actor_observation(..., obs_scale) -> integrate the
//   action into qbar -> motor targets -> write.

#include <atomic>
#include <chrono>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tdk/estimator.hpp"
#include "tdk/handmodel.hpp"
#include "tdk/policy.hpp"
#include "tdk/tendon.hpp"
#include "tdk/types.hpp"

namespace tdk {

struct MotorState {
  Vec theta;      // rad
  Vec theta_dot;  // rad/s
  double timestamp = 0.0;  // s, monotone
};

class DriverInterface {
 public:
  virtual ~DriverInterface() = default;
  /// nullopt when the driver did not answer in time.
  virtual std::optional<MotorState> read_motor_state() = 0;
  /// true when the targets were acknowledged.
  virtual bool write_motor_targets(const Vec& theta_des) = 0;
};

struct ControlLoopConfig {
  double rate_hz = 20.0;
  double obs_scale = 0.5;
  double v_max = 5.0;  // rad/s, action integration
  std::string policy_path;
  std::optional<Vec> calibration_pose;  // defaults to all zeros
  double watchdog_timeout = 0.1;        // s, per driver read for remote drivers
  int max_missed_ticks = 3;
  std::size_t max_ticks = 0;            // 0 runs until stopped
  bool realtime = true;                 // pace ticks with the wall clock
  JointEstimator::Options estimator;

  void validate() const;
};

struct TelemetryRecord {
  std::size_t tick = 0;
  double t_wall = 0.0;  // s since loop start
  Vec theta;
  Vec l;
  Vec qhat;
  Vec action;
  Vec qbar;
  Vec theta_des;
  int fault = 0;  // 0 ok, 1 missed read, 2 safe stop
  // Stage completion times, s since loop start.
  double t_read = 0.0;
  double t_estimate = 0.0;
  double t_act = 0.0;
  double t_write = 0.0;
};

enum : int { kFaultNone = 0, kFaultMissedRead = 1, kFaultSafeStop = 2 };

/// Mutable per-session state owned by the control thread.
struct ControlState {
  ControlState(const HandModel& model, Calibration cal, const ControlLoopConfig& config);

  JointEstimator estimator;
  Vec qbar;
  Mat history;  // raw joint estimates, oldest column first
  Vec a_prev;
  Vec theta_des;
  int missed = 0;
  bool safe_stop = false;
  std::size_t tick = 0;
  std::optional<MotorState> last_state;
};

/// Runs one tick. A failed read holds the last command and bumps the missed
/// counter; beyond max_missed_ticks the state enters safe stop.
TelemetryRecord control_step(DriverInterface& driver, const HandModel& model, const GaussianPolicy& policy,
                             const ControlLoopConfig& config, ControlState& state,
                             std::chrono::steady_clock::time_point t0);

/// Actor input the runtime feeds the policy for the current state.
Vec runtime_actor_observation(const HandModel& model, const ControlLoopConfig& config, const ControlState& state);

struct SessionLog {
  Calibration calibration;
  std::vector<TelemetryRecord> records;
  bool faulted = false;
  std::string fault_reason;
};

/// Calibrates at the configured pose, then ticks at rate_hz until max_ticks,
/// `stop` or safe stop. Records stream to `telemetry` when given.
/// Throws Error when boot (first read / calibration) fails.
SessionLog run_control_loop(const ControlLoopConfig& config, const HandModel& model, const GaussianPolicy& policy,
                            DriverInterface& driver, std::ostream* telemetry = nullptr,
                            const std::atomic<bool>* stop = nullptr);

/// tick,t_wall,theta*,l*,qhat*,a*,qbar*,theta_des*,fault followed by the
/// stage timestamps t_read,t_estimate,t_act,t_write.
std::vector<std::string> telemetry_header(std::size_t motors, std::size_t actuated);
std::vector<double> telemetry_row(const TelemetryRecord& r);

ControlLoopConfig parse_control_config(std::string_view json_text);

/// {"theta_cal": [...], "q_cal": [...], "l_cal": [...]}
std::string serialize_calibration(const Calibration& cal);
/// Checks the vector sizes against `model`; throws ConfigError.
Calibration parse_calibration(std::string_view json_text, const HandModel& model);

}  // namespace tdk
