#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "tdk/handmodel.hpp"
#include "tdk/rotation.hpp"
#include "tdk/types.hpp"

namespace tdk {

/// Malformed or inconsistent configuration document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct Range {
  double lo = 1.0;
  double hi = 1.0;
};

/// Sampling ranges for per-episode physics randomization. Everything except
/// the observation noise is a multiplier on the nominal value; the noise is a
/// standard deviation in normalized joint units.
struct DomainRanges {
  Range observation_noise{0.01, 0.01};
  Range joint_stiffness{0.8, 1.2};
  Range joint_damping{0.8, 1.2};
  Range tendon_stiffness{0.8, 1.2};
  Range tendon_damping{0.8, 1.2};
  Range joint_range{0.9, 1.1};
  Range hand_mass{0.75, 1.25};
  Range object_mass{0.75, 1.25};
  Range friction{0.75, 1.25};
  Range object_scale{0.9, 1.1};

  /// All multipliers fixed at 1, no observation noise.
  static DomainRanges nominal();
};

struct DomainParams {
  double observation_noise = 0.0;
  double joint_stiffness = 1.0;
  double joint_damping = 1.0;
  double tendon_stiffness = 1.0;
  double tendon_damping = 1.0;
  double joint_range = 1.0;
  double hand_mass = 1.0;
  double object_mass = 1.0;
  double friction = 1.0;
  double object_scale = 1.0;
};

struct RewardWeights {
  double rotation = 0.01;
  double torque = -0.02;
  double action = -0.002;
  double drop = -1.0;
};

struct BallConfig {
  double radius = 0.035;            // m
  double contact_margin = 0.005;    // m, beyond the radius
  double contact_stiffness = 200.0; // N/m, fingertip force penalty spring
  double center_lag = 0.05;         // s, scaled by the object mass multiplier
  double gravity = 9.81;            // m/s^2
  int free_fall_substeps = 5;       // consecutive substeps with < 2 contacts
  double friction = 0.8;            // nominal coefficient, scaled by DR, capped at 1
  double fit_regularization = 1e-9; // m^2, ridge term of the rotation fit
};

enum class Task { BallRotation, JointTracking };

std::string_view to_string(Task t);
Task parse_task(std::string_view s);

struct EnvConfig {
  Task task = Task::BallRotation;
  double sim_rate_hz = 60.0;
  int substeps = 3;
  double v_max = 5.0;           // rad/s
  double drop_distance = 0.24;  // m
  Axis axis = Axis::Y;
  Direction direction = Direction::Neg;
  double obs_scale = 1.0;
  RewardWeights weights;
  bool randomize = true;
  DomainRanges ranges;
  int episode_length = 200;  // policy steps
  double kp = 400.0;         // 1/s^2
  double kd = 40.0;          // 1/s
  double joint_inertia = 1e-3;  // kg m^2, converts PD accelerations to torques
  int history_depth = 5;
  BallConfig ball;
  double rest_fraction = 0.35;  // rest pose as a fraction of each joint range
  std::optional<Vec> rest_pose;
  double reset_noise = 0.05;  // rad, uniform half-width
  double tracking_fraction = 0.75;  // joint-tracking target within each range
  std::optional<Vec> tracking_target;

  double sim_dt() const { return 1.0 / sim_rate_hz; }
  double policy_dt() const { return substeps / sim_rate_hz; }
  double direction_sign() const { return tdk::direction_sign(direction); }
  /// Ranges actually sampled from: `ranges`, or nominal when not randomizing.
  DomainRanges effective_ranges() const { return randomize ? ranges : DomainRanges::nominal(); }

  /// Throws Error naming the first offending field.
  void validate(const HandModel& model) const;
};

EnvConfig parse_env_config(std::string_view json_text);
std::string serialize_env_config(const EnvConfig& config);

}  // namespace tdk
