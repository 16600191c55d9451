#pragma once

// Batched in-hand rotation environment over the ball surrogate.
//
// Policy step: a <- clip(a, -1, 1); qbar <- clip(qbar + v_max dt a, q_min, q_max);
// then `substeps` PD substeps q'' = kp (qbar - q) - kd q' (semi-implicit
// Euler). Reward and observations are taken after the last substep.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tdk/ball_surrogate.hpp"
#include "tdk/env_config.hpp"
#include "tdk/handmodel.hpp"
#include "tdk/kinematics.hpp"
#include "tdk/rng.hpp"
#include "tdk/types.hpp"
#include "tdk/vec_env.hpp"

namespace tdk {

inline constexpr std::size_t kHistoryDepth = 5;

constexpr std::size_t actor_obs_dim(std::size_t actuated, std::size_t depth = kHistoryDepth) {
  return actuated * (depth + 2);
}
/// Joint pos, command, velocity, torque; object pos, quat, lin vel, ang vel;
/// fingertip pos, quat, lin vel, ang vel, force; previous action.
constexpr std::size_t critic_obs_dim(std::size_t actuated) {
  return 4 * actuated + (3 + 4 + 3 + 3) + 5 * (3 + 4 + 3 + 3 + 3) + actuated;
}

inline constexpr std::size_t kActorObsDim = actor_obs_dim(11);
inline constexpr std::size_t kCriticObsDim = critic_obs_dim(11);
static_assert(kActorObsDim == 77 && kCriticObsDim == 148);

struct RewardBreakdown {
  double rotation = 0.0;  // rotation term of the target axis
  double torque = 0.0;    // |tau|
  double action = 0.0;    // |a|
  double drop = 0.0;      // 1 when the object is too far from the hand
  double tracking = 0.0;  // |q - q*|, joint-tracking task only
  double total = 0.0;
};

/// Ball-rotation reward; total = sum of weight * term.
RewardBreakdown compute_reward(double omega_axis, const Vec& tau, const Vec& action, const Vec3& x_obj,
                               const Vec3& x_hand, const RewardWeights& weights, double s,
                               double drop_distance);

/// qbar + v_max dt clip(a), clipped to [q_min, q_max].
Vec apply_action(const Vec& qbar, const Vec& action, const Vec& q_min, const Vec& q_max, double v_max,
                 double dt);

/// 2 (q - q_min) / (q_max - q_min) - 1, clamped to [-1, 1].
Vec normalize_joints(const Vec& q, const Vec& q_min, const Vec& q_max);

/// [normalized qbar; normalized (scale * history) oldest to newest; a_prev].
/// `history` holds one measurement per column. Shared by the environment and
/// the hardware runtime so both feed the actor identical inputs.
Vec build_actor_observation(const Vec& qbar, const Mat& history, const Vec& a_prev, const Vec& q_min,
                            const Vec& q_max, double obs_scale);

/// rotation_vector(now * prev^-1) / dt, world frame, shortest arc.
Vec3 numerical_angular_velocity(const Quat& prev, const Quat& now, double dt);

/// Draws every parameter uniformly from its range. Throws on lo > hi.
DomainParams domain_randomize(CounterRng& rng, const DomainRanges& ranges);

struct EnvState {
  std::size_t env_id = 0;
  std::uint64_t seed = 0;
  std::uint64_t episode = 0;
  int step = 0;
  CounterRng rng;
  DomainParams params;
  BallParams ball_params{};

  Vec q;
  Vec qdot;
  Vec qbar;
  Vec tau;
  Vec a_prev;
  Mat history;  // actuated x depth, oldest column first
  Vec q_lo;     // physical limits after range randomization
  Vec q_hi;

  BallState ball;
  ContactState contacts;
  TipPoints tips{};
  Quat ball_orientation_prev = Quat::Identity();  // at the previous policy step
  Vec3 omega = Vec3::Zero();                       // numerically differentiated
  Vec3 x_hand = Vec3::Zero();
};

struct Observation {
  Vec actor;
  Vec critic;
};

struct StepResult {
  RewardBreakdown reward;
  bool done = false;
  bool dropped = false;
  bool timeout = false;
  bool fault = false;
  // Snapshot of the transition's end state, taken before any auto-reset.
  Vec q;
  Vec qbar;
  Quat ball_orientation = Quat::Identity();
  Vec3 omega = Vec3::Zero();
  double omega_target = 0.0;
};

class HandEnv {
 public:
  HandEnv(const HandModel& model, EnvConfig config);

  const HandModel& model() const { return *model_; }
  const EnvConfig& config() const { return config_; }
  std::size_t action_dim() const { return model_->num_actuated(); }
  std::size_t actor_dim() const;
  std::size_t critic_dim() const;

  /// Nominal rest pose and hand reference point (palm center).
  const Vec& rest_pose() const { return rest_pose_; }
  const Vec& tracking_target() const { return tracking_target_; }
  Vec3 hand_reference() const { return x_hand_; }

  /// Fresh episode; the result is a pure function of (seed, env_id, episode).
  EnvState reset(std::size_t env_id, std::uint64_t seed, std::uint64_t episode = 0) const;

  /// One policy step. On done (drop, timeout or non-finite state) the state is
  /// reset to the next episode before returning.
  StepResult step(EnvState& state, const Vec& action) const;

  RewardBreakdown reward(const EnvState& state, const Vec& action) const;
  Vec actor_observation(const EnvState& state) const;
  Vec critic_observation(const EnvState& state) const;

 private:
  void substep(EnvState& state) const;
  TipPoints fingertip_points(const Vec& q) const;

  const HandModel* model_;
  EnvConfig config_;
  Vec rest_pose_;
  Vec tracking_target_;
  Vec3 x_hand_;
  TipMask cradle_{};
};

/// Trajectory log columns: step,env,q*,qbar*,ball_q*,omega_*,rot_term,total_reward,done.
std::vector<std::string> trajectory_header(std::size_t actuated);
std::vector<double> trajectory_row(std::size_t step, std::size_t env, const StepResult& r, double s,
                                   Axis axis);

class HandEnvBatch final : public VecEnv {
 public:
  HandEnvBatch(const HandModel& model, EnvConfig config, std::size_t num_envs, std::size_t threads = 0);

  std::size_t num_envs() const override { return states_.size(); }
  std::size_t action_dim() const override { return env_.action_dim(); }
  std::size_t actor_obs_dim() const override { return env_.actor_dim(); }
  std::size_t critic_obs_dim() const override { return env_.critic_dim(); }
  void reset(std::uint64_t seed) override;
  const Mat& actor_obs() const override { return actor_; }
  const Mat& critic_obs() const override { return critic_; }
  void step(const Mat& actions, VecStepResult& out) override;

  const HandEnv& env() const { return env_; }
  const std::vector<EnvState>& states() const { return states_; }
  const std::vector<StepResult>& last_results() const { return results_; }
  void set_threads(std::size_t threads) { threads_ = threads; }

 private:
  HandEnv env_;
  std::size_t threads_;
  std::vector<EnvState> states_;
  std::vector<StepResult> results_;
  Mat actor_;
  Mat critic_;
};

}  // namespace tdk
