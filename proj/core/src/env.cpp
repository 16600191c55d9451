#include "tdk/env.hpp"

#include <algorithm>
#include <cmath>

#include "tdk/csv.hpp"
#include "tdk/parallel.hpp"
#include "tdk/rotation.hpp"

namespace tdk {

RewardBreakdown compute_reward(double omega_axis, const Vec& tau, const Vec& action, const Vec3& x_obj,
                               const Vec3& x_hand, const RewardWeights& weights, double s,
                               double drop_distance) {
  RewardBreakdown r;
  r.rotation = rotation_term(omega_axis, s);
  r.torque = tau.norm();
  r.action = action.norm();
  r.drop = (x_obj - x_hand).norm() > drop_distance ? 1.0 : 0.0;
  r.total = weights.rotation * r.rotation + weights.torque * r.torque + weights.action * r.action +
            weights.drop * r.drop;
  return r;
}

Vec apply_action(const Vec& qbar, const Vec& action, const Vec& q_min, const Vec& q_max, double v_max,
                 double dt) {
  if (action.size() != qbar.size())
    throw DimensionError("apply_action: expected " + std::to_string(qbar.size()) + " actions, got " +
                         std::to_string(action.size()));
  const Vec a = action.cwiseMax(-1.0).cwiseMin(1.0);
  return (qbar + v_max * dt * a).cwiseMax(q_min).cwiseMin(q_max);
}

Vec normalize_joints(const Vec& q, const Vec& q_min, const Vec& q_max) {
  const Vec n = (2.0 * (q - q_min).array() / (q_max - q_min).array() - 1.0).matrix();
  return n.cwiseMax(-1.0).cwiseMin(1.0);
}

Vec build_actor_observation(const Vec& qbar, const Mat& history, const Vec& a_prev, const Vec& q_min,
                            const Vec& q_max, double obs_scale) {
  const Eigen::Index n = qbar.size();
  if (history.rows() != n || a_prev.size() != n || q_min.size() != n || q_max.size() != n)
    throw DimensionError("build_actor_observation: inconsistent joint dimensions");
  Vec obs(n * (history.cols() + 2));
  obs.head(n) = normalize_joints(qbar, q_min, q_max);
  for (Eigen::Index k = 0; k < history.cols(); ++k)
    obs.segment(n * (k + 1), n) = normalize_joints(obs_scale * history.col(k), q_min, q_max);
  obs.tail(n) = a_prev;
  return obs;
}

Vec3 numerical_angular_velocity(const Quat& prev, const Quat& now, double dt) {
  if (!(dt > 0.0)) throw Error("numerical_angular_velocity: dt must be > 0");
  return rotation_vector(now * prev.conjugate()) / dt;
}

DomainParams domain_randomize(CounterRng& rng, const DomainRanges& ranges) {
  auto draw = [&rng](const Range& r, const char* name) {
    if (!(r.lo <= r.hi)) throw Error(std::string("domain_randomize: range '") + name + "' has lo > hi");
    return rng.uniform(r.lo, r.hi);
  };
  DomainParams p;
  p.observation_noise = draw(ranges.observation_noise, "observation_noise");
  p.joint_stiffness = draw(ranges.joint_stiffness, "joint_stiffness");
  p.joint_damping = draw(ranges.joint_damping, "joint_damping");
  p.tendon_stiffness = draw(ranges.tendon_stiffness, "tendon_stiffness");
  p.tendon_damping = draw(ranges.tendon_damping, "tendon_damping");
  p.joint_range = draw(ranges.joint_range, "joint_range");
  p.hand_mass = draw(ranges.hand_mass, "hand_mass");
  p.object_mass = draw(ranges.object_mass, "object_mass");
  p.friction = draw(ranges.friction, "friction");
  p.object_scale = draw(ranges.object_scale, "object_scale");
  return p;
}

HandEnv::HandEnv(const HandModel& model, EnvConfig config) : model_(&model), config_(std::move(config)) {
  config_.validate(model);
  const Vec& lo = model.q_min();
  const Vec& hi = model.q_max();
  rest_pose_ = config_.rest_pose ? *config_.rest_pose : Vec(lo + config_.rest_fraction * (hi - lo));
  tracking_target_ = config_.tracking_target ? *config_.tracking_target
                                             : Vec(lo + config_.tracking_fraction * (hi - lo));
  x_hand_ = Vec3(0.5 * model.description().links.front().length, 0.0, 0.0);
  for (std::size_t i = 0; i < cradle_.size(); ++i) cradle_[i] = model.fingertips()[i].cradle;
}

std::size_t HandEnv::actor_dim() const {
  return tdk::actor_obs_dim(action_dim(), static_cast<std::size_t>(config_.history_depth));
}

std::size_t HandEnv::critic_dim() const { return tdk::critic_obs_dim(action_dim()); }

TipPoints HandEnv::fingertip_points(const Vec& q) const {
  const FingertipPoses poses = forward_kinematics(*model_, q);
  TipPoints tips;
  for (std::size_t i = 0; i < tips.size(); ++i) tips[i] = poses[i].translation;
  return tips;
}

EnvState HandEnv::reset(std::size_t env_id, std::uint64_t seed, std::uint64_t episode) const {
  EnvState s;
  s.env_id = env_id;
  s.seed = seed;
  s.episode = episode;
  s.rng = CounterRng(seed, env_id, episode);
  s.params = domain_randomize(s.rng, config_.effective_ranges());
  s.ball_params = make_ball_params(config_.ball, s.params);

  const Vec& lo = model_->q_min();
  const Vec& hi = model_->q_max();
  const Vec mid = 0.5 * (lo + hi);
  const Vec half = 0.5 * s.params.joint_range * (hi - lo);
  s.q_lo = mid - half;
  s.q_hi = mid + half;

  const Eigen::Index n = lo.size();
  s.q.resize(n);
  for (Eigen::Index j = 0; j < n; ++j)
    s.q[j] = rest_pose_[j] + s.rng.uniform(-config_.reset_noise, config_.reset_noise);
  s.q = s.q.cwiseMax(lo.cwiseMax(s.q_lo)).cwiseMin(hi.cwiseMin(s.q_hi));
  s.qdot = Vec::Zero(n);
  s.qbar = s.q;
  s.tau = Vec::Zero(n);
  s.a_prev = Vec::Zero(n);
  s.history = s.q.replicate(1, config_.history_depth);

  s.tips = fingertip_points(s.q);
  s.ball.radius = s.ball_params.radius;
  s.ball.position = cradle_center(s.tips, cradle_, s.ball.radius);
  update_contacts(s.ball, s.contacts, s.tips, s.ball_params);
  s.ball_orientation_prev = s.ball.orientation;
  s.x_hand = x_hand_;
  return s;
}

void HandEnv::substep(EnvState& s) const {
  const double dt = config_.sim_dt();
  const double kp = config_.kp * s.params.joint_stiffness * s.params.tendon_stiffness;
  const double kd = config_.kd * s.params.joint_damping * s.params.tendon_damping;
  const Vec acc = kp * (s.qbar - s.q) - kd * s.qdot;
  s.tau = config_.joint_inertia * acc;
  s.qdot += dt * acc / s.params.hand_mass;
  s.q += dt * s.qdot;
  for (Eigen::Index j = 0; j < s.q.size(); ++j) {
    if (s.q[j] < s.q_lo[j]) {
      s.q[j] = s.q_lo[j];
      s.qdot[j] = 0.0;
    } else if (s.q[j] > s.q_hi[j]) {
      s.q[j] = s.q_hi[j];
      s.qdot[j] = 0.0;
    }
  }
  if (config_.task != Task::BallRotation) return;

  const TipPoints tips = fingertip_points(s.q);
  TipPoints vel;
  for (std::size_t i = 0; i < tips.size(); ++i) vel[i] = (tips[i] - s.tips[i]) / dt;
  ball_substep(s.ball, s.contacts, tips, vel, s.ball_params, dt);
  s.tips = tips;
}

RewardBreakdown HandEnv::reward(const EnvState& s, const Vec& action) const {
  if (config_.task == Task::JointTracking) {
    RewardBreakdown r;
    r.tracking = (s.q - tracking_target_).norm();
    r.total = -r.tracking;
    return r;
  }
  const auto axis = static_cast<Eigen::Index>(config_.axis);
  return compute_reward(s.omega[axis], s.tau, action, s.ball.position, s.x_hand, config_.weights,
                        config_.direction_sign(), config_.drop_distance);
}

StepResult HandEnv::step(EnvState& s, const Vec& action) const {
  if (action.size() != static_cast<Eigen::Index>(action_dim()))
    throw DimensionError("HandEnv::step: expected " + std::to_string(action_dim()) + " actions");
  const Vec a = action.cwiseMax(-1.0).cwiseMin(1.0);
  s.qbar = apply_action(s.qbar, a, model_->q_min(), model_->q_max(), config_.v_max, config_.policy_dt());
  for (int k = 0; k < config_.substeps; ++k) substep(s);

  s.omega = numerical_angular_velocity(s.ball_orientation_prev, s.ball.orientation, config_.policy_dt());
  s.ball_orientation_prev = s.ball.orientation;

  // Measurement noise is drawn when the reading enters the history, so the
  // actor observation stays a pure function of the state.
  Vec measured = s.q;
  if (s.params.observation_noise > 0.0) {
    const Vec half_range = 0.5 * (model_->q_max() - model_->q_min());
    for (Eigen::Index j = 0; j < measured.size(); ++j)
      measured[j] += s.params.observation_noise * half_range[j] * s.rng.normal();
  }
  const Eigen::Index depth = s.history.cols();
  s.history.leftCols(depth - 1) = s.history.rightCols(depth - 1).eval();
  s.history.col(depth - 1) = measured;
  s.a_prev = a;
  ++s.step;

  StepResult r;
  const bool finite = s.q.allFinite() && s.qdot.allFinite() && s.ball.position.allFinite() &&
                      s.ball.orientation.coeffs().allFinite() && s.omega.allFinite();
  if (finite) {
    r.reward = reward(s, a);
    r.dropped = config_.task == Task::BallRotation && r.reward.drop > 0.0;
  } else {
    r.fault = true;
  }
  r.timeout = s.step >= config_.episode_length;
  r.done = r.fault || r.dropped || r.timeout;
  r.q = s.q;
  r.qbar = s.qbar;
  r.ball_orientation = s.ball.orientation;
  r.omega = s.omega;
  r.omega_target = target_angular_velocity(s.omega[static_cast<Eigen::Index>(config_.axis)],
                                           config_.direction_sign());
  if (r.done) s = reset(s.env_id, s.seed, s.episode + 1);
  return r;
}

Vec HandEnv::actor_observation(const EnvState& s) const {
  return build_actor_observation(s.qbar, s.history, s.a_prev, model_->q_min(), model_->q_max(),
                                 config_.obs_scale);
}

Vec HandEnv::critic_observation(const EnvState& s) const {
  const Eigen::Index n = s.q.size();
  Vec obs(static_cast<Eigen::Index>(critic_dim()));
  Eigen::Index at = 0;
  auto put = [&](const auto& v) {
    obs.segment(at, v.size()) = v;
    at += v.size();
  };
  put(normalize_joints(s.q, model_->q_min(), model_->q_max()));
  put(normalize_joints(s.qbar, model_->q_min(), model_->q_max()));
  put(s.qdot);
  put(s.tau);
  put(s.ball.position);
  put(Eigen::Vector4d(s.ball.orientation.w(), s.ball.orientation.x(), s.ball.orientation.y(),
                      s.ball.orientation.z()));
  put(s.ball.linear_velocity);
  put(s.ball.angular_velocity);
  const FingertipSet tips = fingertip_velocities(*model_, s.q, s.qdot);
  for (const auto& t : tips) put(t.pose.translation);
  for (const auto& t : tips) {
    const Quat& r = t.pose.rotation;
    put(Eigen::Vector4d(r.w(), r.x(), r.y(), r.z()));
  }
  for (const auto& t : tips) put(t.linear_velocity);
  for (const auto& t : tips) put(t.angular_velocity);
  for (const auto& f : s.contacts.force) put(f);
  put(s.a_prev);
  if (at != obs.size() || n != static_cast<Eigen::Index>(action_dim()))
    throw DimensionError("critic_observation: layout mismatch");
  return obs;
}

std::vector<std::string> trajectory_header(std::size_t actuated) {
  std::vector<std::string> h{"step", "env"};
  for (auto& c : indexed_columns("q", actuated)) h.push_back(std::move(c));
  for (auto& c : indexed_columns("qbar", actuated)) h.push_back(std::move(c));
  for (const char* c : {"ball_qw", "ball_qx", "ball_qy", "ball_qz", "omega_x", "omega_y", "omega_z",
                        "rot_term", "total_reward", "done"})
    h.emplace_back(c);
  return h;
}

std::vector<double> trajectory_row(std::size_t step, std::size_t env, const StepResult& r, double s,
                                   Axis axis) {
  std::vector<double> row{static_cast<double>(step), static_cast<double>(env)};
  row.insert(row.end(), r.q.data(), r.q.data() + r.q.size());
  row.insert(row.end(), r.qbar.data(), r.qbar.data() + r.qbar.size());
  const Quat& o = r.ball_orientation;
  row.insert(row.end(), {o.w(), o.x(), o.y(), o.z(), r.omega.x(), r.omega.y(), r.omega.z(),
                         rotation_term(r.omega[static_cast<Eigen::Index>(axis)], s), r.reward.total,
                         r.done ? 1.0 : 0.0});
  return row;
}

HandEnvBatch::HandEnvBatch(const HandModel& model, EnvConfig config, std::size_t num_envs,
                           std::size_t threads)
    : env_(model, std::move(config)), threads_(threads), states_(num_envs), results_(num_envs) {
  if (num_envs == 0) throw Error("HandEnvBatch: need at least one environment");
  actor_ = Mat::Zero(static_cast<Eigen::Index>(env_.actor_dim()), static_cast<Eigen::Index>(num_envs));
  critic_ = Mat::Zero(static_cast<Eigen::Index>(env_.critic_dim()), static_cast<Eigen::Index>(num_envs));
}

void HandEnvBatch::reset(std::uint64_t seed) {
  parallel_for(
      states_.size(),
      [&](std::size_t i) {
        states_[i] = env_.reset(i, seed, 0);
        results_[i] = StepResult{};
        const auto c = static_cast<Eigen::Index>(i);
        actor_.col(c) = env_.actor_observation(states_[i]);
        critic_.col(c) = env_.critic_observation(states_[i]);
      },
      threads_);
}

void HandEnvBatch::step(const Mat& actions, VecStepResult& out) {
  const auto n = static_cast<Eigen::Index>(states_.size());
  if (actions.rows() != static_cast<Eigen::Index>(action_dim()) || actions.cols() != n)
    throw DimensionError("HandEnvBatch::step: actions must be " + std::to_string(action_dim()) + " x " +
                         std::to_string(n));
  out.reward.resize(n);
  out.omega_target.resize(n);
  out.done.assign(states_.size(), 0);
  out.fault.assign(states_.size(), 0);
  parallel_for(
      states_.size(),
      [&](std::size_t i) {
        const auto c = static_cast<Eigen::Index>(i);
        results_[i] = env_.step(states_[i], actions.col(c));
        out.reward[c] = results_[i].reward.total;
        out.omega_target[c] = results_[i].omega_target;
        out.done[i] = results_[i].done;
        out.fault[i] = results_[i].fault;
        actor_.col(c) = env_.actor_observation(states_[i]);
        critic_.col(c) = env_.critic_observation(states_[i]);
      },
      threads_);
}

}  // namespace tdk
