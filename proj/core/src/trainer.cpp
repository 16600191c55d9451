#include "tdk/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json_fields.hpp"

namespace tdk {

void TrainConfig::validate() const {
  ppo.validate();
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("train config: ") + what);
  };
  require(num_envs >= 1, "num_envs must be >= 1");
  require(rollout_length >= 1, "rollout_length must be >= 1");
  require(!actor_hidden.empty() && !critic_hidden.empty(), "hidden layer lists must not be empty");
  for (auto h : actor_hidden) require(h > 0, "hidden sizes must be > 0");
  for (auto h : critic_hidden) require(h > 0, "hidden sizes must be > 0");
}

std::vector<std::string> training_log_header() {
  return {"iter", "mean_reward", "mean_omega_target", "clip_frac", "actor_loss", "critic_loss"};
}

std::vector<double> training_log_row(const IterationLog& l) {
  return {static_cast<double>(l.iter), l.mean_reward, l.mean_omega_target, l.clip_frac, l.actor_loss, l.critic_loss};
}

namespace {

// Stream ids keep the sampling noise independent of env-side streams.
constexpr std::uint64_t kInitStream = 0x696e6974;     // "init"
constexpr std::uint64_t kActionStream = 0x616374;     // "act"
constexpr std::uint64_t kShuffleStream = 0x73687566;  // "shuf"

ActorCritic initial_agent(const VecEnv& env, const TrainConfig& c) {
  CounterRng rng(c.seed, kInitStream, 0);
  return make_actor_critic(env.actor_obs_dim(), env.critic_obs_dim(), env.action_dim(), c.actor_hidden,
                           c.critic_hidden, c.init_log_std, rng);
}

}  // namespace

Trainer::Trainer(VecEnv& env, TrainConfig config)
    : env_(env),
      config_((config.validate(), std::move(config))),
      agent_(initial_agent(env, config_)),
      opt_(make_optimizers(agent_, config_.ppo)),
      buffer_(config_.rollout_length, env.num_envs(), env.actor_obs_dim(), env.critic_obs_dim(), env.action_dim()) {
  env_.reset(config_.seed);
}

void Trainer::collect() {
  const std::size_t N = env_.num_envs();
  const auto adim = static_cast<Eigen::Index>(env_.action_dim());
  const Vec std_dev = agent_.policy.log_std.array().exp();
  double omega_sum = 0.0;
  VecStepResult step;
  for (std::size_t t = 0; t < config_.rollout_length; ++t) {
    const Mat& xa = env_.actor_obs();
    const Mat& xc = env_.critic_obs();
    const Mat mean = mlp_forward(agent_.policy.actor, xa);
    const Vec values = agent_.values(xc);
    CounterRng rng(config_.seed, kActionStream, (static_cast<std::uint64_t>(iteration_) << 32) | t);
    Mat actions(adim, static_cast<Eigen::Index>(N));
    for (std::size_t e = 0; e < N; ++e) {
      const auto c = static_cast<Eigen::Index>(e);
      for (Eigen::Index i = 0; i < adim; ++i) actions(i, c) = mean(i, c) + std_dev[i] * rng.normal();
    }
    const Eigen::Index base = static_cast<Eigen::Index>(t * N);
    const auto n = static_cast<Eigen::Index>(N);
    buffer_.actor_obs.middleCols(base, n) = xa;
    buffer_.critic_obs.middleCols(base, n) = xc;
    buffer_.actions.middleCols(base, n) = actions;
    buffer_.values.segment(base, n) = values;
    // Same expression as the update's batched log-density, so the first
    // update pass sees ratios of exactly one.
    const Mat diff = actions - mean;
    const Vec inv_var = (-2.0 * agent_.policy.log_std).array().exp();
    buffer_.log_probs.segment(base, n) =
        (-0.5 * (diff.array().square().colwise() * inv_var.array()).colwise().sum().transpose() -
         agent_.policy.log_std.sum() - 0.5 * static_cast<double>(adim) * std::log(2.0 * std::numbers::pi))
            .matrix();

    env_.step(actions, step);
    buffer_.rewards.segment(base, n) = step.reward;
    for (std::size_t e = 0; e < N; ++e) buffer_.dones[base + static_cast<Eigen::Index>(e)] = step.done[e];
    omega_sum += step.omega_target.sum();
  }
  buffer_.last_values = agent_.values(env_.critic_obs());
  last_omega_ = Vec::Constant(1, omega_sum / static_cast<double>(buffer_.size()));
}

IterationLog Trainer::iterate() {
  IterationLog log;
  log.iter = iteration_;
  try {
    collect();
    compute_gae(buffer_, config_.ppo.gamma, config_.ppo.lambda);
    CounterRng rng(config_.seed, kShuffleStream, iteration_);
    const PpoStats stats = ppo_update(agent_, opt_, buffer_, config_.ppo, rng);
    log.mean_reward = buffer_.rewards.mean();
    log.mean_omega_target = last_omega_[0];
    log.clip_frac = stats.clip_fraction;
    log.actor_loss = stats.actor_loss;
    log.critic_loss = stats.critic_loss;
    log.mean_ratio = stats.mean_ratio;
    log.first_pass_ratio_deviation = stats.first_pass_max_ratio_deviation;
  } catch (const std::exception& e) {
    throw TrainingError("training iteration " + std::to_string(iteration_) + ": " + e.what());
  }
  ++iteration_;
  history_.push_back(log);
  return log;
}

TrainResult train(VecEnv& env, const TrainConfig& config, const IterationCallback& on_iteration) {
  Trainer trainer(env, config);
  for (std::size_t i = 0; i < config.iterations; ++i) {
    const IterationLog log = trainer.iterate();
    if (on_iteration) on_iteration(log, trainer);
  }
  return {trainer.agent(), trainer.history()};
}

EvalResult evaluate(VecEnv& env, const BatchPolicy& policy, std::size_t steps, std::uint64_t seed) {
  env.reset(seed);
  EvalResult r;
  VecStepResult out;
  double reward = 0.0, omega = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    env.step(policy(env.actor_obs(), t), out);
    reward += out.reward.sum();
    omega += out.omega_target.sum();
    r.samples += env.num_envs();
  }
  if (r.samples > 0) {
    r.mean_reward = reward / static_cast<double>(r.samples);
    r.mean_omega_target = omega / static_cast<double>(r.samples);
  }
  return r;
}

BatchPolicy mean_policy(const GaussianPolicy& policy) {
  return [&policy](const Mat& obs, std::size_t) { return mlp_forward(policy.actor, obs); };
}

BatchPolicy random_policy(std::size_t action_dim, std::uint64_t seed) {
  return [action_dim, seed](const Mat& obs, std::size_t step) {
    CounterRng rng(seed, 0x72616e64, step);  // "rand"
    Mat a(static_cast<Eigen::Index>(action_dim), obs.cols());
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, c) = rng.uniform(-1.0, 1.0);
    return a;
  };
}

namespace {

using detail::json;

TrainConfig train_config_from_json(const json& doc, const std::string& where) {
  detail::reject_unknown_keys(
      doc,
      {"num_envs", "rollout_length", "iterations", "seed", "actor_hidden", "critic_hidden", "init_log_std",
       "checkpoint_every", "threads", "epochs", "minibatch_size", "gamma", "lambda", "clip", "learning_rate",
       "entropy_coef", "value_coef", "max_grad_norm"},
      where);
  TrainConfig c;
  detail::read_field(doc, "num_envs", c.num_envs, where);
  detail::read_field(doc, "rollout_length", c.rollout_length, where);
  detail::read_field(doc, "iterations", c.iterations, where);
  detail::read_field(doc, "seed", c.seed, where);
  detail::read_field(doc, "actor_hidden", c.actor_hidden, where);
  detail::read_field(doc, "critic_hidden", c.critic_hidden, where);
  detail::read_field(doc, "init_log_std", c.init_log_std, where);
  detail::read_field(doc, "checkpoint_every", c.checkpoint_every, where);
  detail::read_field(doc, "threads", c.threads, where);
  detail::read_field(doc, "epochs", c.ppo.epochs, where);
  detail::read_field(doc, "minibatch_size", c.ppo.minibatch_size, where);
  detail::read_field(doc, "gamma", c.ppo.gamma, where);
  detail::read_field(doc, "lambda", c.ppo.lambda, where);
  detail::read_field(doc, "clip", c.ppo.clip, where);
  detail::read_field(doc, "learning_rate", c.ppo.learning_rate, where);
  detail::read_field(doc, "entropy_coef", c.ppo.entropy_coef, where);
  detail::read_field(doc, "value_coef", c.ppo.value_coef, where);
  detail::read_field(doc, "max_grad_norm", c.ppo.max_grad_norm, where);
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"num_envs", c.num_envs},
          {"rollout_length", c.rollout_length},
          {"iterations", c.iterations},
          {"seed", c.seed},
          {"actor_hidden", c.actor_hidden},
          {"critic_hidden", c.critic_hidden},
          {"init_log_std", c.init_log_std},
          {"checkpoint_every", c.checkpoint_every},
          {"threads", c.threads},
          {"epochs", c.ppo.epochs},
          {"minibatch_size", c.ppo.minibatch_size},
          {"gamma", c.ppo.gamma},
          {"lambda", c.ppo.lambda},
          {"clip", c.ppo.clip},
          {"learning_rate", c.ppo.learning_rate},
          {"entropy_coef", c.ppo.entropy_coef},
          {"value_coef", c.ppo.value_coef},
          {"max_grad_norm", c.ppo.max_grad_norm}};
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  const json doc = detail::parse_json_document(json_text, "run config");
  detail::reject_unknown_keys(doc, {"env", "train"}, "config");
  RunConfig c;
  if (doc.contains("env")) c.env = detail::env_config_from_json(doc.at("env"), "env");
  if (doc.contains("train")) c.train = train_config_from_json(doc.at("train"), "train");
  c.train.validate();
  return c;
}

RunConfig load_run_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& config) {
  json doc;
  doc["env"] = detail::env_config_to_json(config.env);
  doc["train"] = train_config_to_json(config.train);
  return doc.dump(2);
}

}  // namespace tdk
