#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "tdk/env_config.hpp"
#include "tdk/ppo.hpp"
#include "tdk/vec_env.hpp"

namespace tdk {

struct TrainConfig {
  PpoConfig ppo;
  std::size_t num_envs = 64;
  std::size_t rollout_length = 64;
  std::size_t iterations = 100;
  std::uint64_t seed = 0;
  std::vector<std::size_t> actor_hidden{64, 64};
  std::vector<std::size_t> critic_hidden{64, 64};
  double init_log_std = -0.5;
  std::size_t checkpoint_every = 0;  // iterations; 0 disables
  std::size_t threads = 0;           // env stepping workers; 0 = hardware concurrency

  void validate() const;
};

/// One row of the training log.
struct IterationLog {
  std::size_t iter = 0;
  double mean_reward = 0.0;
  double mean_omega_target = 0.0;
  double clip_frac = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double mean_ratio = 1.0;
  double first_pass_ratio_deviation = 0.0;
};

std::vector<std::string> training_log_header();
std::vector<double> training_log_row(const IterationLog& log);

/// Rollout collection and PPO updates on a VecEnv.
class Trainer {
 public:
  Trainer(VecEnv& env, TrainConfig config);

  /// One rollout + update. Env and update failures are rethrown as
  /// TrainingError carrying the iteration number.
  IterationLog iterate();

  const ActorCritic& agent() const { return agent_; }
  const TrainConfig& config() const { return config_; }
  std::size_t iteration() const { return iteration_; }
  const std::vector<IterationLog>& history() const { return history_; }
  const RolloutBuffer& buffer() const { return buffer_; }

 private:
  void collect();

  VecEnv& env_;
  TrainConfig config_;
  ActorCritic agent_;
  PpoOptimizers opt_;
  RolloutBuffer buffer_;
  std::size_t iteration_ = 0;
  std::vector<IterationLog> history_;
  Vec last_omega_;
};

struct TrainResult {
  ActorCritic agent;
  std::vector<IterationLog> logs;
};

using IterationCallback = std::function<void(const IterationLog&, const Trainer&)>;

TrainResult train(VecEnv& env, const TrainConfig& config, const IterationCallback& on_iteration = {});

struct EvalResult {
  double mean_reward = 0.0;
  double mean_omega_target = 0.0;
  std::size_t samples = 0;
};

using BatchPolicy = std::function<Mat(const Mat& actor_obs, std::size_t step)>;

/// Resets `env` with `seed` and runs `steps` batched steps under `policy`.
EvalResult evaluate(VecEnv& env, const BatchPolicy& policy, std::size_t steps, std::uint64_t seed);

/// Deterministic actor mean.
BatchPolicy mean_policy(const GaussianPolicy& policy);
/// Uniform actions in [-1, 1], reproducible from `seed`.
BatchPolicy random_policy(std::size_t action_dim, std::uint64_t seed);

/// Environment and trainer settings read from one JSON document:
/// {"env": {...}, "train": {...}}. Missing keys keep their defaults.
struct RunConfig {
  EnvConfig env;
  TrainConfig train;
};

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config_file(const std::string& path);
std::string serialize_run_config(const RunConfig& config);

}  // namespace tdk
