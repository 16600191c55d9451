#pragma once

// Asymmetric actor-critic PPO: the actor sees the actor observation, the
// critic sees the privileged critic observation. The critic works on
// normalized inputs and predicts normalized returns; both normalizers are
// running statistics owned by the agent.

#include <cstdint>

#include "tdk/mlp.hpp"
#include "tdk/policy.hpp"
#include "tdk/rng.hpp"
#include "tdk/types.hpp"

namespace tdk {

struct PpoConfig {
  int epochs = 5;
  std::size_t minibatch_size = 1024;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double learning_rate = 3e-4;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double max_grad_norm = 1.0;

  void validate() const;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Vec& params, const Vec& grad);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Vec m_, v_;
};

/// Per-feature running mean and variance (parallel Welford merge).
class RunningMeanStd {
 public:
  RunningMeanStd() = default;
  explicit RunningMeanStd(std::size_t dim);
  void update(const Mat& batch);  // one sample per column
  Mat normalize(const Mat& x, double clip = 5.0) const;
  Mat denormalize(const Mat& x) const;
  const Vec& mean() const { return mean_; }
  const Vec& var() const { return var_; }
  double count() const { return count_; }

 private:
  Vec mean_;
  Vec var_;
  double count_ = 0.0;
};

struct ActorCritic {
  GaussianPolicy policy;
  MlpWeights critic;
  RunningMeanStd critic_obs_stats;
  RunningMeanStd return_stats;

  /// Value estimates (denormalized), one per column of `critic_obs`.
  Vec values(const Mat& critic_obs) const;
};

ActorCritic make_actor_critic(std::size_t actor_dim, std::size_t critic_dim, std::size_t action_dim,
                              const std::vector<std::size_t>& actor_hidden,
                              const std::vector<std::size_t>& critic_hidden, double init_log_std,
                              CounterRng& rng);

/// Flat storage for T steps x N envs; sample index = t * N + e.
struct RolloutBuffer {
  std::size_t steps = 0;
  std::size_t envs = 0;
  Mat actor_obs;
  Mat critic_obs;
  Mat actions;
  Vec log_probs;
  Vec values;
  Vec rewards;
  Vec dones;
  Vec last_values;  // bootstrap value per env after the final step
  Vec advantages;
  Vec returns;

  RolloutBuffer() = default;
  RolloutBuffer(std::size_t steps, std::size_t envs, std::size_t actor_dim, std::size_t critic_dim,
                std::size_t action_dim);
  std::size_t size() const { return steps * envs; }
  std::size_t index(std::size_t t, std::size_t e) const { return t * envs + e; }
};

struct GaeResult {
  Vec advantages;
  Vec returns;
};

/// Single trajectory: `values` has one more entry than `rewards` (bootstrap).
///   delta_t = r_t + gamma v_{t+1} (1 - d_t) - v_t
///   A_t = delta_t + gamma lambda (1 - d_t) A_{t+1};  returns = A + v
GaeResult compute_gae(const Vec& rewards, const Vec& values, const Vec& dones, double gamma, double lambda);
/// Fills buffer.advantages and buffer.returns.
void compute_gae(RolloutBuffer& buffer, double gamma, double lambda);

/// Zero mean, unit (population) standard deviation.
Vec normalize_advantages(const Vec& a);

struct PpoStats {
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double first_pass_max_ratio_deviation = 0.0;  // max |ratio - 1| on the first minibatch
  std::size_t minibatches = 0;
};

struct PpoOptimizers {
  Adam actor;
  Adam critic;
};

PpoOptimizers make_optimizers(const ActorCritic& agent, const PpoConfig& config);

/// Clipped-surrogate actor step, value regression, entropy bonus, Adam with
/// per-network gradient-norm clipping. Updates the normalizers from the
/// buffer first. Throws TrainingError naming the minibatch on a non-finite loss.
PpoStats ppo_update(ActorCritic& agent, PpoOptimizers& opt, const RolloutBuffer& buffer,
                    const PpoConfig& config, CounterRng& rng);

}  // namespace tdk
