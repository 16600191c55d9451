#include "tdk/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace tdk {

void PpoConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("ppo config: ") + what);
  };
  require(epochs >= 1, "epochs must be >= 1");
  require(minibatch_size >= 1, "minibatch_size must be >= 1");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must be in [0, 1]");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0, 1]");
  require(clip > 0.0, "clip must be > 0");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(entropy_coef >= 0.0 && value_coef > 0.0, "entropy_coef must be >= 0 and value_coef > 0");
  require(max_grad_norm > 0.0, "max_grad_norm must be > 0");
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Vec::Zero(static_cast<Eigen::Index>(size))),
      v_(Vec::Zero(static_cast<Eigen::Index>(size))) {}

void Adam::step(Vec& params, const Vec& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw DimensionError("Adam::step: size mismatch");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

RunningMeanStd::RunningMeanStd(std::size_t dim)
    : mean_(Vec::Zero(static_cast<Eigen::Index>(dim))), var_(Vec::Ones(static_cast<Eigen::Index>(dim))) {}

void RunningMeanStd::update(const Mat& batch) {
  if (batch.rows() != mean_.size()) throw DimensionError("RunningMeanStd::update: dimension mismatch");
  const auto n = static_cast<double>(batch.cols());
  if (n == 0.0) return;
  const Vec bmean = batch.rowwise().mean();
  const Vec bvar = (batch.colwise() - bmean).array().square().rowwise().mean();
  if (count_ == 0.0) {
    mean_ = bmean;
    var_ = bvar;
    count_ = n;
    return;
  }
  const double total = count_ + n;
  const Vec delta = bmean - mean_;
  mean_ += delta * (n / total);
  var_ = (var_ * count_ + bvar * n + delta.cwiseAbs2() * (count_ * n / total)) / total;
  count_ = total;
}

Mat RunningMeanStd::normalize(const Mat& x, double clip) const {
  const Vec inv = (var_.array() + 1e-8).rsqrt();
  return ((x.colwise() - mean_).array().colwise() * inv.array()).cwiseMax(-clip).cwiseMin(clip);
}

Mat RunningMeanStd::denormalize(const Mat& x) const {
  const Vec sd = (var_.array() + 1e-8).sqrt();
  return (x.array().colwise() * sd.array()).matrix().colwise() + mean_;
}

Vec ActorCritic::values(const Mat& critic_obs) const {
  const Mat v = mlp_forward(critic, critic_obs_stats.normalize(critic_obs));
  return return_stats.denormalize(v).row(0).transpose();
}

ActorCritic make_actor_critic(std::size_t actor_dim, std::size_t critic_dim, std::size_t action_dim,
                              const std::vector<std::size_t>& actor_hidden,
                              const std::vector<std::size_t>& critic_hidden, double init_log_std,
                              CounterRng& rng) {
  ActorCritic ac;
  ac.policy.actor = mlp_init(actor_dim, actor_hidden, action_dim, rng, 0.01);
  ac.policy.log_std = Vec::Constant(static_cast<Eigen::Index>(action_dim), init_log_std);
  ac.critic = mlp_init(critic_dim, critic_hidden, 1, rng, 1.0);
  ac.critic_obs_stats = RunningMeanStd(critic_dim);
  ac.return_stats = RunningMeanStd(1);
  return ac;
}

RolloutBuffer::RolloutBuffer(std::size_t steps_, std::size_t envs_, std::size_t actor_dim, std::size_t critic_dim,
                             std::size_t action_dim)
    : steps(steps_), envs(envs_) {
  const auto n = static_cast<Eigen::Index>(steps * envs);
  actor_obs.resize(static_cast<Eigen::Index>(actor_dim), n);
  critic_obs.resize(static_cast<Eigen::Index>(critic_dim), n);
  actions.resize(static_cast<Eigen::Index>(action_dim), n);
  log_probs.resize(n);
  values.resize(n);
  rewards.resize(n);
  dones.resize(n);
  last_values.resize(static_cast<Eigen::Index>(envs));
}

GaeResult compute_gae(const Vec& rewards, const Vec& values, const Vec& dones, double gamma, double lambda) {
  const Eigen::Index T = rewards.size();
  if (values.size() != T + 1 || dones.size() != T)
    throw DimensionError("compute_gae: need T rewards, T dones and T + 1 values");
  GaeResult out{Vec(T), Vec(T)};
  double next = 0.0;
  for (Eigen::Index t = T; t-- > 0;) {
    const double live = 1.0 - dones[t];
    const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
    next = delta + gamma * lambda * live * next;
    out.advantages[t] = next;
  }
  out.returns = out.advantages + values.head(T);
  return out;
}

void compute_gae(RolloutBuffer& b, double gamma, double lambda) {
  const auto T = static_cast<Eigen::Index>(b.steps);
  b.advantages.resize(static_cast<Eigen::Index>(b.size()));
  b.returns.resize(static_cast<Eigen::Index>(b.size()));
  Vec r(T), v(T + 1), d(T);
  for (std::size_t e = 0; e < b.envs; ++e) {
    for (std::size_t t = 0; t < b.steps; ++t) {
      const auto i = static_cast<Eigen::Index>(b.index(t, e));
      const auto ti = static_cast<Eigen::Index>(t);
      r[ti] = b.rewards[i];
      v[ti] = b.values[i];
      d[ti] = b.dones[i];
    }
    v[T] = b.last_values[static_cast<Eigen::Index>(e)];
    const GaeResult g = compute_gae(r, v, d, gamma, lambda);
    for (std::size_t t = 0; t < b.steps; ++t) {
      const auto i = static_cast<Eigen::Index>(b.index(t, e));
      b.advantages[i] = g.advantages[static_cast<Eigen::Index>(t)];
      b.returns[i] = g.returns[static_cast<Eigen::Index>(t)];
    }
  }
}

Vec normalize_advantages(const Vec& a) {
  if (a.size() == 0) return a;
  const double mean = a.mean();
  const Vec centered = a.array() - mean;
  const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(a.size()));
  return centered / (sd + 1e-12);
}

PpoOptimizers make_optimizers(const ActorCritic& agent, const PpoConfig& config) {
  return {Adam(agent.policy.actor.num_parameters() + static_cast<std::size_t>(agent.policy.log_std.size()),
               config.learning_rate),
          Adam(agent.critic.num_parameters(), config.learning_rate)};
}

namespace {

Mat gather_cols(const Mat& m, const std::vector<Eigen::Index>& idx) { return m(Eigen::all, idx); }

Vec gather(const Vec& v, const std::vector<Eigen::Index>& idx) { return v(idx); }

void clip_norm(Vec& g, double max_norm) {
  const double n = g.norm();
  if (n > max_norm) g *= max_norm / n;
}

}  // namespace

PpoStats ppo_update(ActorCritic& agent, PpoOptimizers& opt, const RolloutBuffer& buffer, const PpoConfig& config,
                    CounterRng& rng) {
  config.validate();
  const std::size_t n = buffer.size();
  if (n == 0) throw TrainingError("ppo_update: empty rollout buffer");
  if (buffer.advantages.size() != static_cast<Eigen::Index>(n) || !buffer.advantages.allFinite())
    throw TrainingError("ppo_update: advantages missing or non-finite; run compute_gae first");

  agent.critic_obs_stats.update(buffer.critic_obs);
  agent.return_stats.update(buffer.returns.transpose());
  const Vec adv = normalize_advantages(buffer.advantages);
  const Vec target = agent.return_stats.normalize(buffer.returns.transpose(), 1e9).row(0).transpose();
  const Mat critic_in = agent.critic_obs_stats.normalize(buffer.critic_obs);

  const Eigen::Index adim = buffer.actions.rows();
  const std::size_t mb = std::min(config.minibatch_size, n);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  PpoStats stats;
  double ratio_sum = 0.0, clipped = 0.0, actor_loss = 0.0, critic_loss = 0.0, kl = 0.0;
  std::size_t samples = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + mb <= n; start += mb) {
      const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(start + mb));
      const auto B = static_cast<double>(mb);
      const Mat xa = gather_cols(buffer.actor_obs, idx);
      const Mat act = gather_cols(buffer.actions, idx);
      const Vec old_lp = gather(buffer.log_probs, idx);
      const Vec a_mb = gather(adv, idx);

      // Actor.
      MlpCache cache;
      const Mat mean = mlp_forward(agent.policy.actor, xa, &cache);
      const Vec& log_std = agent.policy.log_std;
      const Vec inv_var = (-2.0 * log_std).array().exp();
      const Mat diff = act - mean;
      const Vec new_lp = (-0.5 * (diff.array().square().colwise() * inv_var.array()).colwise().sum().transpose() -
                          log_std.sum() - 0.5 * static_cast<double>(adim) * std::log(2.0 * std::numbers::pi))
                             .matrix();
      Mat d_mean(adim, diff.cols());
      Vec d_log_std = Vec::Zero(adim);
      double loss_pi = 0.0;
      double max_dev = 0.0;
      for (Eigen::Index j = 0; j < diff.cols(); ++j) {
        const double ratio = std::exp(new_lp[j] - old_lp[j]);
        const double s1 = ratio * a_mb[j];
        const double s2 = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip) * a_mb[j];
        loss_pi -= std::min(s1, s2);
        ratio_sum += ratio;
        kl += old_lp[j] - new_lp[j];
        max_dev = std::max(max_dev, std::abs(ratio - 1.0));
        if (std::abs(ratio - 1.0) > config.clip) clipped += 1.0;
        // d(-min)/d logp: only the unclipped branch carries gradient.
        const double w = s1 <= s2 ? -s1 : 0.0;
        const Vec z = diff.col(j).cwiseProduct(inv_var);
        d_mean.col(j) = w * z / B;  // dlogp/dmean = (a - mean) / var
        d_log_std += w * (diff.col(j).cwiseProduct(z).array() - 1.0).matrix() / B;
      }
      loss_pi /= B;
      const double entropy = gaussian_entropy(log_std);
      d_log_std.array() -= config.entropy_coef;
      loss_pi -= config.entropy_coef * entropy;

      // Critic.
      MlpCache vcache;
      const Mat v = mlp_forward(agent.critic, gather_cols(critic_in, idx), &vcache);
      const Vec err = v.row(0).transpose() - gather(target, idx);
      const double loss_v = config.value_coef * err.squaredNorm() / B;
      const Mat d_v = (2.0 * config.value_coef / B) * err.transpose();

      if (!std::isfinite(loss_pi) || !std::isfinite(loss_v))
        throw TrainingError("ppo_update: non-finite loss in epoch " + std::to_string(epoch) + ", minibatch " +
                            std::to_string(start / mb) + " (actor " + std::to_string(loss_pi) + ", critic " +
                            std::to_string(loss_v) + ")");
      if (stats.minibatches == 0) stats.first_pass_max_ratio_deviation = max_dev;

      Vec ga(static_cast<Eigen::Index>(agent.policy.actor.num_parameters()) + adim);
      ga << flatten_gradients(mlp_backward(agent.policy.actor, cache, d_mean)), d_log_std;
      clip_norm(ga, config.max_grad_norm);
      Vec pa(ga.size());
      pa << flatten_parameters(agent.policy.actor), agent.policy.log_std;
      opt.actor.step(pa, ga);
      assign_parameters(agent.policy.actor, pa.head(pa.size() - adim));
      agent.policy.log_std = pa.tail(adim);

      Vec gc = flatten_gradients(mlp_backward(agent.critic, vcache, d_v));
      clip_norm(gc, config.max_grad_norm);
      Vec pc = flatten_parameters(agent.critic);
      opt.critic.step(pc, gc);
      assign_parameters(agent.critic, pc);

      actor_loss += loss_pi;
      critic_loss += loss_v;
      stats.entropy = entropy;
      samples += mb;
      ++stats.minibatches;
    }
  }
  const double mbs = static_cast<double>(std::max<std::size_t>(stats.minibatches, 1));
  stats.mean_ratio = ratio_sum / static_cast<double>(std::max<std::size_t>(samples, 1));
  stats.clip_fraction = clipped / static_cast<double>(std::max<std::size_t>(samples, 1));
  stats.approx_kl = kl / static_cast<double>(std::max<std::size_t>(samples, 1));
  stats.actor_loss = actor_loss / mbs;
  stats.critic_loss = critic_loss / mbs;
  return stats;
}

}  // namespace tdk
