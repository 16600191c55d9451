#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tdk/mlp.hpp"
#include "tdk/policy.hpp"
#include "tdk/ppo.hpp"
#include "test_support.hpp"

namespace tdk {
namespace {

using std::numbers::pi;

MlpWeights small_net(std::uint64_t seed) {
  CounterRng rng(seed, 0, 0);
  MlpWeights w = mlp_init(4, {8, 5}, 3, rng);
  for (auto& l : w.layers) l.bias = test::random_vec(l.bias.size(), rng, -0.5, 0.5);
  return w;
}

TEST(Mlp, InitShapesAndZeroBiases) {
  CounterRng rng(50, 0, 0);
  const MlpWeights w = mlp_init(77, {64, 64}, 11, rng, 0.01);
  ASSERT_EQ(w.layers.size(), 3u);
  EXPECT_EQ(w.input_dim(), 77u);
  EXPECT_EQ(w.output_dim(), 11u);
  EXPECT_EQ(w.num_parameters(), 77u * 64 + 64 + 64u * 64 + 64 + 64u * 11 + 11);
  for (const auto& l : w.layers) EXPECT_TRUE(l.bias.isZero(0.0));
  EXPECT_LT(w.layers[2].weight.cwiseAbs().maxCoeff(), 0.01);
  EXPECT_THROW(mlp_init(0, {4}, 1, rng), DimensionError);
}

TEST(Mlp, ZeroWeightsGiveBiasOutput) {
  MlpWeights w = small_net(51);
  for (auto& l : w.layers) l.weight.setZero();
  EXPECT_EQ(mlp_forward(w, Vec(Vec::Constant(4, 3.0))), w.layers[2].bias);
}

TEST(Mlp, Elu) {
  EXPECT_EQ(elu(2.0), 2.0);
  EXPECT_EQ(elu(0.0), 0.0);
  EXPECT_NEAR(elu(-1.0), std::exp(-1.0) - 1.0, 1e-16);
  EXPECT_GE(elu(-50.0), -1.0);
  EXPECT_EQ(parse_activation("elu"), Activation::Elu);
  EXPECT_EQ(parse_activation("identity"), Activation::Identity);
  EXPECT_THROW(parse_activation("relu"), Error);
}

TEST(Mlp, ForwardMatchesHandLoop) {
  const MlpWeights w = small_net(52);
  CounterRng rng(52, 1, 0);
  const Mat x = test::random_mat(4, 7, rng);
  const Mat y = mlp_forward(w, x);
  ASSERT_EQ(y.rows(), 3);
  ASSERT_EQ(y.cols(), 7);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    std::vector<double> a(x.col(c).data(), x.col(c).data() + 4);
    for (std::size_t k = 0; k < w.layers.size(); ++k) {
      const auto& l = w.layers[k];
      std::vector<double> next(static_cast<std::size_t>(l.weight.rows()));
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        double s = l.bias[r];
        for (Eigen::Index i = 0; i < l.weight.cols(); ++i) s += l.weight(r, i) * a[static_cast<std::size_t>(i)];
        next[static_cast<std::size_t>(r)] = k + 1 == w.layers.size() ? s : (s >= 0 ? s : std::exp(s) - 1);
      }
      a = next;
    }
    for (int r = 0; r < 3; ++r) EXPECT_NEAR(y(r, c), a[static_cast<std::size_t>(r)], 1e-14);
    EXPECT_EQ(mlp_forward(w, Vec(x.col(c))), y.col(c));
  }
  EXPECT_THROW(mlp_forward(w, Mat(Mat::Zero(5, 2))), DimensionError);
}

TEST(Mlp, IdentityNetworkIsLinear) {
  MlpWeights w = small_net(53);
  w.hidden = Activation::Identity;
  for (auto& l : w.layers) l.bias.setZero();
  CounterRng rng(53, 1, 0);
  const Vec a = test::random_vec(4, rng), b = test::random_vec(4, rng);
  const Vec lhs = mlp_forward(w, Vec(2.0 * a - 3.0 * b));
  const Vec rhs = 2.0 * mlp_forward(w, a) - 3.0 * mlp_forward(w, b);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  MlpWeights w = small_net(54);
  CounterRng rng(54, 1, 0);
  const Mat x = test::random_mat(4, 6, rng);
  const Mat g = test::random_mat(3, 6, rng);
  MlpCache cache;
  mlp_forward(w, x, &cache);
  const Vec analytic = flatten_gradients(mlp_backward(w, cache, g));
  const Vec p = flatten_parameters(w);
  ASSERT_EQ(analytic.size(), p.size());
  const double h = 1e-6;
  Vec fd(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Vec pp = p, pm = p;
    pp[i] += h;
    pm[i] -= h;
    assign_parameters(w, pp);
    const double fp = (g.array() * mlp_forward(w, x).array()).sum();
    assign_parameters(w, pm);
    const double fm = (g.array() * mlp_forward(w, x).array()).sum();
    fd[i] = (fp - fm) / (2 * h);
  }
  assign_parameters(w, p);
  EXPECT_LT(test::max_rel_error(analytic, fd, 1e-6), 1e-5);
}

TEST(Mlp, FlattenAssignRoundTrip) {
  MlpWeights w = small_net(55);
  const Vec p = flatten_parameters(w);
  EXPECT_EQ(static_cast<std::size_t>(p.size()), w.num_parameters());
  // Column-major weight, then bias.
  EXPECT_EQ(p[1], w.layers[0].weight(1, 0));
  EXPECT_EQ(p[8], w.layers[0].weight(0, 1));
  EXPECT_EQ(p[32], w.layers[0].bias[0]);
  MlpWeights v = small_net(56);
  assign_parameters(v, p);
  EXPECT_EQ(flatten_parameters(v), p);
  EXPECT_THROW(assign_parameters(v, Vec::Zero(p.size() - 1)), DimensionError);
}

TEST(Mlp, ValidateCatchesBrokenChainsAndNonFinite) {
  MlpWeights w = small_net(57);
  EXPECT_NO_THROW(w.validate());
  w.layers[1].weight(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(w.validate(), Error);
  w = small_net(57);
  w.layers[1].weight = Mat::Zero(5, 7);
  EXPECT_THROW(w.validate(), DimensionError);
}

TEST(Policy, LogProbClosedForm) {
  const Vec mean = Vec::Zero(2), log_std = Vec::Zero(2);
  EXPECT_NEAR(gaussian_log_prob(mean, log_std, Vec::Zero(2)), -std::log(2 * pi), 1e-15);
  CounterRng rng(58, 0, 0);
  for (int k = 0; k < 100; ++k) {
    const Vec m = test::random_vec(5, rng), s = test::random_vec(5, rng, -2, 1), a = test::random_vec(5, rng, -3, 3);
    double e = 0.0;
    for (int i = 0; i < 5; ++i) {
      const double sd = std::exp(s[i]);
      e += std::log(std::exp(-0.5 * std::pow((a[i] - m[i]) / sd, 2)) / (sd * std::sqrt(2 * pi)));
    }
    EXPECT_NEAR(gaussian_log_prob(m, s, a), e, 1e-12);
  }
  EXPECT_THROW(gaussian_log_prob(mean, log_std, Vec::Zero(3)), DimensionError);
}

TEST(Policy, EntropyClosedForm) {
  const Vec s = (Vec(3) << -1.0, 0.0, 0.5).finished();
  EXPECT_NEAR(gaussian_entropy(s), -0.5 + 1.5 * std::log(2 * pi * std::exp(1.0)), 1e-14);
}

TEST(Policy, SampleMomentsAndLogProb) {
  const Vec mean = (Vec(2) << 0.5, -1.0).finished();
  const Vec log_std = (Vec(2) << std::log(0.2), std::log(2.0)).finished();
  CounterRng rng(59, 0, 0);
  const int n = 40000;
  Vec sum = Vec::Zero(2), sq = Vec::Zero(2);
  for (int k = 0; k < n; ++k) {
    const PolicySample s = policy_sample(mean, log_std, rng);
    ASSERT_EQ(s.log_prob, gaussian_log_prob(mean, log_std, s.action));
    sum += s.action;
    sq += s.action.cwiseProduct(s.action);
  }
  const Vec m = sum / n;
  const Vec sd = (sq / n - m.cwiseProduct(m)).cwiseSqrt();
  EXPECT_NEAR(m[0], 0.5, 0.01);
  EXPECT_NEAR(m[1], -1.0, 0.05);
  EXPECT_NEAR(sd[0], 0.2, 0.005);
  EXPECT_NEAR(sd[1], 2.0, 0.05);
}

TEST(Policy, SamplingIsReproducible) {
  CounterRng a(60, 1, 2), b(60, 1, 2);
  const Vec m = Vec::Zero(11), s = Vec::Constant(11, -0.5);
  EXPECT_EQ(policy_sample(m, s, a).action, policy_sample(m, s, b).action);
}

GaussianPolicy random_policy_weights(std::uint64_t seed) {
  CounterRng rng(seed, 0, 0);
  GaussianPolicy p{mlp_init(77, {16, 16}, 11, rng), Vec::Constant(11, -0.7)};
  for (auto& l : p.actor.layers) l.bias = test::random_vec(l.bias.size(), rng);
  return p;
}

PolicyMetadata proto_metadata() {
  PolicyMetadata m;
  m.q_min = builtin_proto0().q_min();
  m.q_max = builtin_proto0().q_max();
  m.obs_scale = 0.5;
  m.direction = Direction::Pos;
  m.axis = Axis::Z;
  return m;
}

TEST(PolicyFile, RoundTripIsExact) {
  const GaussianPolicy p = random_policy_weights(61);
  const PolicyDocument d = load_policy(save_policy(p, proto_metadata()));
  ASSERT_EQ(d.policy.actor.layers.size(), p.actor.layers.size());
  for (std::size_t i = 0; i < p.actor.layers.size(); ++i) {
    EXPECT_EQ(d.policy.actor.layers[i].weight, p.actor.layers[i].weight);
    EXPECT_EQ(d.policy.actor.layers[i].bias, p.actor.layers[i].bias);
  }
  EXPECT_EQ(d.policy.log_std, p.log_std);
  EXPECT_EQ(d.metadata.obs_scale, 0.5);
  EXPECT_EQ(d.metadata.q_min, builtin_proto0().q_min());
  EXPECT_EQ(d.metadata.axis, Axis::Z);
  EXPECT_EQ(d.metadata.direction, Direction::Pos);
  EXPECT_EQ(d.metadata.history_depth, 5);
}

TEST(PolicyFile, WeightsAreRowMajor) {
  const GaussianPolicy p = random_policy_weights(62);
  const auto doc = test::json::parse(save_policy(p, proto_metadata()));
  const auto& w = doc["actor"]["layers"][0]["weight"];
  EXPECT_EQ(w[1].get<double>(), p.actor.layers[0].weight(0, 1));
  EXPECT_EQ(w[77].get<double>(), p.actor.layers[0].weight(1, 0));
  EXPECT_EQ(doc["format"], "tdk.policy");
}

TEST(PolicyFile, RejectsMalformedDocuments) {
  const GaussianPolicy p = random_policy_weights(63);
  const auto good = test::json::parse(save_policy(p, proto_metadata()));
  const auto rejects = [](const test::json& d) {
    EXPECT_THROW(load_policy(d.dump()), PolicyFormatError) << d.dump().substr(0, 80);
  };
  auto d = good;
  d["format"] = "other";
  rejects(d);
  d = good;
  d["version"] = 2;
  rejects(d);
  d = good;
  d["log_std"].erase(0);
  rejects(d);
  d = good;
  d["actor"]["layers"][1]["bias"].push_back(0.0);
  rejects(d);
  d = good;
  d["observation"]["q_max"].erase(0);
  rejects(d);
  d = good;
  d["actor"]["output_activation"] = "tanh";
  rejects(d);
  d = good;
  d["observation"]["history_depth"] = 4;
  rejects(d);
  EXPECT_THROW(load_policy("{"), PolicyFormatError);
}

TEST(PolicyFile, MissingFileIsReported) {
  EXPECT_THROW(load_policy_file("/nonexistent/policy.json"), Error);
}

TEST(Gae, UnrolledThreeSteps) {
  const Vec r = (Vec(3) << 1.0, 2.0, 3.0).finished();
  const Vec v = (Vec(4) << 0.5, 0.4, 0.3, 0.2).finished();
  const Vec d = Vec::Zero(3);
  const double g = 0.9, l = 0.8;
  const double d0 = 1.0 + g * 0.4 - 0.5, d1 = 2.0 + g * 0.3 - 0.4, d2 = 3.0 + g * 0.2 - 0.3;
  const double a2 = d2, a1 = d1 + g * l * a2, a0 = d0 + g * l * a1;
  const GaeResult res = compute_gae(r, v, d, g, l);
  EXPECT_NEAR(res.advantages[0], a0, 1e-15);
  EXPECT_NEAR(res.advantages[1], a1, 1e-15);
  EXPECT_NEAR(res.advantages[2], a2, 1e-15);
  EXPECT_NEAR(res.returns[0], a0 + 0.5, 1e-15);
}

TEST(Gae, DoneMasksBootstrapAndCarry) {
  const Vec r = (Vec(3) << 1.0, 2.0, 3.0).finished();
  const Vec v = (Vec(4) << 0.5, 0.4, 0.3, 0.2).finished();
  const Vec d = (Vec(3) << 0.0, 1.0, 0.0).finished();
  const GaeResult res = compute_gae(r, v, d, 0.9, 0.8);
  const double a2 = 3.0 + 0.9 * 0.2 - 0.3;
  const double a1 = 2.0 - 0.4;  // no bootstrap, no carry across the boundary
  EXPECT_NEAR(res.advantages[2], a2, 1e-15);
  EXPECT_NEAR(res.advantages[1], a1, 1e-15);
  EXPECT_NEAR(res.advantages[0], 1.0 + 0.9 * 0.4 - 0.5 + 0.72 * a1, 1e-15);
  EXPECT_THROW(compute_gae(r, Vec::Zero(3), d, 0.9, 0.8), DimensionError);
}

TEST(Gae, LambdaOneIsDiscountedReturn) {
  CounterRng rng(64, 0, 0);
  const Vec r = test::random_vec(20, rng), v = test::random_vec(21, rng);
  const GaeResult res = compute_gae(r, v, Vec::Zero(20), 0.95, 1.0);
  double ret = v[20];
  for (int t = 19; t >= 0; --t) {
    ret = r[t] + 0.95 * ret;
    EXPECT_NEAR(res.returns[t], ret, 1e-12);
  }
}

TEST(Gae, BufferLayoutIsPerEnv) {
  RolloutBuffer b(4, 3, 2, 2, 1);
  CounterRng rng(65, 0, 0);
  b.rewards = test::random_vec(12, rng);
  b.values = test::random_vec(12, rng);
  b.dones = Vec::Zero(12);
  b.dones[b.index(1, 2)] = 1.0;
  b.last_values = test::random_vec(3, rng);
  compute_gae(b, 0.9, 0.7);
  for (std::size_t e = 0; e < 3; ++e) {
    Vec r(4), v(5), d(4);
    for (std::size_t t = 0; t < 4; ++t) {
      r[t] = b.rewards[b.index(t, e)];
      v[t] = b.values[b.index(t, e)];
      d[t] = b.dones[b.index(t, e)];
    }
    v[4] = b.last_values[e];
    const GaeResult g = compute_gae(r, v, d, 0.9, 0.7);
    for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(b.advantages[b.index(t, e)], g.advantages[t]);
  }
}

TEST(Advantages, NormalizedMoments) {
  CounterRng rng(66, 0, 0);
  const Vec a = (test::random_vec(1000, rng, -5, 20).array() + 3.0).matrix();
  const Vec n = normalize_advantages(a);
  EXPECT_NEAR(n.mean(), 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt(n.squaredNorm() / 1000.0), 1.0, 1e-9);
  EXPECT_TRUE(normalize_advantages(Vec::Constant(10, 4.0)).isZero(0.0));
}

TEST(RunningStats, MergedBatchesMatchFullBatch) {
  CounterRng rng(67, 0, 0);
  const Mat x = test::random_mat(3, 100, rng, -2, 5);
  RunningMeanStd full(3), parts(3);
  full.update(x);
  parts.update(x.leftCols(37));
  parts.update(x.middleCols(37, 50));
  parts.update(x.rightCols(13));
  EXPECT_EQ(parts.count(), 100.0);
  EXPECT_LT((full.mean() - parts.mean()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((full.var() - parts.var()).cwiseAbs().maxCoeff(), 1e-12);
  const Vec mean = x.rowwise().mean();
  EXPECT_LT((full.mean() - mean).cwiseAbs().maxCoeff(), 1e-12);
  const Mat back = full.denormalize(full.normalize(x, 1e9));
  EXPECT_LT((back - x).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  Adam opt(3, 0.01);
  Vec p = Vec::Zero(3);
  opt.step(p, (Vec(3) << 2.0, -0.5, 0.0).finished());
  EXPECT_NEAR(p[0], -0.01, 1e-9);
  EXPECT_NEAR(p[1], 0.01, 1e-9);
  EXPECT_EQ(p[2], 0.0);
  EXPECT_EQ(opt.steps(), 1);
}

// Two-sample buffers whose stored log-probs put every ratio where we want it.
struct PpoFixture {
  ActorCritic agent;
  RolloutBuffer buffer;
  PpoConfig config;

  PpoFixture() : buffer(1, 2, 3, 2, 2) {
    CounterRng rng(68, 0, 0);
    agent = make_actor_critic(3, 2, 2, {4}, {4}, -0.5, rng);
    buffer.actor_obs = test::random_mat(3, 2, rng);
    buffer.critic_obs = test::random_mat(2, 2, rng);
    buffer.actions = test::random_mat(2, 2, rng);
    buffer.values = Vec::Zero(2);
    buffer.rewards = Vec::Zero(2);
    buffer.dones = Vec::Zero(2);
    buffer.last_values = Vec::Zero(2);
    buffer.returns = Vec::Zero(2);
    config.epochs = 1;
    config.minibatch_size = 2;
    for (Eigen::Index j = 0; j < 2; ++j) buffer.log_probs[j] = current_log_prob(j);
  }

  double current_log_prob(Eigen::Index j) const {
    return gaussian_log_prob(agent.policy.act(buffer.actor_obs.col(j)), agent.policy.log_std, buffer.actions.col(j));
  }

  /// Runs one update; returns how far the actor moved.
  double actor_change(PpoStats* stats = nullptr) {
    Vec before(flatten_parameters(agent.policy.actor).size() + 2);
    before << flatten_parameters(agent.policy.actor), agent.policy.log_std;
    PpoOptimizers opt = make_optimizers(agent, config);
    CounterRng rng(69, 0, 0);
    const PpoStats s = ppo_update(agent, opt, buffer, config, rng);
    if (stats) *stats = s;
    Vec after(before.size());
    after << flatten_parameters(agent.policy.actor), agent.policy.log_std;
    return (after - before).cwiseAbs().maxCoeff();
  }
};

TEST(Ppo, FirstPassRatioIsOne) {
  PpoFixture f;
  f.buffer.advantages = (Vec(2) << 1.0, -1.0).finished();
  PpoStats s;
  f.actor_change(&s);
  EXPECT_LT(s.first_pass_max_ratio_deviation, 1e-12);
  EXPECT_NEAR(s.mean_ratio, 1.0, 1e-12);
  EXPECT_EQ(s.clip_fraction, 0.0);
}

TEST(Ppo, ZeroAdvantageLeavesActorUnchanged) {
  PpoFixture f;
  f.buffer.advantages = Vec::Zero(2);
  EXPECT_EQ(f.actor_change(), 0.0);
}

TEST(Ppo, ClippedSamplesCarryNoGradient) {
  PpoFixture f;
  f.buffer.advantages = (Vec(2) << 1.0, -1.0).finished();
  // Ratio e^2 > 1 + clip with A > 0, and e^-2 < 1 - clip with A < 0.
  f.buffer.log_probs[0] = f.current_log_prob(0) - 2.0;
  f.buffer.log_probs[1] = f.current_log_prob(1) + 2.0;
  PpoStats s;
  EXPECT_EQ(f.actor_change(&s), 0.0);
  EXPECT_EQ(s.clip_fraction, 1.0);
}

TEST(Ppo, ClipIsOneSided) {
  // Ratio below 1 - clip with A > 0 is not clipped: the surrogate still pulls
  // the probability up.
  PpoFixture f;
  f.buffer.advantages = (Vec(2) << 1.0, -1.0).finished();
  f.buffer.log_probs[0] = f.current_log_prob(0) + 2.0;
  f.buffer.log_probs[1] = f.current_log_prob(1) + 2.0;
  const double lp_before = f.current_log_prob(0);
  EXPECT_GT(f.actor_change(), 0.0);
  EXPECT_GT(f.current_log_prob(0), lp_before);
}

TEST(Ppo, RejectsMissingAdvantages) {
  PpoFixture f;
  f.buffer.advantages = Vec();
  EXPECT_THROW(f.actor_change(), TrainingError);
  f.buffer.advantages = (Vec(2) << 1.0, std::nan("")).finished();
  EXPECT_THROW(f.actor_change(), TrainingError);
}

TEST(Ppo, ConfigValidation) {
  PpoConfig c;
  EXPECT_NO_THROW(c.validate());
  c.clip = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = PpoConfig{};
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace tdk
