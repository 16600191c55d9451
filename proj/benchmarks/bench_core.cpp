#include <benchmark/benchmark.h>

#include "tdk/env.hpp"
#include "tdk/estimator.hpp"
#include "tdk/kinematics.hpp"
#include "tdk/mlp.hpp"
#include "tdk/rng.hpp"
#include "tdk/tendon.hpp"

namespace tdk {
namespace {

const HandModel& model() { return builtin_proto0(); }

Vec mid_pose() { return 0.5 * (model().q_min() + model().q_max()); }

void BM_ForwardKinematics(benchmark::State& state) {
  const Vec q = mid_pose();
  for (auto _ : state) benchmark::DoNotOptimize(forward_kinematics(model(), q));
}
BENCHMARK(BM_ForwardKinematics);

void BM_TendonLengths(benchmark::State& state) {
  const Vec q = mid_pose();
  for (auto _ : state) benchmark::DoNotOptimize(tendon_lengths(model(), q));
}
BENCHMARK(BM_TendonLengths);

void BM_MuscleJacobian(benchmark::State& state) {
  const Vec q = mid_pose();
  for (auto _ : state) benchmark::DoNotOptimize(muscle_jacobian(model(), q));
}
BENCHMARK(BM_MuscleJacobian);

void BM_EkfPredictUpdate(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(model().num_actuated());
  const Vec q = mid_pose();
  TendonLengths z = tendon_lengths(model(), q);
  z.ldot = Vec::Zero(z.l.size());
  const EkfState s0 = ekf_init(Vec::Zero(n), model().num_motors(), 0.01, EkfNoise{}, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(ekf_update(ekf_predict(s0), z, model()));
}
BENCHMARK(BM_EkfPredictUpdate);

void BM_EnvStep(benchmark::State& state) {
  EnvConfig cfg;
  cfg.task = state.range(0) ? Task::BallRotation : Task::JointTracking;
  const HandEnv env(model(), cfg);
  EnvState s = env.reset(0, 1);
  CounterRng rng(5, 0, 0);
  Vec a(static_cast<Eigen::Index>(env.action_dim()));
  for (auto _ : state) {
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = rng.uniform(-1.0, 1.0);
    benchmark::DoNotOptimize(env.step(s, a));
  }
}
BENCHMARK(BM_EnvStep)->Arg(0)->Arg(1)->ArgName("ball");

void BM_MlpForwardBatch(benchmark::State& state) {
  CounterRng rng(6, 0, 0);
  const MlpWeights w = mlp_init(77, {256, 256}, 11, rng);
  const Mat x = Mat::Random(77, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward(w, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForwardBatch)->Arg(1)->Arg(64)->Arg(1024);

}  // namespace
}  // namespace tdk

BENCHMARK_MAIN();
