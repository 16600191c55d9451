#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "tdk/csv.hpp"
#include "tdk/env.hpp"
#include "tdk/parallel.hpp"
#include "tdk/rng.hpp"
#include "tdk/stats.hpp"
#include "test_support.hpp"

namespace tdk {
namespace {

TEST(Smoothing, RecurrenceExamples) {
  const std::vector<double> x{1.0, 0.0, 0.0, 4.0};
  const auto y = exponential_smoothing(x, 0.5);
  EXPECT_EQ(y, (std::vector<double>{1.0, 0.5, 0.25, 2.125}));
  EXPECT_EQ(exponential_smoothing(x, 1.0), x);
  EXPECT_THROW(exponential_smoothing(x, 0.0), Error);
  EXPECT_THROW(exponential_smoothing(std::vector<double>{}, 0.3), Error);
}

TEST(Smoothing, VectorSmootherMatchesScalar) {
  ExponentialSmoother s(0.3);
  CounterRng rng(80, 0, 0);
  std::vector<double> a, b;
  for (int k = 0; k < 50; ++k) {
    const Vec x = test::random_vec(2, rng);
    a.push_back(x[0]);
    b.push_back(s.update(x)[0]);
  }
  const auto ref = exponential_smoothing(a, 0.3);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(b[i], ref[i], 1e-15);
  s.reset();
  EXPECT_EQ(s.update(Vec::Constant(2, 7.0))[0], 7.0);
}

TEST(Percentile, LinearInterpolation) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_EQ(percentile(v, 0), 1.0);
  EXPECT_EQ(percentile(v, 100), 4.0);
  EXPECT_EQ(percentile(v, 50), 2.5);
  EXPECT_NEAR(percentile(v, 25), 1.75, 1e-15);
}

CsvTable omega_log(const std::vector<double>& wy) {
  CsvTable t;
  t.header = {"omega_x", "omega_y", "omega_z"};
  for (double w : wy) t.rows.push_back({0.0, w, 0.0});
  return t;
}

TEST(RotationStats, ConstantRotationOnPlateau) {
  const RotationStats s = rotation_stats(omega_log(std::vector<double>(20, -1.5)), Axis::Y, Direction::Neg);
  EXPECT_NEAR(s.mean, -1.5, 1e-12);
  EXPECT_NEAR(s.mean_target, 1.5, 1e-12);
  EXPECT_EQ(s.in_band_fraction, 1.0);
  EXPECT_EQ(s.raw_in_band_fraction, 1.0);
  const RotationStats p = rotation_stats(omega_log(std::vector<double>(20, -1.5)), Axis::Y, Direction::Pos);
  EXPECT_NEAR(p.mean_target, -1.5, 1e-12);
  EXPECT_EQ(p.in_band_fraction, 0.0);
}

TEST(RotationStats, RawBandMatchesRewardTerm) {
  CounterRng rng(81, 0, 0);
  std::vector<double> w;
  for (int k = 0; k < 500; ++k) w.push_back(rng.uniform(-3, 1));
  const RotationStats s = rotation_stats(omega_log(w), Axis::Y, Direction::Neg, 0.3);
  const auto on = std::count_if(w.begin(), w.end(), [](double x) { return rotation_term(x, 1.0) == 2.0; });
  EXPECT_EQ(s.raw_in_band_fraction, static_cast<double>(on) / 500.0);
  EXPECT_EQ(s.smoothed, exponential_smoothing(w, 0.3));
  EXPECT_LE(s.p05, s.p25);
  EXPECT_LE(s.p25, s.median);
  EXPECT_LE(s.median, s.p75);
  EXPECT_LE(s.p75, s.p95);
}

TEST(RotationStats, HandFrameRotation) {
  CsvTable t;
  t.header = {"omega_x", "omega_y", "omega_z"};
  for (int k = 0; k < 10; ++k) t.rows.push_back({0.0, 0.0, -1.5});
  // A -90 degree turn about x takes world z to hand y.
  const Quat r(Eigen::AngleAxisd(-std::numbers::pi / 2, Vec3::UnitX()));
  const RotationStats s = rotation_stats(t, Axis::Y, Direction::Neg, 0.3, r);
  EXPECT_NEAR(s.mean, -1.5, 1e-12);
  EXPECT_THROW(rotation_stats(CsvTable{{"omega_x"}, {}}, Axis::Y, Direction::Neg), Error);
}

TEST(RotationStats, EmptyAndStillLogsHaveNoTimeInBand) {
  const RotationStats e = rotation_stats(omega_log({}), Axis::Y, Direction::Neg);
  EXPECT_TRUE(e.samples.empty());
  EXPECT_EQ(e.in_band_fraction, 0.0);
  EXPECT_EQ(e.raw_in_band_fraction, 0.0);
  const RotationStats z = rotation_stats(omega_log(std::vector<double>(30, 0.0)), Axis::Y, Direction::Neg);
  EXPECT_EQ(z.mean, 0.0);
  EXPECT_EQ(z.in_band_fraction, 0.0);
  EXPECT_THROW(rotation_stats(omega_log({1.0}), Axis::Y, Direction::Neg, 1.5), Error);
}

TEST(RotationStats, AgreesWithSimulatorTrajectory) {
  const HandEnv env(builtin_proto0(), EnvConfig{});
  EnvState s = env.reset(0, 12);
  CounterRng rng(82, 0, 0);
  CsvTable t;
  t.header = trajectory_header(11);
  std::size_t plateau = 0;
  for (std::size_t k = 0; k < 300; ++k) {
    const StepResult r = env.step(s, test::random_vec(11, rng));
    t.rows.push_back(trajectory_row(k, 0, r, 1.0, Axis::Y));
    if (r.reward.rotation == 2.0) ++plateau;
  }
  const RotationStats st = rotation_stats(t, Axis::Y, Direction::Neg);
  EXPECT_EQ(st.raw_in_band_fraction, static_cast<double>(plateau) / 300.0);
}

TEST(Csv, RoundTripIsExact) {
  CsvTable t;
  t.header = indexed_columns("x", 3);
  EXPECT_EQ(t.header, (std::vector<std::string>{"x0", "x1", "x2"}));
  CounterRng rng(83, 0, 0);
  for (int k = 0; k < 50; ++k) t.rows.push_back({rng.normal(), rng.uniform(-1e-300, 1e300), 1.0 / 3.0});
  std::stringstream ss;
  write_csv(ss, t);
  const CsvTable back = read_csv(ss);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.require_column("x1"), 1u);
  EXPECT_FALSE(back.column("y"));
  EXPECT_THROW(back.require_column("y"), Error);
}

TEST(Csv, RejectsRaggedAndNonNumericRows) {
  std::istringstream ragged("a,b\n1,2\n3\n");
  EXPECT_THROW(read_csv(ragged), Error);
  std::istringstream text("a,b\n1,two\n");
  EXPECT_THROW(read_csv(text), Error);
  std::istringstream empty("");
  EXPECT_THROW(read_csv(empty), Error);
  std::ostringstream out;
  CsvWriter w(out, {"a", "b"});
  EXPECT_THROW(w.write_row(std::vector<double>{1.0}), Error);
}

TEST(Rng, CounterStreamsArePure) {
  CounterRng a(1, 2, 3), b(1, 2, 3), c(1, 2, 4), d(2, 2, 3);
  const auto x = a(), y = b();
  EXPECT_EQ(x, y);
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
  EXPECT_EQ(a.counter(), 1u);
  EXPECT_EQ(CounterRng(9, 0, 0).uniform(2.0, 2.0), 2.0);
}

TEST(Rng, UniformAndNormalMoments) {
  CounterRng rng(84, 0, 0);
  double su = 0, sn = 0, sn2 = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const double u = rng.uniform(-1, 3);
    ASSERT_GE(u, -1.0);
    ASSERT_LT(u, 3.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 1.0, 0.02);
  EXPECT_NEAR(sn / n, 0.0, 0.02);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
  std::uniform_int_distribution<int> dist(0, 9);
  EXPECT_LE(dist(rng), 9);
}

TEST(Parallel, EveryIndexOnceAndExceptionsPropagate) {
  std::vector<int> hits(101, 0);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; }, 4);
  EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  EXPECT_THROW(parallel_for(10, [](std::size_t i) { if (i == 7) throw Error("boom"); }, 3), Error);
}

TEST(EnvConfigFile, StrictKeysAndRoundTrip) {
  EnvConfig c;
  c.direction = Direction::Pos;
  c.ranges.friction = {0.5, 1.5};
  c.rest_pose = 0.5 * (builtin_proto0().q_min() + builtin_proto0().q_max());
  const EnvConfig back = parse_env_config(serialize_env_config(c));
  EXPECT_EQ(back.direction, Direction::Pos);
  EXPECT_EQ(back.ranges.friction.hi, 1.5);
  ASSERT_TRUE(back.rest_pose);
  EXPECT_EQ(*back.rest_pose, *c.rest_pose);
  EXPECT_EQ(serialize_env_config(back), serialize_env_config(c));
  EXPECT_THROW(parse_env_config(R"({"substep": 3})"), ConfigError);
  EXPECT_THROW(parse_env_config(R"({"ranges": {"friction": [1.5]}})"), ConfigError);
  EXPECT_THROW(parse_env_config(R"({"ranges": {"friction": [1.5, 0.5]}})").validate(builtin_proto0()), ConfigError);
  EXPECT_THROW(parse_env_config(R"({"axis": "w"})"), Error);
}

TEST(EnvConfigFile, ValidationNamesTheField) {
  EnvConfig c;
  c.kp = -1.0;
  try {
    c.validate(builtin_proto0());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("kp"), std::string::npos);
  }
  c = EnvConfig{};
  c.rest_pose = Vec::Zero(10);
  EXPECT_THROW(c.validate(builtin_proto0()), ConfigError);
}

}  // namespace
}  // namespace tdk
