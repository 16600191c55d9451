#include <gtest/gtest.h>

#include <numbers>

#include "tdk/tendon.hpp"
#include "test_support.hpp"

namespace tdk {
namespace {

using std::numbers::pi;
using test::json;

Vec vec1(double a) { return Vec::Constant(1, a); }

// One hinge, one motor with a flexor/extensor pair on a shared spool.
HandModel single_joint(const std::string& flex_kind, double flex_value, const std::string& ext_kind,
                       double ext_value, double spool_flex, double spool_ext) {
  const json doc = {
      {"schema", "tdk.hand/1"},
      {"antagonistic_tolerance", 0.0015},
      {"name", "single"},
      {"links", {{{"name", "base"}, {"length", 0.05}}, {{"name", "tip"}, {"length", 0.03}}}},
      {"joints",
       {{{"name", "j"}, {"kind", "hinge"}, {"parent", "base"}, {"child", "tip"}, {"axis", {0, 0, 1}},
         {"range", {-3, 3}}}}},
      {"couplings", json::array()},
      {"tendons",
       {{{"name", "flex"}, {"rest_length", 0.2}, {"terms", {{{"joint", "j"}, {"kind", flex_kind}, {"value", flex_value}, {"sign", 1}}}}},
        {{"name", "ext"},
         {"rest_length", 0.2},
         {"terms", {{{"joint", "j"}, {"kind", ext_kind}, {"value", ext_value}, {"sign", -1}}}}}}},
      {"motors",
       {{{"name", "m"},
         {"attachments",
          {{{"tendon", "flex"}, {"spool_radius", spool_flex}, {"winding", 1}},
           {{"tendon", "ext"}, {"spool_radius", spool_ext}, {"winding", -1}}}}}}},
      {"fingertips",
       {{{"name", "thumb"}, {"link", "tip"}}, {{"name", "index"}, {"link", "tip"}}, {{"name", "middle"}, {"link", "tip"}},
        {{"name", "ring"}, {"link", "tip"}}, {{"name", "pinky"}, {"link", "tip"}}}},
  };
  return load_hand_model(doc.dump());
}

TEST(Tendon, ZeroPoseGivesRestLengths) {
  const HandModel& m = builtin_proto0();
  const TendonLengths z = tendon_lengths(m, Vec::Zero(11));
  ASSERT_EQ(z.l.size(), 16);
  for (std::size_t k = 0; k < m.num_motors(); ++k)
    EXPECT_EQ(z.l[static_cast<Eigen::Index>(k)], m.tendons()[m.motors()[k].primary.tendon].rest_length);
}

TEST(Tendon, LinearAndRollingTermArithmetic) {
  const HandModel lin = single_joint("linear", 0.01, "linear", 0.01, 0.005, 0.005);
  EXPECT_NEAR(tendon_lengths(lin, vec1(1.0)).l[0] - 0.2, 0.01, 1e-15);
  const HandModel roll = single_joint("rolling", 0.01, "linear", 0.01, 0.005, 0.005);
  EXPECT_NEAR(tendon_lengths(roll, vec1(pi)).l[0] - 0.2, 0.02, 1e-15);
  EXPECT_NEAR(muscle_jacobian(roll, vec1(0.0))(0, 0), 0.01, 1e-15);
  EXPECT_NEAR(muscle_jacobian(roll, vec1(1.0))(0, 0), 0.01 * std::cos(0.5), 1e-15);
}

TEST(Tendon, LinearRouteJacobianIsConstant) {
  const HandModel lin = single_joint("linear", 0.013, "linear", 0.01, 0.005, 0.005);
  for (double q : {-2.0, 0.0, 0.7, 2.5}) EXPECT_EQ(muscle_jacobian(lin, vec1(q))(0, 0), 0.013);
}

TEST(Tendon, JacobianMatchesFiniteDifferences) {
  const HandModel& m = builtin_proto0();
  CounterRng rng(21, 0, 0);
  const double h = 1e-6;
  for (int k = 0; k < 100; ++k) {
    const Vec q = test::random_pose(m, rng);
    const Mat J = muscle_jacobian(m, q);
    ASSERT_EQ(J.rows(), 16);
    ASSERT_EQ(J.cols(), 11);
    Mat fd(16, 11);
    for (Eigen::Index j = 0; j < 11; ++j) {
      Vec qp = q, qm = q;
      qp[j] += h;
      qm[j] -= h;
      fd.col(j) = (tendon_lengths(m, qp).l - tendon_lengths(m, qm).l) / (2 * h);
    }
    EXPECT_LT(test::max_rel_error(J, fd, 1e-6), 1e-5);
  }
}

TEST(Tendon, JacobianRateMatchesDifferenceOfJacobian) {
  const HandModel& m = builtin_proto0();
  CounterRng rng(22, 0, 0);
  const double h = 1e-6;
  const Vec q = test::random_pose(m, rng), qdot = test::random_vec(11, rng);
  const Mat D = muscle_jacobian_rate(m, q, qdot);
  Mat fd(16, 11);
  for (Eigen::Index j = 0; j < 11; ++j) {
    Vec qp = q, qm = q;
    qp[j] += h;
    qm[j] -= h;
    fd.col(j) = (muscle_jacobian(m, qp) * qdot - muscle_jacobian(m, qm) * qdot) / (2 * h);
  }
  EXPECT_LT((D - fd).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Tendon, FlexorTermsAreMonotone) {
  const HandModel& m = builtin_proto0();
  CounterRng rng(23, 0, 0);
  for (int k = 0; k < 50; ++k) {
    const Vec q = test::random_vec(11, rng, -pi + 1e-3, pi - 1e-3);
    const Mat J = muscle_jacobian(m, q);
    for (std::size_t k2 = 0; k2 < m.num_motors(); ++k2) {
      const auto& route = m.tendons()[m.motors()[k2].primary.tendon];
      bool all_flexor = true;
      for (const auto& t : route.terms) all_flexor = all_flexor && t.sign > 0;
      if (!all_flexor) continue;
      for (const auto& t : route.terms) EXPECT_GT(J(static_cast<Eigen::Index>(k2), static_cast<Eigen::Index>(t.actuated)), 0.0);
    }
  }
}

TEST(Tendon, DistalLengthsDependOnProximalAngles) {
  const HandModel& m = builtin_proto0();
  const Mat J = muscle_jacobian(m, Vec::Zero(11));
  const auto motor = [&](std::string_view name) {
    for (std::size_t k = 0; k < m.num_motors(); ++k)
      if (m.description().motors[k].name == name) return static_cast<Eigen::Index>(k);
    return Eigen::Index{-1};
  };
  const auto mcp = static_cast<Eigen::Index>(*m.actuated_index("index_mcp"));
  EXPECT_NE(J(motor("index_pip_flex"), mcp), 0.0);
}

TEST(Tendon, SpoolConversionArithmetic) {
  const HandModel lin = single_joint("linear", 0.01, "linear", 0.01, 0.005, 0.005);
  const Calibration cal = calibrate(lin, vec1(0.3), vec1(0.0));
  EXPECT_EQ(cal.l_cal[0], 0.2);
  // 1 rad at 0.01 m/rad is 0.01 m of tendon, i.e. 2 rad of a 0.005 m spool.
  EXPECT_NEAR(joints_to_motor_angles(lin, cal, vec1(1.0))[0] - 0.3, 2.0, 1e-12);
  EXPECT_NEAR(motor_angles_to_tendon_lengths(lin, cal, vec1(2.3)).l[0] - 0.2, 0.01, 1e-15);
  const TendonLengths z = motor_angles_to_tendon_lengths(lin, cal, vec1(0.3), vec1(4.0));
  ASSERT_TRUE(z.ldot);
  EXPECT_NEAR((*z.ldot)[0], 0.02, 1e-15);
}

TEST(Tendon, CalibrationFixedPointAndRoundTrip) {
  const HandModel& m = builtin_proto0();
  CounterRng rng(24, 0, 0);
  const Vec theta = test::random_vec(16, rng, -3, 3);
  const Vec q_known = test::random_pose(m, rng);
  const Calibration cal = calibrate(m, theta, q_known);
  EXPECT_EQ(cal.theta_cal, theta);
  EXPECT_EQ(cal.q_cal, q_known);
  EXPECT_EQ(cal.l_cal, tendon_lengths(m, q_known).l);
  EXPECT_LT((joints_to_motor_angles(m, cal, q_known) - theta).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(motor_angles_to_tendon_lengths(m, cal, theta).l, cal.l_cal);
  const Calibration zero = calibrate(m, theta, Vec::Zero(11));
  EXPECT_EQ(zero.l_cal, tendon_lengths(m, Vec::Zero(11)).l);

  for (int k = 0; k < 50; ++k) {
    const Vec q = test::random_pose(m, rng);
    const Vec back = motor_angles_to_tendon_lengths(m, cal, joints_to_motor_angles(m, cal, q)).l;
    EXPECT_LT((back - tendon_lengths(m, q).l).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Tendon, LengthTrajectoryIndependentOfCalibrationAngles) {
  const HandModel& m = builtin_proto0();
  CounterRng rng(25, 0, 0);
  const Vec q_cal = test::random_pose(m, rng);
  const Calibration a = calibrate(m, test::random_vec(16, rng, -3, 3), q_cal);
  const Calibration b = calibrate(m, test::random_vec(16, rng, -3, 3), q_cal);
  for (int k = 0; k < 20; ++k) {
    const Vec q = test::random_pose(m, rng);
    const Vec la = motor_angles_to_tendon_lengths(m, a, joints_to_motor_angles(m, a, q)).l;
    const Vec lb = motor_angles_to_tendon_lengths(m, b, joints_to_motor_angles(m, b, q)).l;
    EXPECT_LT((la - lb).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Tendon, RateEstimatorSmoothsDifferences) {
  TendonRateEstimator est(0.5);
  const double dt = 0.05;
  CounterRng rng(26, 0, 0);
  std::vector<double> l{0.1};
  for (int k = 1; k < 10; ++k) l.push_back(l.back() + 0.001 + rng.uniform(-1e-4, 1e-4));
  EXPECT_EQ(est.update(vec1(l[0]), dt)[0], 0.0);
  // The zero first sample seeds the smoother: y_t = 0.5 d_t + 0.5 y_{t-1}.
  double y = 0.0;
  for (std::size_t t = 1; t < l.size(); ++t) {
    const double d = (l[t] - l[t - 1]) / dt;
    y = 0.5 * d + 0.5 * y;
    EXPECT_NEAR(est.update(vec1(l[t]), dt)[0], y, 1e-12);
  }
  est.reset();
  EXPECT_EQ(est.update(vec1(5.0), dt)[0], 0.0);
}

TEST(Tendon, AntagonisticLinearPairWithMatchedRatiosIsExact) {
  // Moment arms 0.01 / 0.0075 equal the spool radii 0.004 / 0.003.
  const HandModel m = single_joint("linear", 0.01, "linear", 0.0075, 0.004, 0.003);
  const AntagonisticReport r = antagonistic_consistency_check(m);
  EXPECT_LT(r.max_deviation, 1e-15);
  EXPECT_TRUE(r.within_tolerance);
}

TEST(Tendon, AntagonisticRollingPairDeviatesSlightly) {
  const HandModel m = single_joint("rolling", 0.01, "linear", 0.01, 0.005, 0.005);
  const AntagonisticReport r = antagonistic_consistency_check(m);
  EXPECT_GT(r.max_deviation, 0.0);
  // 2 rho sin(q/2) vs rho q over |q| <= 3.
  EXPECT_LT(r.max_deviation, 0.01 * 3.0);
}

TEST(Tendon, Proto0AntagonisticPairsWithinTolerance) {
  const HandModel& m = builtin_proto0();
  const AntagonisticReport r = antagonistic_consistency_check(m);
  EXPECT_TRUE(r.within_tolerance) << r.max_deviation;
  EXPECT_GT(r.max_deviation, 0.0);
  // Only the six proximal two-tendon motors are swept.
  EXPECT_EQ(r.per_motor.size(), 6u);
  for (const auto& [motor, dev] : r.per_motor) EXPECT_TRUE(m.motors()[motor].secondary.has_value());
}

TEST(Tendon, DimensionChecks) {
  const HandModel& m = builtin_proto0();
  EXPECT_THROW(tendon_lengths(m, Vec::Zero(10)), DimensionError);
  const Calibration cal = calibrate(m, Vec::Zero(16), Vec::Zero(11));
  EXPECT_THROW(motor_angles_to_tendon_lengths(m, cal, Vec::Zero(15)), DimensionError);
}

}  // namespace
}  // namespace tdk
