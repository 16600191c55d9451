#include <gtest/gtest.h>

#include <algorithm>

#include "tdk/handmodel.hpp"
#include "test_support.hpp"

namespace tdk {
namespace {

using test::json;
using test::proto0_json;

std::vector<std::string> keys(const std::vector<Violation>& v) {
  std::vector<std::string> out;
  for (const auto& x : v) out.push_back(x.invariant);
  return out;
}

std::vector<Violation> violations_of(const json& doc) {
  return validate_hand_model(parse_hand_description(doc.dump()));
}

TEST(HandModel, BuiltinProto0Structure) {
  const HandModel& m = builtin_proto0();
  EXPECT_EQ(m.num_joints(), 16u);
  EXPECT_EQ(m.num_actuated(), 11u);
  EXPECT_EQ(m.num_motors(), 16u);
  EXPECT_EQ(m.description().couplings.size(), 5u);
  EXPECT_EQ(m.fingertips().size(), 5u);
  EXPECT_TRUE(validate_hand_model(m).empty());
}

TEST(HandModel, JointsMinusCouplingsIsActuated) {
  const HandModel& m = builtin_proto0();
  EXPECT_EQ(m.num_joints() - m.description().couplings.size(), m.num_actuated());
}

TEST(HandModel, Proto0AttachmentCounts) {
  const HandModel& m = builtin_proto0();
  std::size_t attachments = 0, dual = 0;
  for (const auto& motor : m.description().motors) {
    attachments += motor.attachments.size();
    if (motor.attachments.size() == 2) ++dual;
  }
  EXPECT_EQ(attachments, 22u);
  EXPECT_EQ(dual, 6u);
}

TEST(HandModel, ThumbHasThreeActuatedJointsWithTwoHingeCmc) {
  const HandModel& m = builtin_proto0();
  const auto abd = m.joint_index("thumb_cmc_abd");
  const auto flex = m.joint_index("thumb_cmc_flex");
  const auto mcp = m.joint_index("thumb_mcp");
  ASSERT_TRUE(abd && flex && mcp);
  EXPECT_EQ(m.joint(*abd).kind, JointKind::Hinge);
  EXPECT_EQ(m.joint(*flex).kind, JointKind::Hinge);
  EXPECT_EQ(m.joint(*mcp).kind, JointKind::Rolling);
  EXPECT_NEAR(m.joint(*abd).axis.dot(m.joint(*flex).axis), 0.0, 1e-12);
  for (const char* name : {"thumb_cmc_abd", "thumb_cmc_flex", "thumb_mcp"}) EXPECT_TRUE(m.actuated_index(name));
  EXPECT_FALSE(m.actuated_index("thumb_ip"));
}

TEST(HandModel, FingerDipsAreCoupledToPipAtUnitRatio) {
  const HandModel& m = builtin_proto0();
  for (const char* finger : {"index", "middle", "ring", "pinky"}) {
    const std::string f(finger);
    EXPECT_TRUE(m.actuated_index(f + "_mcp"));
    EXPECT_TRUE(m.actuated_index(f + "_pip"));
    EXPECT_FALSE(m.actuated_index(f + "_dip"));
    const auto& c = m.description().couplings;
    const auto it = std::find_if(c.begin(), c.end(), [&](const CouplingSpec& s) { return s.driven == f + "_dip"; });
    ASSERT_NE(it, c.end());
    EXPECT_EQ(it->driver, f + "_pip");
    EXPECT_EQ(it->ratio, 1.0);
  }
}

TEST(HandModel, LimitsAreOrdered) {
  const HandModel& m = builtin_proto0();
  EXPECT_TRUE((m.q_min().array() < m.q_max().array()).all());
}

TEST(HandModel, LoadReportsRangeViolationNamingTheJoint) {
  json doc = proto0_json();
  doc["joints"][4]["range"] = {1.0, 1.0};
  const std::string name = doc["joints"][4]["name"];
  try {
    load_hand_model(doc.dump());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.violations().size(), 1u);
    EXPECT_EQ(e.violations()[0].invariant, "joint.range");
    EXPECT_NE(e.violations()[0].message.find(name), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(name), std::string::npos);
  }
}

TEST(HandModel, SevenDualMotorsRejected) {
  json doc = proto0_json();
  for (auto& motor : doc["motors"]) {
    if (motor["name"] == "thumb_mcp_flex") {
      motor["attachments"].push_back({{"tendon", "index_mcp_ext"}, {"spool_radius", 0.005}, {"winding", -1}});
    }
  }
  const auto v = violations_of(doc);
  const auto k = keys(v);
  EXPECT_NE(std::find(k.begin(), k.end(), "expect.dual_motors"), k.end());
  EXPECT_THROW(load_hand_model(doc.dump()), ValidationError);
}

TEST(HandModel, CouplingToMissingJointIsOneViolation) {
  json doc = proto0_json();
  doc["couplings"][1]["driven"] = "index_nail";
  const auto v = violations_of(doc);
  ASSERT_EQ(v.size(), 1u) << v[0].message;
  EXPECT_EQ(v[0].invariant, "coupling.joint");
}

TEST(HandModel, AllViolationsAreReported) {
  json doc = proto0_json();
  doc["couplings"][1]["driven"] = "index_nail";
  doc["joints"][5]["range"] = {0.5, -0.5};
  EXPECT_EQ(violations_of(doc).size(), 2u);
}

TEST(HandModel, RollingRadiusMustBePositive) {
  json doc = proto0_json();
  doc["joints"][4]["radius"] = 0.0;
  const auto k = keys(violations_of(doc));
  EXPECT_NE(std::find(k.begin(), k.end(), "joint.radius"), k.end());
}

TEST(HandModel, AxisMustBeUnit) {
  json doc = proto0_json();
  doc["joints"][0]["axis"] = {0.0, 0.0, 1.0 + 1e-6};
  const auto k = keys(violations_of(doc));
  EXPECT_NE(std::find(k.begin(), k.end(), "joint.axis"), k.end());
}

TEST(HandModel, SelfCouplingAndDuplicateDrivenRejected) {
  json doc = proto0_json();
  doc["couplings"][1]["driver"] = doc["couplings"][1]["driven"];
  auto k = keys(violations_of(doc));
  EXPECT_NE(std::find(k.begin(), k.end(), "coupling.self"), k.end());

  doc = proto0_json();
  doc["couplings"].push_back(doc["couplings"][1]);
  k = keys(violations_of(doc));
  EXPECT_NE(std::find(k.begin(), k.end(), "coupling.unique"), k.end());
}

TEST(HandModel, TendonRestLengthAndOrderChecked) {
  json doc = proto0_json();
  doc["tendons"][0]["rest_length"] = 0.0;
  auto k = keys(violations_of(doc));
  EXPECT_NE(std::find(k.begin(), k.end(), "tendon.rest_length"), k.end());

  doc = proto0_json();
  for (auto& t : doc["tendons"])
    if (t["name"] == "index_pip_flex") std::swap(t["terms"][0], t["terms"][2]);
  k = keys(violations_of(doc));
  EXPECT_NE(std::find(k.begin(), k.end(), "tendon.order"), k.end());
}

TEST(HandModel, SpoolRadiusMustBePositive) {
  json doc = proto0_json();
  doc["motors"][3]["attachments"][0]["spool_radius"] = -0.001;
  const auto k = keys(violations_of(doc));
  EXPECT_NE(std::find(k.begin(), k.end(), "motor.spool_radius"), k.end());
}

TEST(HandModel, SyntaxErrorCarriesLine) {
  std::string text(builtin_proto0_text());
  const auto pos = text.find("\"joints\": [");
  ASSERT_NE(pos, std::string::npos);
  text.insert(pos, "!!");
  const auto line = static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, '\n')) + 1;
  try {
    load_hand_model(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), line);
    EXPECT_GT(e.column(), 0u);
  }
}

TEST(HandModel, WrongSchemaRejected) {
  json doc = proto0_json();
  doc["schema"] = "tdk.hand/2";
  EXPECT_THROW(load_hand_model(doc.dump()), ParseError);
}

TEST(HandModel, UnknownKeyRejected) {
  json doc = proto0_json();
  doc["joints"][0]["stiffness"] = 3.0;
  EXPECT_THROW(load_hand_model(doc.dump()), ParseError);
}

TEST(HandModel, SerializeRoundTrip) {
  const HandModel& m = builtin_proto0();
  const std::string text = serialize_hand_model(m);
  const HandModel again = load_hand_model(text);
  EXPECT_EQ(serialize_hand_model(again), text);
  EXPECT_EQ(again.q_min(), m.q_min());
  EXPECT_EQ(again.q_max(), m.q_max());
  EXPECT_EQ(again.num_joints(), m.num_joints());
  ASSERT_EQ(again.tendons().size(), m.tendons().size());
  for (std::size_t t = 0; t < m.tendons().size(); ++t)
    EXPECT_EQ(again.tendons()[t].rest_length, m.tendons()[t].rest_length);
}

TEST(HandModel, LoadsMinimalSingleFingerModel) {
  const json doc = {
      {"schema", "tdk.hand/1"},
      {"antagonistic_tolerance", 0.0015},
      {"name", "one"},
      {"links", {{{"name", "base"}, {"length", 0.05}}, {{"name", "tip"}, {"length", 0.03}}}},
      {"joints",
       {{{"name", "j"}, {"kind", "hinge"}, {"parent", "base"}, {"child", "tip"}, {"axis", {0, 0, 1}},
         {"range", {-1, 1}}}}},
      {"couplings", json::array()},
      {"tendons",
       {{{"name", "t"}, {"rest_length", 0.1}, {"terms", {{{"joint", "j"}, {"kind", "linear"}, {"value", 0.01}, {"sign", 1}}}}}}},
      {"motors", {{{"name", "m"}, {"attachments", {{{"tendon", "t"}, {"spool_radius", 0.005}, {"winding", 1}}}}}}},
      {"fingertips", json::array()},
  };
  const auto v = violations_of(doc);
  // A five-fingertip set is required for the hand environments.
  for (const auto& x : v) EXPECT_EQ(x.invariant.rfind("fingertip", 0), 0u) << x.message;
}

}  // namespace
}  // namespace tdk
