#pragma once

// Static description of a tendon-driven hand: joints, couplings, tendon routes,
// motors, links and fingertip frames.
//
// A HandDescription is the raw, name-referenced document as it appears in the
// config file. A HandModel is a validated, index-resolved, immutable view of
// one; it is safe to share across threads.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tdk/types.hpp"

namespace tdk {

enum class JointKind { Rolling, Hinge };
enum class TermKind { Linear, Rolling };

std::string_view to_string(JointKind kind);
std::string_view to_string(TermKind kind);

struct LinkSpec {
  std::string name;
  double length = 0.0;  // m, along the link's local x axis
};

/// A joint between `parent_link` and `child_link`.
///
/// Hinge joints rotate about `axis` through `origin`. Rolling joints are the
/// pair of virtual hinges described in kinematics.hpp; `axis` is the shared
/// flexion axis (must be orthogonal to local x) and the two hinge axes are
/// `hinge_offset` apart along local x.
struct JointSpec {
  std::string name;
  JointKind kind = JointKind::Rolling;
  std::string parent_link;
  std::string child_link;
  std::optional<Vec3> origin;  // defaults to (parent length, 0, 0)
  Vec3 axis = Vec3::UnitZ();
  double radius = 0.0;        // rolling only: contact surface radius (m)
  double hinge_offset = 0.0;  // rolling only: distance between virtual hinges (m)
  double q_min = 0.0;
  double q_max = 0.0;
};

struct CouplingSpec {
  std::string driver;
  std::string driven;
  double ratio = 1.0;
};

struct RouteTerm {
  std::string joint;
  TermKind kind = TermKind::Linear;
  double value = 0.0;  // Linear: moment arm m (m/rad). Rolling: effective radius (m).
  int sign = 1;        // +1 flexor, -1 extensor
};

struct TendonRoute {
  std::string name;
  std::vector<RouteTerm> terms;
  double rest_length = 0.0;
};

struct Attachment {
  std::string tendon;
  double spool_radius = 0.0;
  int winding = 1;
};

struct MotorSpec {
  std::string name;
  std::vector<Attachment> attachments;  // first entry is the primary (measured) one
};

struct FingertipSpec {
  std::string name;
  std::string link;
  std::optional<Vec3> offset;  // defaults to (link length, 0, 0)
  bool cradle = false;         // supports the object at reset
};

/// Optional structural expectations checked by the validator.
struct ModelExpectations {
  std::optional<std::size_t> joints;
  std::optional<std::size_t> actuated;
  std::optional<std::size_t> motors;
  std::optional<std::size_t> dual_motors;
};

struct HandDescription {
  std::string name;
  double antagonistic_tolerance = 0.0;  // m
  std::vector<LinkSpec> links;
  std::vector<JointSpec> joints;
  std::vector<CouplingSpec> couplings;
  std::vector<TendonRoute> tendons;
  std::vector<MotorSpec> motors;
  std::vector<FingertipSpec> fingertips;
  ModelExpectations expect;
};

struct Violation {
  std::string invariant;  // short machine-readable key, e.g. "joint.range"
  std::string message;
};

/// Every violated invariant of `desc`, in document order.
std::vector<Violation> validate_hand_model(const HandDescription& desc);

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

inline constexpr std::array<std::string_view, 5> kFingerOrder = {"thumb", "index", "middle",
                                                                  "ring", "pinky"};
inline constexpr std::string_view kHandSchema = "tdk.hand/1";

class HandModel {
 public:
  struct ResolvedTerm {
    std::size_t joint;     // index into joints
    std::size_t actuated;  // actuated coordinate that drives this joint
    double scale;          // q_joint = scale * q_act[actuated]
    TermKind kind;
    double value;
    int sign;
  };
  struct ResolvedTendon {
    std::vector<ResolvedTerm> terms;
    double rest_length;
  };
  struct ResolvedAttachment {
    std::size_t tendon;
    double spool_radius;
    int winding;
  };
  struct ResolvedMotor {
    ResolvedAttachment primary;
    std::optional<ResolvedAttachment> secondary;
  };
  struct ResolvedFingertip {
    std::size_t link;
    Vec3 offset;
    bool cradle;
  };

  /// Validates and resolves; throws ValidationError listing every violation.
  static HandModel from_description(HandDescription desc);

  const HandDescription& description() const { return desc_; }

  std::size_t num_joints() const { return desc_.joints.size(); }
  std::size_t num_actuated() const { return actuated_.size(); }
  std::size_t num_motors() const { return motors_.size(); }
  std::size_t num_links() const { return desc_.links.size(); }

  const JointSpec& joint(std::size_t j) const { return desc_.joints[j]; }
  std::optional<std::size_t> joint_index(std::string_view name) const;

  /// Joint indices of the actuated coordinates, in joint order.
  const std::vector<std::size_t>& actuated_joints() const { return actuated_; }
  /// Actuated coordinate index of a named actuated joint.
  std::optional<std::size_t> actuated_index(std::string_view name) const;
  /// For each joint: the actuated coordinate it follows and the coupling scale.
  std::size_t joint_source(std::size_t j) const { return joint_source_[j]; }
  double joint_scale(std::size_t j) const { return joint_scale_[j]; }

  std::size_t joint_parent_link(std::size_t j) const { return joint_parent_[j]; }
  std::size_t joint_child_link(std::size_t j) const { return joint_child_[j]; }
  const Vec3& joint_origin(std::size_t j) const { return joint_origin_[j]; }

  const std::vector<ResolvedTendon>& tendons() const { return tendons_; }
  const std::vector<ResolvedMotor>& motors() const { return motors_; }
  const std::vector<ResolvedFingertip>& fingertips() const { return fingertips_; }

  /// Limits of the actuated coordinates.
  const Vec& q_min() const { return q_min_; }
  const Vec& q_max() const { return q_max_; }

 private:
  HandModel() = default;

  HandDescription desc_;
  std::vector<std::size_t> actuated_;
  std::vector<std::size_t> joint_source_;
  std::vector<double> joint_scale_;
  std::vector<std::size_t> joint_parent_;
  std::vector<std::size_t> joint_child_;
  std::vector<Vec3> joint_origin_;
  std::vector<ResolvedTendon> tendons_;
  std::vector<ResolvedMotor> motors_;
  std::vector<ResolvedFingertip> fingertips_;
  Vec q_min_;
  Vec q_max_;
};

inline std::vector<Violation> validate_hand_model(const HandModel& model) {
  return validate_hand_model(model.description());
}

/// Parses a hand config document (schema "tdk.hand/1", JSON syntax).
/// Throws ParseError (with line/column) or ValidationError.
HandModel load_hand_model(std::string_view config_text);
HandModel load_hand_model_file(const std::string& path);

/// Parses without validating.
HandDescription parse_hand_description(std::string_view config_text);

/// Canonical config text; load_hand_model(serialize_hand_model(m)) reproduces m.
std::string serialize_hand_model(const HandDescription& desc);
inline std::string serialize_hand_model(const HandModel& model) {
  return serialize_hand_model(model.description());
}

/// The built-in Proto-0 hand: 16 joints, 11 actuated DoF, 16 motors.
const HandModel& builtin_proto0();
std::string_view builtin_proto0_text();

}  // namespace tdk
