#pragma once

// Forward kinematics of the finger chains.
//
// A rolling contact joint is modelled as two virtual hinges about parallel
// axes, separated by the joint's hinge offset along local x, each turning by
// half the joint angle. The joint frame coincides with the child link frame
// at q = 0, so the transform is the identity there:
//
//   T(q) = R(q/2) * Trans(d x) * R(q/2) * Trans(-d x)
//
// Net rotation is R(q); the child origin sweeps an arc about the first hinge.

#include <array>
#include <vector>

#include "tdk/handmodel.hpp"
#include "tdk/types.hpp"

namespace tdk {

struct RigidTransform {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();

  static RigidTransform identity() { return {}; }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return {translation + rotation * rhs.translation, (rotation * rhs.rotation).normalized()};
  }
  Vec3 apply(const Vec3& p) const { return translation + rotation * p; }
  RigidTransform inverse() const {
    const Quat inv = rotation.conjugate();
    return {-(inv * translation), inv};
  }
  /// Rotation angle in [0, pi].
  double rotation_angle() const;
};

/// Shortest-arc rotation vector (axis * angle) of a unit quaternion.
Vec3 rotation_vector(const Quat& q);
/// Inverse of rotation_vector.
Quat quat_from_rotation_vector(const Vec3& v);

struct FingertipState {
  RigidTransform pose;
  Vec3 linear_velocity = Vec3::Zero();   // m/s, world frame
  Vec3 angular_velocity = Vec3::Zero();  // rad/s, world frame
};

/// Thumb, index, middle, ring, pinky.
using FingertipSet = std::array<FingertipState, 5>;
using FingertipPoses = std::array<RigidTransform, 5>;

RigidTransform hinge_transform(double q, const Vec3& axis);
RigidTransform rolling_joint_transform(double q, const JointSpec& geometry);
/// Local transform of joint `j` including its origin offset in the parent link.
RigidTransform joint_transform(const HandModel& model, std::size_t j, double q);

/// Full joint vector from the actuated coordinates; driven joints follow
/// their driver scaled by the coupling ratio.
Vec expand_coupled(const Vec& q_act, const HandModel& model);

/// World poses of every link (index = link index; link 0 is the root).
std::vector<RigidTransform> link_poses(const HandModel& model, const Vec& q_act);

FingertipPoses forward_kinematics(const HandModel& model, const Vec& q_act);

/// Step used by fingertip_velocities for its central differences.
inline constexpr double kFingertipFdStep = 1e-5;

/// Poses plus velocities obtained by central differencing forward_kinematics
/// per actuated coordinate and contracting with qdot_act.
FingertipSet fingertip_velocities(const HandModel& model, const Vec& q_act, const Vec& qdot_act);

}  // namespace tdk
