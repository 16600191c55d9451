#include "tdk/kinematics.hpp"

#include <cmath>

namespace tdk {

double RigidTransform::rotation_angle() const { return rotation_vector(rotation).norm(); }

Vec3 rotation_vector(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) {
    // 2*atan2(s, w)/s -> 2/w as s -> 0
    return (2.0 / q.w()) * v;
  }
  const double angle = 2.0 * std::atan2(s, q.w());
  return (angle / s) * v;
}

Quat quat_from_rotation_vector(const Vec3& v) {
  const double angle = v.norm();
  if (angle < 1e-12) return Quat(1.0, 0.5 * v.x(), 0.5 * v.y(), 0.5 * v.z()).normalized();
  return Quat(Eigen::AngleAxisd(angle, v / angle));
}

RigidTransform hinge_transform(double q, const Vec3& axis) {
  return {Vec3::Zero(), Quat(Eigen::AngleAxisd(q, axis))};
}

RigidTransform rolling_joint_transform(double q, const JointSpec& geometry) {
  const RigidTransform half = hinge_transform(0.5 * q, geometry.axis);
  const Vec3 offset = geometry.hinge_offset * Vec3::UnitX();
  const RigidTransform to_second{offset, Quat::Identity()};
  const RigidTransform back{-offset, Quat::Identity()};
  return half * to_second * half * back;
}

RigidTransform joint_transform(const HandModel& model, std::size_t j, double q) {
  const JointSpec& js = model.joint(j);
  const RigidTransform origin{model.joint_origin(j), Quat::Identity()};
  if (js.kind == JointKind::Rolling) return origin * rolling_joint_transform(q, js);
  return origin * hinge_transform(q, js.axis);
}

Vec expand_coupled(const Vec& q_act, const HandModel& model) {
  if (static_cast<std::size_t>(q_act.size()) != model.num_actuated())
    throw DimensionError("expand_coupled: expected " + std::to_string(model.num_actuated()) +
                         " actuated coordinates, got " + std::to_string(q_act.size()));
  Vec q(static_cast<Eigen::Index>(model.num_joints()));
  for (std::size_t j = 0; j < model.num_joints(); ++j)
    q[static_cast<Eigen::Index>(j)] =
        model.joint_scale(j) * q_act[static_cast<Eigen::Index>(model.joint_source(j))];
  return q;
}

std::vector<RigidTransform> link_poses(const HandModel& model, const Vec& q_act) {
  const Vec q = expand_coupled(q_act, model);
  std::vector<RigidTransform> poses(model.num_links());
  // Joints are stored parent-before-child, so one pass suffices.
  for (std::size_t j = 0; j < model.num_joints(); ++j) {
    poses[model.joint_child_link(j)] =
        poses[model.joint_parent_link(j)] * joint_transform(model, j, q[static_cast<Eigen::Index>(j)]);
  }
  return poses;
}

FingertipPoses forward_kinematics(const HandModel& model, const Vec& q_act) {
  const auto poses = link_poses(model, q_act);
  FingertipPoses tips;
  for (std::size_t f = 0; f < tips.size(); ++f) {
    const auto& tip = model.fingertips()[f];
    tips[f] = poses[tip.link] * RigidTransform{tip.offset, Quat::Identity()};
  }
  return tips;
}

FingertipSet fingertip_velocities(const HandModel& model, const Vec& q_act, const Vec& qdot_act) {
  if (qdot_act.size() != q_act.size())
    throw DimensionError("fingertip_velocities: q and qdot sizes differ");
  FingertipSet out;
  const auto centre = forward_kinematics(model, q_act);
  for (std::size_t f = 0; f < out.size(); ++f) out[f].pose = centre[f];

  const double h = kFingertipFdStep;
  Vec qp = q_act;
  Vec qm = q_act;
  for (Eigen::Index i = 0; i < q_act.size(); ++i) {
    const double rate = qdot_act[i];
    if (rate == 0.0) continue;
    qp[i] = q_act[i] + h;
    qm[i] = q_act[i] - h;
    const auto plus = forward_kinematics(model, qp);
    const auto minus = forward_kinematics(model, qm);
    qp[i] = q_act[i];
    qm[i] = q_act[i];
    for (std::size_t f = 0; f < out.size(); ++f) {
      const Vec3 dp = (plus[f].translation - minus[f].translation) / (2.0 * h);
      const Vec3 dw = rotation_vector(plus[f].rotation * minus[f].rotation.conjugate()) / (2.0 * h);
      out[f].linear_velocity += rate * dp;
      out[f].angular_velocity += rate * dw;
    }
  }
  return out;
}

}  // namespace tdk
