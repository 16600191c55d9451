#include "tdk/ball_surrogate.hpp"

#include <algorithm>
#include <cmath>

#include "tdk/kinematics.hpp"

namespace tdk {

int ContactState::count() const {
  return static_cast<int>(std::count(touching.begin(), touching.end(), true));
}

BallParams make_ball_params(const BallConfig& config, const DomainParams& params) {
  return BallParams{
      config.radius * params.object_scale,
      config.contact_margin,
      config.contact_stiffness,
      config.center_lag * params.object_mass,
      config.gravity,
      config.free_fall_substeps,
      std::clamp(config.friction * params.friction, 0.0, 1.0),
      config.fit_regularization,
  };
}

Vec3 cradle_center(const TipPoints& tips, const TipMask& mask, double radius) {
  Vec3 centroid = Vec3::Zero();
  int n = 0;
  for (std::size_t i = 0; i < tips.size(); ++i) {
    if (!mask[i]) continue;
    centroid += tips[i];
    ++n;
  }
  if (n == 0) throw Error("cradle_center: no supporting fingertips");
  centroid /= n;
  double spread = 0.0;
  for (std::size_t i = 0; i < tips.size(); ++i) {
    if (!mask[i]) continue;
    spread += (tips[i] - centroid).head<2>().squaredNorm();
  }
  spread /= n;
  const double h = std::sqrt(std::max(radius * radius - spread, 0.25 * radius * radius));
  return centroid + Vec3(0.0, 0.0, h);
}

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace

Vec3 fit_rotation(const TipPoints& r, const TipPoints& u, const TipMask& mask, double regularization) {
  // w x r = -[r]x w, so the normal equations are (sum A^T A + lambda I) w = sum A^T u with A = -[r]x.
  Mat3 lhs = regularization * Mat3::Identity();
  Vec3 rhs = Vec3::Zero();
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!mask[i]) continue;
    const Mat3 A = -skew(r[i]);
    lhs += A.transpose() * A;
    rhs += A.transpose() * u[i];
  }
  return lhs.ldlt().solve(rhs);
}

void update_contacts(const BallState& ball, ContactState& contacts, const TipPoints& tips,
                     const BallParams& params) {
  const double reach = params.radius + params.contact_margin;
  for (std::size_t i = 0; i < tips.size(); ++i) {
    const Vec3 d = tips[i] - ball.position;
    const double dist = d.norm();
    contacts.touching[i] = dist < reach;
    contacts.force[i].setZero();
    if (contacts.touching[i] && dist > 1e-12)
      contacts.force[i] = params.contact_stiffness * (reach - dist) * (d / dist);
  }
}

void ball_substep(BallState& ball, ContactState& contacts, const TipPoints& tips,
                  const TipPoints& tip_velocities, const BallParams& params, double dt) {
  update_contacts(ball, contacts, tips, params);
  const int n = contacts.count();
  contacts.low_contact_substeps = n < 2 ? contacts.low_contact_substeps + 1 : 0;
  contacts.free_fall = contacts.low_contact_substeps > params.free_fall_substeps;

  const Vec3 before = ball.position;
  if (contacts.free_fall) {
    ball.linear_velocity.z() -= params.gravity * dt;
    ball.position += ball.linear_velocity * dt;
  } else {
    if (n >= 2) {
      const Vec3 target = cradle_center(tips, contacts.touching, ball.radius);
      const double gain = std::min(1.0, dt / std::max(params.lag, 1e-9));
      ball.position += gain * (target - ball.position);
    }
    ball.linear_velocity = (ball.position - before) / dt;
  }

  if (n >= 1) {
    TipPoints r;
    TipPoints u;
    for (std::size_t i = 0; i < tips.size(); ++i) {
      r[i] = tips[i] - before;
      const Vec3 normal = r[i].normalized();
      u[i] = tip_velocities[i] - tip_velocities[i].dot(normal) * normal;
    }
    ball.angular_velocity = params.friction * fit_rotation(r, u, contacts.touching, params.regularization);
  }

  ball.orientation = (quat_from_rotation_vector(ball.angular_velocity * dt) * ball.orientation).normalized();
}

}  // namespace tdk
