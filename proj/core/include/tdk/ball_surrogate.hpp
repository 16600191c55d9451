#pragma once

// Cheap ball-on-fingertips surrogate.
//
// A fingertip is in contact when it lies within radius + margin of the ball
// center. While at least two fingertips touch the ball, the center tracks the
// cradle point above the contacting tips with a first-order lag and the
// angular velocity is the regularized least-squares rigid rotation that best
// explains the contacting tips' tangential velocities, scaled by friction.
// After more than `free_fall_substeps` consecutive substeps with fewer than
// two contacts the ball falls under gravity until caught again.

#include <array>

#include "tdk/env_config.hpp"
#include "tdk/types.hpp"

namespace tdk {

struct BallState {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  double radius = 0.035;
};

struct ContactState {
  std::array<bool, 5> touching{};
  std::array<Vec3, 5> force{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  int low_contact_substeps = 0;
  bool free_fall = false;

  int count() const;
};

struct BallParams {
  double radius;
  double contact_margin;
  double contact_stiffness;
  double lag;
  double gravity;
  int free_fall_substeps;
  double friction;
  double regularization;
};

BallParams make_ball_params(const BallConfig& config, const DomainParams& params);

using TipPoints = std::array<Vec3, 5>;
using TipMask = std::array<bool, 5>;

/// Point a ball of `radius` settles at on the tips selected by `mask`:
/// their centroid raised along +z by sqrt(R^2 - mean squared horizontal
/// spread), never less than R/2.
Vec3 cradle_center(const TipPoints& tips, const TipMask& mask, double radius);

/// Regularized least-squares w minimizing sum |w x r_i - u_i|^2 over the
/// masked entries.
Vec3 fit_rotation(const TipPoints& r, const TipPoints& u, const TipMask& mask, double regularization);

/// Recomputes the contact set and fingertip forces for the current geometry.
void update_contacts(const BallState& ball, ContactState& contacts, const TipPoints& tips,
                     const BallParams& params);

/// Advances the ball by one substep given fingertip positions and velocities.
void ball_substep(BallState& ball, ContactState& contacts, const TipPoints& tips,
                  const TipPoints& tip_velocities, const BallParams& params, double dt);

}  // namespace tdk
