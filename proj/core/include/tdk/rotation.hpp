#pragma once

// Target-rotation conventions shared by the environment reward and the
// evaluation statistics.

#include <algorithm>
#include <string>
#include <string_view>

#include "tdk/types.hpp"

namespace tdk {

enum class Axis { X = 0, Y = 1, Z = 2 };
enum class Direction { Pos, Neg };

Axis parse_axis(std::string_view s);
Direction parse_direction(std::string_view s);
std::string_view to_string(Axis a);
std::string_view to_string(Direction d);

/// Sign s of the rotation term: +1 rewards rotation towards the negative axis
/// direction, -1 towards the positive one.
constexpr double direction_sign(Direction d) { return d == Direction::Neg ? 1.0 : -1.0; }

/// min(-s*w + 1, 2, s*w + 4); equals 2 on the plateau and falls off linearly.
constexpr double rotation_term(double omega, double s) {
  return std::min({-s * omega + 1.0, 2.0, s * omega + 4.0});
}

inline constexpr double kRotationPlateau = 2.0;

/// Angular velocity component along the target direction (positive = correct sense).
constexpr double target_angular_velocity(double omega, double s) { return -s * omega; }

}  // namespace tdk
