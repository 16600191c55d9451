#pragma once

#include <cstdint>
#include <vector>

#include "tdk/types.hpp"

namespace tdk {

struct VecStepResult {
  Vec reward;                  // one per env
  std::vector<std::uint8_t> done;
  std::vector<std::uint8_t> fault;
  Vec omega_target;            // angular velocity along the target direction
};

/// A batch of independent environments. Observations and actions are stored
/// one env per column.
class VecEnv {
 public:
  virtual ~VecEnv() = default;

  virtual std::size_t num_envs() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::size_t actor_obs_dim() const = 0;
  virtual std::size_t critic_obs_dim() const = 0;

  virtual void reset(std::uint64_t seed) = 0;
  virtual const Mat& actor_obs() const = 0;
  virtual const Mat& critic_obs() const = 0;
  /// Done envs are reset internally; the observations then belong to the new episode.
  virtual void step(const Mat& actions, VecStepResult& out) = 0;
};

}  // namespace tdk
