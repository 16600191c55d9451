#pragma once

#include <mutex>

#include "tdk/handmodel.hpp"
#include "tdk/runtime.hpp"

namespace tdk {

/// Simulated motor bus: every read advances a virtual clock by `dt` and moves
/// the motor angles a fraction `tracking` of the way to the last targets.
/// Thread-safe, so a bridge server can share it.
class LoopbackDriver final : public DriverInterface {
 public:
  struct Options {
    double dt = 0.05;
    double tracking = 1.0;  // 1 = reach the target within one read
    Vec initial_theta;      // empty = zeros
  };

  LoopbackDriver(std::size_t motors, Options options);
  explicit LoopbackDriver(std::size_t motors) : LoopbackDriver(motors, Options{}) {}

  std::optional<MotorState> read_motor_state() override;
  bool write_motor_targets(const Vec& theta_des) override;

  /// While silent, reads time out and writes are not acknowledged.
  void set_silent(bool silent);
  /// Go silent after `reads` more successful reads.
  void silence_after(std::size_t reads);

  Vec theta() const;
  Vec last_target() const;
  std::size_t writes() const;

 private:
  mutable std::mutex mu_;
  Options options_;
  Vec theta_;
  Vec target_;
  double time_ = 0.0;
  bool silent_ = false;
  std::optional<std::size_t> reads_left_;
  std::size_t writes_ = 0;
};

}  // namespace tdk
