#include "tdk/loopback_driver.hpp"

namespace tdk {

LoopbackDriver::LoopbackDriver(std::size_t motors, Options options) : options_(std::move(options)) {
  const auto m = static_cast<Eigen::Index>(motors);
  if (options_.initial_theta.size() == 0) options_.initial_theta = Vec::Zero(m);
  if (options_.initial_theta.size() != m) throw DimensionError("LoopbackDriver: initial_theta size mismatch");
  if (!(options_.dt > 0.0)) throw Error("LoopbackDriver: dt must be > 0");
  if (!(options_.tracking > 0.0 && options_.tracking <= 1.0)) throw Error("LoopbackDriver: tracking must be in (0, 1]");
  theta_ = options_.initial_theta;
  target_ = theta_;
}

std::optional<MotorState> LoopbackDriver::read_motor_state() {
  std::lock_guard lock(mu_);
  if (reads_left_) {
    if (*reads_left_ == 0) silent_ = true;
    else --*reads_left_;
  }
  if (silent_) return std::nullopt;
  const Vec before = theta_;
  theta_ += options_.tracking * (target_ - theta_);
  time_ += options_.dt;
  return MotorState{theta_, (theta_ - before) / options_.dt, time_};
}

bool LoopbackDriver::write_motor_targets(const Vec& theta_des) {
  std::lock_guard lock(mu_);
  if (silent_) return false;
  if (theta_des.size() != theta_.size()) throw DimensionError("LoopbackDriver: target size mismatch");
  target_ = theta_des;
  ++writes_;
  return true;
}

void LoopbackDriver::set_silent(bool silent) {
  std::lock_guard lock(mu_);
  silent_ = silent;
  reads_left_.reset();
}

void LoopbackDriver::silence_after(std::size_t reads) {
  std::lock_guard lock(mu_);
  reads_left_ = reads;
}

Vec LoopbackDriver::theta() const {
  std::lock_guard lock(mu_);
  return theta_;
}

Vec LoopbackDriver::last_target() const {
  std::lock_guard lock(mu_);
  return target_;
}

std::size_t LoopbackDriver::writes() const {
  std::lock_guard lock(mu_);
  return writes_;
}

}  // namespace tdk
