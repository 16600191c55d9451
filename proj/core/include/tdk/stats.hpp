#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tdk/csv.hpp"
#include "tdk/rotation.hpp"
#include "tdk/types.hpp"

namespace tdk {

/// y_0 = x_0; y_t = alpha x_t + (1 - alpha) y_{t-1}, element-wise.
class ExponentialSmoother {
 public:
  explicit ExponentialSmoother(double alpha);
  Vec update(const Vec& x);
  void reset() { state_.reset(); }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
  std::optional<Vec> state_;
};

/// Throws on an empty series or alpha outside (0, 1].
std::vector<double> exponential_smoothing(std::span<const double> series, double alpha);

inline constexpr double kDefaultEvalSmoothing = 0.3;

/// Linear interpolation between order statistics; p in [0, 100].
double percentile(std::vector<double> values, double p);

struct RotationStats {
  Axis axis = Axis::Y;
  Direction direction = Direction::Neg;
  double alpha = kDefaultEvalSmoothing;
  std::vector<double> samples;   // hand frame
  std::vector<double> smoothed;  // same length as samples
  double mean = 0.0;
  double median = 0.0;
  double p05 = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
  double p95 = 0.0;
  double mean_target = 0.0;       // mean along the target direction
  double in_band_fraction = 0.0;      // share of smoothed samples on the reward plateau
  double raw_in_band_fraction = 0.0;  // same over the unsmoothed samples
};

/// Statistics of the object angular velocity about `axis` from a trajectory
/// log with omega_x/omega_y/omega_z columns. `hand_from_world` rotates the
/// logged vectors into the hand frame (identity for simulator logs).
RotationStats rotation_stats(const CsvTable& log, Axis axis, Direction direction,
                             double alpha = kDefaultEvalSmoothing,
                             const Quat& hand_from_world = Quat::Identity());

}  // namespace tdk
