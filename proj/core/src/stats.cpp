#include "tdk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tdk {

Axis parse_axis(std::string_view s) {
  if (s == "x") return Axis::X;
  if (s == "y") return Axis::Y;
  if (s == "z") return Axis::Z;
  throw Error("unknown axis '" + std::string(s) + "' (expected x, y or z)");
}

Direction parse_direction(std::string_view s) {
  if (s == "pos") return Direction::Pos;
  if (s == "neg") return Direction::Neg;
  throw Error("unknown direction '" + std::string(s) + "' (expected pos or neg)");
}

std::string_view to_string(Axis a) {
  switch (a) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: return "z";
  }
  return "?";
}

std::string_view to_string(Direction d) { return d == Direction::Pos ? "pos" : "neg"; }

ExponentialSmoother::ExponentialSmoother(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("exponential smoothing: alpha must be in (0, 1]");
}

Vec ExponentialSmoother::update(const Vec& x) {
  if (!state_ || state_->size() != x.size()) {
    state_ = x;
  } else {
    *state_ = alpha_ * x + (1.0 - alpha_) * *state_;
  }
  return *state_;
}

std::vector<double> exponential_smoothing(std::span<const double> series, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("exponential smoothing: alpha must be in (0, 1]");
  if (series.empty()) throw Error("exponential smoothing: empty series");
  std::vector<double> out(series.size());
  out[0] = series[0];
  for (std::size_t t = 1; t < series.size(); ++t) out[t] = alpha * series[t] + (1.0 - alpha) * out[t - 1];
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

RotationStats rotation_stats(const CsvTable& log, Axis axis, Direction direction, double alpha,
                             const Quat& hand_from_world) {
  RotationStats st;
  st.axis = axis;
  st.direction = direction;
  st.alpha = alpha;
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("rotation_stats: alpha must be in (0, 1]");

  const std::size_t cx = log.require_column("omega_x");
  const std::size_t cy = log.require_column("omega_y");
  const std::size_t cz = log.require_column("omega_z");
  st.samples.reserve(log.rows.size());
  for (const auto& row : log.rows) {
    const Vec3 w = hand_from_world * Vec3(row.at(cx), row.at(cy), row.at(cz));
    st.samples.push_back(w[static_cast<int>(axis)]);
  }
  if (st.samples.empty()) return st;

  st.smoothed = exponential_smoothing(st.samples, alpha);
  const auto n = static_cast<double>(st.smoothed.size());
  st.mean = std::accumulate(st.smoothed.begin(), st.smoothed.end(), 0.0) / n;
  st.median = percentile(st.smoothed, 50.0);
  st.p05 = percentile(st.smoothed, 5.0);
  st.p25 = percentile(st.smoothed, 25.0);
  st.p75 = percentile(st.smoothed, 75.0);
  st.p95 = percentile(st.smoothed, 95.0);
  const double s = direction_sign(direction);
  st.mean_target = target_angular_velocity(st.mean, s);
  const auto on_plateau = [s](double w) { return rotation_term(w, s) == kRotationPlateau; };
  st.in_band_fraction = static_cast<double>(std::ranges::count_if(st.smoothed, on_plateau)) / n;
  st.raw_in_band_fraction = static_cast<double>(std::ranges::count_if(st.samples, on_plateau)) / n;
  return st;
}

}  // namespace tdk
