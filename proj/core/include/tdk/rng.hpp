#pragma once

#include <cstdint>
#include <limits>

namespace tdk {

std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based generator: the n-th draw of stream (seed, a, b) is a pure
/// function of (seed, a, b, n). Satisfies UniformRandomBitGenerator, so it
/// plugs into <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng() : CounterRng(0, 0, 0) {}
  CounterRng(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform in [lo, hi); returns lo when lo == hi.
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tdk
