#include "tdk/rng.hpp"

#include <random>

namespace tdk {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b)
    : key_(splitmix64(seed ^ splitmix64(stream_a ^ splitmix64(stream_b + 0x632be59bd9b4e019ULL)))) {}

CounterRng::result_type CounterRng::operator()() {
  return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
}

double CounterRng::uniform(double lo, double hi) {
  const double u = static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double CounterRng::normal(double mean, double stddev) {
  // A fresh distribution per draw keeps the stream a function of the counter alone.
  std::normal_distribution<double> dist(mean, stddev);
  return dist(*this);
}

}  // namespace tdk
