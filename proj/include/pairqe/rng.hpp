#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace pairqe::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Every draw is a pure function of (seed, counter, salt): results do not
// depend on evaluation order, parallel scheduling, or the platform's
// standard-library distributions.
inline std::uint64_t hash3(std::uint64_t seed, std::uint64_t counter, std::uint64_t salt) {
  return splitmix64(splitmix64(splitmix64(seed) ^ counter) ^ salt);
}

inline double to_unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, std::uint64_t counter, std::uint64_t salt) {
  return to_unit_interval(hash3(seed, counter, salt));
}

// Independent substream seed for a derived unit of work (power point, chunk).
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ (0xd1342543de82ef95ULL + index));
}

// Poisson count by CDF inversion of a single uniform; exact for the small
// means used here (events per gate << 1).
inline int poisson_from_uniform(double u, double mu) {
  if (mu <= 0.0) return 0;
  double p = std::exp(-mu);
  double cdf = p;
  int k = 0;
  while (u >= cdf && k < 1024) {
    ++k;
    p *= mu / k;
    cdf += p;
  }
  return k;
}

// Small sequential stream for non-hot sampling (resampling oracles).
struct CounterStream {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  explicit CounterStream(std::uint64_t s) : seed(s) {}

  double next_uniform() { return uniform(seed, counter++, 0x5eedULL); }

  // Box-Muller; positive uniform guards the log.
  double next_normal() {
    double u1 = next_uniform();
    while (u1 <= 0.0) u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

}  // namespace pairqe::rng
