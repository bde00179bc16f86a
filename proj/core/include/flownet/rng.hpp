#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace flownet {

/// Counter-based generator: every draw is a pure function of (seed, stream,
/// index), so results never depend on evaluation order or thread schedule.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t stream, std::uint64_t index) const {
    return mix(mix(seed_ ^ mix(stream + 0x632be59bd9b4e019ULL)) + index);
  }

  /// Uniform in [0, 1).
  double uniform(std::uint64_t stream, std::uint64_t index) const {
    return static_cast<double>(bits(stream, index) >> 11) * 0x1.0p-53;
  }

  /// Uniform in [0, n).
  std::uint64_t below(std::uint64_t n, std::uint64_t stream, std::uint64_t index) const {
    return static_cast<std::uint64_t>(uniform(stream, index) * static_cast<double>(n));
  }

  /// Standard normal by Box-Muller on two independent uniforms.
  double normal(std::uint64_t stream, std::uint64_t index) const {
    const double u1 = 1.0 - uniform(stream, 2 * index);
    const double u2 = uniform(stream, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace flownet
