#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace isqn {

/// Seeded random source with platform-independent derived distributions.
///
/// Streams are split by name from a root seed so that adding a consumer never
/// shifts the draws seen by another one.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(mix(seed)) {}

  static Rng stream(std::uint64_t root, std::string_view name);

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::mt19937_64 engine_;
};

}  // namespace isqn
