#pragma once

#include <cstdint>
#include <random>

#include "rearrange/math2d.hpp"

namespace rearrange {

/// Seeded random stream. The engine is std::mt19937_64 but all value mappings
/// are done here so that draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Derives an independent stream, e.g. per trial or per role.
  static Rng derive(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    std::seed_seq seq{base, stream, index};
    std::mt19937_64 engine(seq);
    Rng out;
    out.engine_ = engine;
    return out;
  }

  double uniform01() {
    // 53-bit mantissa draw in [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform angle in (-pi, pi].
  double angle() { return wrap_angle(uniform(-kPi, kPi)); }

  std::uint64_t uniform_index(std::uint64_t n) {
    // modulo bias is negligible for the small n used here
    return engine_() % n;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rearrange
