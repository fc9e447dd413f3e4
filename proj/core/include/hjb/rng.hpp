#pragma once

#include <cmath>
#include <cstdint>

namespace hjb {

// Keyed pseudo-random stream: splitmix64 over a counter derived from
// (seed, stream).  Deterministic regardless of task scheduling, so Monte
// Carlo reductions do not depend on evaluation order.
class KeyedStream {
 public:
  KeyedStream(std::uint64_t seed, std::uint64_t stream)
      : state_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform in (0, 1), never exactly 0 or 1.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; fully specified, no library dependence.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hjb
