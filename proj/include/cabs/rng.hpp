#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cabs {

// All randomness in the library goes through this wrapper. The distributions
// are built from raw mt19937_64 words instead of <random> distribution
// objects, whose output sequences are implementation-defined; a fixed seed
// must reproduce the same stream on any toolchain so that committed golden
// trajectories and Monte-Carlo seeds stay valid.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform on (0, 1]; never returns 0 so it is safe under log().
  double uniform() {
    return static_cast<double>((bits() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform on [0, 1).
  double uniform_half_open() {
    return static_cast<double>(bits() >> 11) * 0x1.0p-53;
  }

  double uniform_in(double lo, double hi) {
    return lo + (hi - lo) * uniform_half_open();
  }

  // Standard normal via Box-Muller. The sine partner is discarded; one state
  // word per call keeps replay trivial.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform_half_open();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t t = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = bits();
      if (r >= t) return (r - t) % n;
    }
  }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 mix step; used to derive independent stream seeds from one
// experiment seed without correlated low bits.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace cabs
