#pragma once

// Portable seeded randomness. std::mt19937_64 has a fully specified output
// sequence; the distributions of <random> do not, so uniform and Gaussian
// variates are derived here from raw 64-bit words.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rgn/scalar.hpp"

namespace rgn {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for a (seed, stream id) pair via SplitMix64 mixing.
  static Rng stream(std::uint64_t seed, std::uint64_t id) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (id + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return Rng(z ^ (z >> 31));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Marsaglia polar method; the second variate is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  template <Real T>
  std::vector<T> gaussian_vector(std::size_t n) {
    std::vector<T> out(n);
    for (auto& x : out) x = T(gaussian());
    return out;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rgn
