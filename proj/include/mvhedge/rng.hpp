#ifndef MVHEDGE_RNG_HPP
#define MVHEDGE_RNG_HPP

// Reproducible random numbers.
//
// Every random quantity in the library comes from this file so that seeded runs
// are bit-identical across platforms and implementations:
//
//   * SplitMix64 (Steele, Lea, Flood) expands a 64-bit seed into generator state.
//   * Xoshiro256** (Blackman, Vigna) is the stream generator.
//   * Substream k of seed s is seeded with SplitMix64(mix64(s ^ mix64(k))), where
//     mix64 is the SplitMix64 output function applied to x + 0x9E3779B97F4A7C15.
//   * Uniforms on [0,1) are (next() >> 11) * 2^-53; open (0,1) uniforms add 0.5
//     before scaling.
//   * Normals use the Box-Muller pair (both variates are used, cosine first).
//   * Poisson variates are drawn by inversion of the CDF with one uniform.
//
// The standard <random> distributions are not used because their algorithms
// are implementation-defined.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mvhedge::rng {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t x) {
  x += kGoldenGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    std::uint64_t z = (state_ += kGoldenGamma);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

class Xoshiro256StarStar {
 public:
  explicit constexpr Xoshiro256StarStar(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& s : s_) s = sm.next();
  }

  /// Independent stream `index` derived from `seed`.
  static constexpr Xoshiro256StarStar substream(std::uint64_t seed, std::uint64_t index) {
    return Xoshiro256StarStar(mix64(seed ^ mix64(index)));
  }

  constexpr std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  /// Poisson(mean) by CDF inversion; intended for small means.
  int poisson(double mean) {
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    int k = 0;
    while (u > cdf && p > 0.0) {
      ++k;
      p *= mean / k;
      cdf += p;
    }
    return k;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mvhedge::rng

#endif  // MVHEDGE_RNG_HPP
