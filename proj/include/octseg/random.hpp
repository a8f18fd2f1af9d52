#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace octseg {

/// SplitMix64 generator. Every random draw in the project comes from one of
/// these so results are reproducible across platforms and compilers.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be nonzero.
  std::uint64_t below(std::uint64_t n) noexcept { return next() % n; }

  /// Standard normal via Box-Muller on two consecutive outputs; the second
  /// variate of each pair is cached and returned by the following call.
  double gaussian() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Deterministically combines two values into a fresh stream seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) noexcept {
  SplitMix64 mix(base ^ (salt * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  mix.next();
  return mix.next();
}

}  // namespace octseg
