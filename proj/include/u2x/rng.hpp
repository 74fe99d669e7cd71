#pragma once

// Counter-based random streams: trial t of a run seeded with S draws from a
// stream that is a pure function of (S, t), so estimates do not depend on
// how trials are scheduled across threads.

#include <cmath>
#include <cstdint>
#include <numbers>

#include "u2x/model.hpp"

namespace u2x {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct SeedPolicy {
  std::uint64_t masterSeed = 0x5EED;
};

/// Draw i of trial t is mix64(key(t) + (i + 1) * golden), i.e. a SplitMix64
/// sequence whose starting point is hashed from (masterSeed, t).
class TrialStream {
 public:
  TrialStream(std::uint64_t masterSeed, std::uint64_t trial)
      : state_(mix64(masterSeed ^ mix64(trial * kGoldenGamma + 0xD1B54A32D192ED03ULL))) {}

  std::uint64_t nextU64() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(nextU64() >> 11) + 0.5) * 0x1.0p-53; }

  double standardNormal() {
    // Box-Muller, one output per pair; keeps the draw count per call fixed.
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

/// Gamma(shape, scale 1) by Marsaglia-Tsang; shapes below one use the
/// u^(1/shape) boost.
inline double sampleStandardGamma(double shape, TrialStream& s) {
  if (!(shape > 0.0)) throw DomainError("sampleStandardGamma: shape must be positive");
  if (shape == 1.0) return -std::log(s.uniform());
  if (shape < 1.0) {
    const double g = sampleStandardGamma(shape + 1.0, s);
    return g * std::pow(s.uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = s.standardNormal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = s.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace u2x
