#pragma once

// Incomplete gamma family and E1 in double precision.
//
// Conventions:
//   lowerIncGamma(s, x)        = gamma(s, x)  = int_0^x t^(s-1) e^-t dt
//   upperIncGammaScaled(s, x)  = e^x Gamma(s, x)
//   negOrderWeighted(j, x)     = x^j e^x Gamma(-j, x)   (j = 0, 1, 2, ...)
//
// The weighted negative-order form stays O(1) for every (j, x) and is what
// the ergodic-rate series consumes directly.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "u2x/model.hpp"

namespace u2x {

namespace detail {

inline constexpr double kEps = 1e-16;
inline constexpr double kTiny = 1e-300;
inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
inline constexpr int kMaxIter = 100000;

/// Modified Lentz evaluation of the Legendre continued fraction h(a, x) with
/// Gamma(a, x) = e^-x x^a h(a, x). Valid for any real a when x > 0; fast
/// when x + 1 - a is not small.
inline double upperGammaFraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  return h;
}

/// sum_{k>=0} x^k / (s (s+1) ... (s+k)); gamma(s, x) = x^s e^-x times this.
inline double lowerGammaSeries(double s, double x) {
  double ap = s;
  double term = 1.0 / s;
  double sum = term;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum;
}

inline bool isNonPositiveInteger(double s) { return s <= 0.0 && std::floor(s) == s; }

}  // namespace detail

/// Lower incomplete gamma gamma(s, x) for s > 0, x >= 0 (x = +inf gives Gamma(s)).
inline double lowerIncGamma(double s, double x) {
  if (!(s > 0.0)) throw DomainError("lowerIncGamma: s must be positive");
  if (!(x >= 0.0)) throw DomainError("lowerIncGamma: x must be nonnegative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return std::tgamma(s);
  if (x < s + 1.0) return std::exp(s * std::log(x) - x) * detail::lowerGammaSeries(s, x);
  const double upper = std::exp(s * std::log(x) - x) * detail::upperGammaFraction(s, x);
  return std::tgamma(s) - upper;
}

/// Regularised lower incomplete gamma P(s, x) = gamma(s, x) / Gamma(s).
inline double regularizedLowerGamma(double s, double x) {
  if (!(s > 0.0)) throw DomainError("regularizedLowerGamma: s must be positive");
  if (!(x >= 0.0)) throw DomainError("regularizedLowerGamma: x must be nonnegative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double logPrefix = s * std::log(x) - x - std::lgamma(s);
  if (x < s + 1.0) return std::exp(logPrefix) * detail::lowerGammaSeries(s, x);
  return 1.0 - std::exp(logPrefix) * detail::upperGammaFraction(s, x);
}

/// e^x E1(x); finite for every x > 0, including where E1 itself underflows.
inline double expIntegralE1Scaled(double x) {
  if (!(x > 0.0)) throw DomainError("expIntegralE1: x must be positive");
  if (x <= 1.0) {
    // E1 = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    double sum = 0.0;
    double fact = 1.0;
    for (int k = 1; k < 200; ++k) {
      fact *= -x / k;
      const double term = fact / k;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * detail::kEps) break;
    }
    return std::exp(x) * (-detail::kEulerGamma - std::log(x) - sum);
  }
  // Continued fraction for E1, already scaled by e^x.
  double b = x + 1.0;
  double c = 1.0 / detail::kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < detail::kMaxIter; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::fabs(del - 1.0) < detail::kEps) break;
  }
  return h;
}

/// Exponential integral E1(x) = int_x^inf e^-t / t dt, x > 0.
inline double expIntegralE1(double x) {
  if (!(x > 0.0)) throw DomainError("expIntegralE1: x must be positive");
  return std::exp(-x) * expIntegralE1Scaled(x);
}

/// G_j(x) = x^j e^x Gamma(-j, x) for j = 0 .. jMax.
///
/// G_0 = e^x E1(x) and G_j = (1 - x G_{j-1}) / j. Forward recursion is stable
/// while j >= x; below that we seed G at j0 = ceil(x) from the continued
/// fraction and run the recursion backwards, which is stable for j <= x.
inline std::vector<double> negOrderWeightedSequence(std::size_t jMax, double x) {
  if (!(x > 0.0)) throw DomainError("negOrderWeightedSequence: x must be positive");
  std::vector<double> g(jMax + 1);
  std::size_t j0 = 0;
  if (x <= 1.0) {
    g[0] = expIntegralE1Scaled(x);
  } else {
    j0 = std::min<std::size_t>(jMax, static_cast<std::size_t>(std::ceil(x)));
    // h(-j0, x) = e^x x^j0 Gamma(-j0, x).
    g[j0] = detail::upperGammaFraction(-static_cast<double>(j0), x);
    for (std::size_t j = j0; j > 0; --j) g[j - 1] = (1.0 - static_cast<double>(j) * g[j]) / x;
  }
  for (std::size_t j = j0 + 1; j <= jMax; ++j) g[j] = (1.0 - x * g[j - 1]) / static_cast<double>(j);
  return g;
}

inline double negOrderWeighted(std::size_t j, double x) {
  return negOrderWeightedSequence(j, x)[j];
}

/// e^x Gamma(s, x) for s > 0 or s a nonpositive integer; x > 0.
/// For very negative s and tiny x the true value exceeds double range and
/// +inf is returned.
inline double upperIncGammaScaled(double s, double x) {
  if (!(x > 0.0)) throw DomainError("upperIncGammaScaled: x must be positive");
  if (s <= 0.0) {
    if (!detail::isNonPositiveInteger(s))
      throw DomainError("upperIncGammaScaled: nonpositive s must be an integer");
    const auto j = static_cast<std::size_t>(-s);
    const double g = negOrderWeighted(j, x);
    return std::exp(-static_cast<double>(j) * std::log(x)) * g;
  }
  if (x >= s + 1.0 || (s < 1.0 && x >= 1.0))
    return std::exp(s * std::log(x)) * detail::upperGammaFraction(s, x);
  // Small x: Gamma(s) - gamma(s, x) with x < s + 1, so e^x stays moderate.
  const double lower = std::exp(s * std::log(x) - x) * detail::lowerGammaSeries(s, x);
  return std::exp(x) * (std::tgamma(s) - lower);
}

/// Unscaled upper incomplete gamma Gamma(s, x).
inline double upperIncGamma(double s, double x) {
  return std::exp(-x) * upperIncGammaScaled(s, x);
}

}  // namespace u2x
