#pragma once

// Independent references built only from quadrature and first principles.

#include <cmath>

#include "u2x/quadrature.hpp"

namespace u2x::testing {

/// sum_{n<m} t^n/n! * e^-t, the Gamma(m) survival function at t.
inline double erlangSurvival(int m, double t) {
  double term = 1.0;
  double s = 0.0;
  for (int n = 0; n < m; ++n) {
    if (n > 0) term *= t / n;
    s += term;
  }
  return s * std::exp(-t);
}

/// Outage P(g < x r^alpha / m) averaged over r with density 3r^2/(b^3-a^3),
/// g ~ Gamma(m, 1/m): 1 - E_r[Q(m, x r^alpha)].
inline double outageOracle(int m, double alpha, double x, double a, double b) {
  QuadratureOptions o;
  o.absTol = 1e-15;
  o.relTol = 1e-13;
  auto f = [&](double r) { return r * r * erlangSurvival(m, x * std::pow(r, alpha)); };
  const double success = 3.0 / (b * b * b - a * a * a) * integrate(f, a, b, o).value;
  return 1.0 - success;
}

/// E[log2(1 + SNR)] with P(SNR > s) = E_r[Q(m, c s r^alpha)], integrated
/// as int_0^inf P(SNR > s)/(1+s) ds / ln 2 on s = e^v.
inline double ergodicOracle(int m, double alpha, double c, double a, double b) {
  auto ccdf = [&](double s) {
    QuadratureOptions o;
    o.absTol = 1e-14;
    o.relTol = 1e-13;
    auto inner = [&](double r) { return r * r * erlangSurvival(m, c * s * std::pow(r, alpha)); };
    return 3.0 / (b * b * b - a * a * a) * integrate(inner, a, b, o).value;
  };
  auto f = [&](double v) {
    const double s = std::exp(v);
    return ccdf(s) * s / (1.0 + s);
  };
  QuadratureOptions o;
  o.absTol = 1e-12;
  o.relTol = 1e-11;
  return integrate(f, -60.0, 60.0, o).value / std::log(2.0);
}

}  // namespace u2x::testing
