#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature. This is the independent
// reference that special functions and closed forms are checked against; the
// library's own evaluators never call it.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace u2x {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureOptions {
  double absTol = 1e-10;
  double relTol = 0.0;
  int maxIntervals = 20000;
};

struct QuadratureResult {
  double value = 0.0;
  double errorEstimate = 0.0;
  int intervals = 0;
  bool converged = false;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gaussKronrod15(const F& f, double a, double b) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(centre);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kKronrodNodes[i];
    const double f1 = f(centre - dx);
    const double f2 = f(centre + dx);
    kronrod += kKronrodWeights[i] * (f1 + f2);
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * (f1 + f2);
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::fabs(kronrod - gauss)};
}

}  // namespace detail

/// Integrate f over [a, b]; b may be +infinity, handled by t = a + u / (1 - u).
inline QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                                  const QuadratureOptions& opt = {}) {
  std::function<double(double)> g = f;
  double lo = a;
  double hi = b;
  if (std::isinf(b)) {
    if (b < 0) throw std::invalid_argument("integrate: only +inf upper limits are supported");
    g = [&f, a](double u) {
      const double w = 1.0 - u;
      return f(a + u / w) / (w * w);
    };
    lo = 0.0;
    hi = 1.0;
  }
  std::priority_queue<detail::Segment> heap;
  auto first = detail::gaussKronrod15(g, lo, hi);
  double total = first.value;
  double err = first.error;
  heap.push(first);
  int intervals = 1;
  auto done = [&] { return err <= std::max(opt.absTol, opt.relTol * std::fabs(total)); };
  while (!done() && intervals < opt.maxIntervals) {
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const auto left = detail::gaussKronrod15(g, worst.a, mid);
    const auto right = detail::gaussKronrod15(g, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++intervals;
  }
  // Re-sum to shed accumulated rounding from the running updates.
  double sum = 0.0;
  double errSum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    errSum += heap.top().error;
    heap.pop();
  }
  QuadratureResult r{sum, errSum, intervals, false};
  r.converged = errSum <= std::max(opt.absTol, opt.relTol * std::fabs(sum)) || done();
  return r;
}

/// Adaptive estimate of int_a^b f with absolute tolerance 1e-10; throws
/// QuadratureError when the subdivision budget runs out.
inline double quadratureOracle(const std::function<double(double)>& f, double a, double b,
                               const QuadratureOptions& opt = {}) {
  const auto r = integrate(f, a, b, opt);
  if (!r.converged)
    throw QuadratureError("quadrature did not converge (error estimate " +
                          std::to_string(r.errorEstimate) + ")");
  return r.value;
}

}  // namespace u2x
