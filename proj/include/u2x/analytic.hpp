#pragma once

// Closed-form outage, ergodic-rate and spectrum-efficiency evaluators.
//
// All outage forms share one kernel: with a receiver uniform (density
// 3 r^2 / (b^3 - a^3)) on a < r < b and Nakagami-m power gain, the outage
// probability for threshold scale M is
//
//   P = 1 - 3/(b^3-a^3) sum_{n<m} (x^n / n!) int_a^b r^(an+2) e^(-x r^a) dr,
//   x = m M sigma^2,
//
// which reduces to lower incomplete gammas of order n + 3/alpha.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <vector>

#include "u2x/model.hpp"
#include "u2x/specfun.hpp"

namespace u2x {

struct OutageInputs {
  GeometryConfig geometry;
  ChannelConfig channel;
  LinkBudget budget;
  RateTargets rates;
  Scenario scenario = Scenario::NomaFar;
};

/// Controls for the k-series of the ergodic-rate closed forms.
///
/// The k-terms decay only like k^(-1-3/alpha), so partial sums are
/// extrapolated (Richardson on K, 2K, ..., 16K with the known exponents).
/// `kMax` caps the number of directly summed terms; `relTol` is the required
/// extrapolation residual relative to the result.
struct ErgodicSeriesControl {
  std::size_t kMax = std::size_t{1} << 20;
  double relTol = 1e-9;
};

namespace detail {

inline void requireIntegerShape(double m, const char* who) {
  if (!isPositiveInteger(m))
    throw DomainError(std::string(who) + ": closed forms need a positive integer fading shape m");
}

inline int shapeOf(const ChannelConfig& c, const char* who) {
  requireIntegerShape(c.m, who);
  return static_cast<int>(c.m);
}

inline double factorial(int n) { return std::tgamma(n + 1.0); }

/// int_a^b of the uniform-in-volume density times the outage kernel; see
/// the file comment. Returns P in [0, 1] up to rounding.
inline double shellOutage(int m, double alpha, double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  const double vol = b * b * b - a * a * a;
  const double ta = x * std::pow(a, alpha);
  const double tb = x * std::pow(b, alpha);
  const double scale = std::pow(x, -3.0 / alpha);
  double sum = 0.0;
  for (int n = 0; n < m; ++n) {
    const double s = n + 3.0 / alpha;
    sum += (lowerIncGamma(s, tb) - lowerIncGamma(s, ta)) / factorial(n);
  }
  const double direct = 1.0 - 3.0 * scale * sum / (alpha * vol);
  if (direct > 0.05) return direct;
  // Same integral after integrating by parts; no cancellation against 1.
  const double s = m + 3.0 / alpha;
  const double byParts = b * b * b * regularizedLowerGamma(m, tb) -
                         a * a * a * regularizedLowerGamma(m, ta) -
                         scale * (lowerIncGamma(s, tb) - lowerIncGamma(s, ta)) / std::tgamma(m);
  return byParts / vol;
}

/// Variant closed form with gamma order n + 3/alpha + 1 and an optional extra
/// factor `halve` in the denominator. Only reported as a diagnostic.
inline double printedShellOutage(int m, double alpha, double x, double a, double b, double halve) {
  if (x <= 0.0) return 1.0;
  const double vol = b * b * b - a * a * a;
  double sum = 0.0;
  for (int n = 0; n < m; ++n) {
    const double s = n + 3.0 / alpha + 1.0;
    sum += (lowerIncGamma(s, x * std::pow(b, alpha)) - lowerIncGamma(s, x * std::pow(a, alpha))) /
           factorial(n);
  }
  return 1.0 - 3.0 * std::pow(x, -3.0 / alpha) * sum / (halve * alpha * vol);
}

/// 3/(b^3-a^3) * (b^(p+3) - a^(p+3)) / (p+3): the mean of r^p over the shell.
inline double shellMoment(double p, double a, double b) {
  const double vol = b * b * b - a * a * a;
  return 3.0 * (std::pow(b, p + 3.0) - std::pow(a, p + 3.0)) / ((p + 3.0) * vol);
}

struct Threshold {
  Shell shell;
  std::optional<double> scale;  // M; nullopt when infeasible
};

inline Threshold thresholdFor(const OutageInputs& in) {
  return {shellOf(in.geometry, regionOf(in.scenario)),
          thresholdScale(in.budget, in.rates, in.scenario)};
}

}  // namespace detail

/// Exact outage probability for any scenario (integer m).
inline MetricEstimate outageExact(const OutageInputs& in) {
  const int m = detail::shapeOf(in.channel, "outageExact");
  const auto th = detail::thresholdFor(in);
  if (!th.scale) {
    MetricEstimate e;
    e.value = 1.0;
    e.diag.infeasible = true;
    return e;
  }
  const double alpha = in.channel.alpha;
  const double x = m * *th.scale * in.budget.sigma2;
  const auto [a, b] = th.shell;
  auto e = clampedProbability(detail::shellOutage(m, alpha, x, a, b), Method::Exact);
  const bool pair = in.scenario == Scenario::OmaPairNear || in.scenario == Scenario::OmaPairFar;
  e.diag.printedForm = detail::printedShellOutage(m, alpha, x, a, b, pair ? 2.0 : 1.0);
  return e;
}

/// High-SNR outage expansion for the NOMA users.
///
/// Expanding the fading CDF to the first two orders in x = m M_v sigma^2,
///   P ~ x^m/m! E[r^(alpha m)] - m x^(m+1)/(m+1)! E[r^(alpha(m+1))],
/// which is the leading behaviour of `outageExact` and decays with slope -m.
/// The near user uses M_v (not max(M_v, M_w)); `thresholdMismatch` is set
/// when M_w > M_v, where this underestimates the outage.
/// `printedForm` carries the two-sum first-order-exponential expansion
/// 1 - sum x^n/n! E[r^(an)] + sum x^(n+1)/n! E[r^(a(n+1))].
inline MetricEstimate outageAsymptotic(const OutageInputs& in) {
  if (!isNoma(in.scenario)) throw DomainError("outageAsymptotic: NOMA scenarios only");
  const int m = detail::shapeOf(in.channel, "outageAsymptotic");
  const auto mV = nomaThresholdScale(in.budget, in.rates, NomaUser::Far);
  if (!mV) {
    MetricEstimate e;
    e.method = Method::Asymptotic;
    e.value = 1.0;
    e.diag.infeasible = true;
    return e;
  }
  const double alpha = in.channel.alpha;
  const double x = m * *mV * in.budget.sigma2;
  const auto [a, b] = shellOf(in.geometry, regionOf(in.scenario));

  const double lead = std::pow(x, m) / detail::factorial(m) * detail::shellMoment(alpha * m, a, b);
  const double next = m * std::pow(x, m + 1) / detail::factorial(m + 1) *
                      detail::shellMoment(alpha * (m + 1), a, b);
  auto e = clampedProbability(lead - next, Method::Asymptotic);

  double printed = 1.0;
  for (int n = 0; n < m; ++n) {
    printed -= std::pow(x, n) / detail::factorial(n) * detail::shellMoment(alpha * n, a, b);
    printed += std::pow(x, n + 1) / detail::factorial(n) * detail::shellMoment(alpha * (n + 1), a, b);
  }
  e.diag.printedForm = printed;
  if (in.scenario == Scenario::NomaNear)
    e.diag.thresholdMismatch = nearOwnThresholdScale(in.budget, in.rates) > *mV;
  return e;
}

/// Distance threshold z with outage iff d > z when |h|^2 = 1.
inline std::optional<double> noFadingRadius(const OutageInputs& in) {
  const auto scale = thresholdScale(in.budget, in.rates, in.scenario);
  if (!scale) return std::nullopt;
  return std::pow(1.0 / (*scale * in.budget.sigma2), 1.0 / in.channel.alpha);
}

/// m -> infinity limit: a receiver is in outage exactly when it lies beyond
/// the distance threshold z, so P = (b^3 - z^3)/(b^3 - a^3) for a < z < b.
/// The near user's z is min(z_n, z_f) through the max(M_v, M_w) threshold.
/// `printedForm` holds the (z^3 - a^3)/(b^3 - a^3) variant of the middle branch.
inline MetricEstimate outageNoFading(const OutageInputs& in) {
  MetricEstimate e;
  e.method = Method::NoFadingLimit;
  const auto z = noFadingRadius(in);
  if (!z) {
    e.value = 1.0;
    e.diag.infeasible = true;
    return e;
  }
  const auto [a, b] = shellOf(in.geometry, regionOf(in.scenario));
  const double vol = b * b * b - a * a * a;
  if (*z <= a) {
    e.value = 1.0;
  } else if (*z >= b) {
    e.value = 0.0;
  } else {
    const double z3 = *z * *z * *z;
    e.value = (b * b * b - z3) / vol;
    e.diag.printedForm = (z3 - a * a * a) / vol;
  }
  return e;
}

/// pLoS * P(m = mLoS) + (1 - pLoS) * P(m = 1), each branch from outageExact.
inline MetricEstimate outageLosMixture(const OutageInputs& in) {
  if (!in.channel.losMix) throw DomainError("outageLosMixture: channel has no LoS mixture");
  if (!isNoma(in.scenario)) throw DomainError("outageLosMixture: NOMA scenarios only");
  const auto mix = *in.channel.losMix;
  OutageInputs los = in;
  los.channel.m = mix.mLoS;
  los.channel.losMix.reset();
  OutageInputs nlos = los;
  nlos.channel.m = 1.0;
  const auto pl = outageExact(los);
  const auto pn = outageExact(nlos);
  MetricEstimate e;
  e.value = mix.pLoS * pl.value + (1.0 - mix.pLoS) * pn.value;
  e.diag.infeasible = pl.diag.infeasible;
  return e;
}

// --------------------------------------------------------------------------
// Ergodic rates

struct SeriesResult {
  double value = 0.0;     // E[log2(1 + SNR)] over the shell
  double residual = 0.0;  // estimated extrapolation error
  std::size_t terms = 0;  // k-terms summed per n
  bool converged = false;
};

namespace detail {

/// sum_n sum_{k<K} w_{n,k} [b^3 G_{n+k}(C b^a) - a^3 G_{n+k}(C a^a)] for each
/// K in `cuts`, where w_{n,k} = Gamma(s) Gamma(n+k+1) / (n! Gamma(s+k+1)),
/// s = n + 3/alpha and G_j(y) = y^j e^y Gamma(-j, y).
inline std::vector<double> ergodicPartialSums(int m, double alpha, double c, double a, double b,
                                              const std::vector<std::size_t>& cuts) {
  const std::size_t kTop = cuts.back();
  const std::size_t jMax = kTop + static_cast<std::size_t>(m);
  const auto gb = negOrderWeightedSequence(jMax, c * std::pow(b, alpha));
  const auto ga = negOrderWeightedSequence(jMax, c * std::pow(a, alpha));
  const double a3 = a * a * a;
  const double b3 = b * b * b;
  std::vector<double> sums(cuts.size(), 0.0);
  for (int n = 0; n < m; ++n) {
    const double s = n + 3.0 / alpha;
    double w = 1.0 / s;  // Gamma(s) n! / (n! Gamma(s+1))
    double partial = 0.0;
    std::size_t next = 0;
    for (std::size_t k = 0; k < kTop; ++k) {
      const std::size_t j = static_cast<std::size_t>(n) + k;
      partial += w * (b3 * gb[j] - a3 * ga[j]);
      w *= static_cast<double>(n + k + 1) / (s + static_cast<double>(k) + 1.0);
      while (next < cuts.size() && cuts[next] == k + 1) sums[next++] += partial;
    }
  }
  return sums;
}

/// Richardson extrapolation for S(K) = S - K^-p (c0 + c1/K + ...), K doubling.
inline std::pair<double, double> richardson(std::vector<double> t, double p) {
  double lastDelta = 0.0;
  for (std::size_t level = 0; t.size() > 1; ++level) {
    const double f = std::exp2(p + static_cast<double>(level));
    std::vector<double> next(t.size() - 1);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) next[i] = (f * t[i + 1] - t[i]) / (f - 1.0);
    lastDelta = next.back() - t.back();
    t = std::move(next);
  }
  return {t.front(), std::fabs(lastDelta)};
}

}  // namespace detail

/// Mean of log2(1 + SNR) for a user uniform on a < r < b with
/// SNR = m g r^-alpha / C, g ~ Gamma(m, 1/m). C = m sigma^2 / (P_u a_w^2) for
/// the NOMA near user after SIC and m sigma^2 / P_u for OMA users.
inline SeriesResult ergodicSeries(int m, double alpha, double c, double a, double b,
                                  const ErgodicSeriesControl& ctl) {
  if (ctl.kMax < 1 || !(ctl.relTol > 0.0 && ctl.relTol < 1.0))
    throw DomainError("ergodicSeries: invalid series control");
  if (m < 1) throw DomainError("ergodicSeries: m must be a positive integer");
  const double prefactor = 3.0 / (alpha * std::numbers::ln2 * (b * b * b - a * a * a));
  const double p = 3.0 / alpha;
  SeriesResult out;
  if (c <= 0.0 || std::isinf(1.0 / c)) {
    // Unbounded SNR; only reachable with pu = inf.
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  // Start where the terms are in their power-law regime (k well above C b^a).
  const double yMax = c * std::pow(b, alpha);
  std::size_t base = 16;
  while (static_cast<double>(base) < 4.0 * (yMax + m) && base < ctl.kMax / 16) base *= 2;
  for (;;) {
    std::vector<std::size_t> cuts;
    for (std::size_t i = 0; i < 5; ++i) cuts.push_back(base << i);
    const auto sums = detail::ergodicPartialSums(m, alpha, c, a, b, cuts);
    const auto [value, delta] = detail::richardson(sums, p);
    out.value = prefactor * value;
    out.residual = prefactor * delta;
    out.terms = cuts.back();
    out.converged = out.residual <= ctl.relTol * std::fabs(out.value);
    if (out.converged || (base << 5) > ctl.kMax) return out;
    base *= 2;
  }
}

namespace detail {

inline MetricEstimate fromSeries(const SeriesResult& r, double factor) {
  MetricEstimate e;
  e.method = Method::Exact;
  e.value = factor * r.value;
  e.diag.seriesResidual = factor * r.residual;
  e.diag.converged = r.converged;
  return e;
}

}  // namespace detail

/// Ergodic rate of the NOMA near user after perfect SIC.
inline MetricEstimate ergodicNearNoma(const OutageInputs& in, const ErgodicSeriesControl& ctl = {}) {
  const int m = detail::shapeOf(in.channel, "ergodicNearNoma");
  const double c = m * in.budget.sigma2 / (in.budget.pu * in.budget.aW2);
  const auto [a, b] = shellOf(in.geometry, Region::NearBall);
  return detail::fromSeries(ergodicSeries(m, in.channel.alpha, c, a, b, ctl), 1.0);
}

/// Far-user rate ceiling log2(1 + aV2/aW2).
inline double farRateCeiling(const LinkBudget& b) { return std::log2(1.0 + b.aV2 / b.aW2); }

/// High-SNR far-user ergodic rate. `value` is the interference-limited
/// ceiling; `printedForm` carries ceiling * (1 + Q1 - Q2) with the n-dependent
/// shell moments inside the sums.
inline MetricEstimate ergodicFarNoma(const OutageInputs& in) {
  const int m = detail::shapeOf(in.channel, "ergodicFarNoma");
  const double alpha = in.channel.alpha;
  const auto [a, b] = shellOf(in.geometry, Region::FarShell);
  const double ceiling = farRateCeiling(in.budget);
  const double u = m * in.budget.sigma2 / in.budget.pu;
  double q1 = 0.0;
  double q2 = 0.0;
  for (int n = 0; n < m; ++n) {
    q1 += std::pow(u, n) / detail::factorial(n) * detail::shellMoment(alpha * n, a, b);
    q2 += std::pow(u, n + 1) / detail::factorial(n) * detail::shellMoment(alpha * (n + 1), a, b);
  }
  MetricEstimate e;
  e.method = Method::Asymptotic;
  e.value = ceiling;
  e.diag.printedForm = ceiling * (1.0 + q1 - q2);
  return e;
}

/// Ergodic rate of the OMA receivers. Pair users share the channel in time
/// and get half the single-user rate expression over their own region.
inline MetricEstimate ergodicOma(const OutageInputs& in, const ErgodicSeriesControl& ctl = {}) {
  if (isNoma(in.scenario)) throw DomainError("ergodicOma: OMA scenarios only");
  const int m = detail::shapeOf(in.channel, "ergodicOma");
  const double c = m * in.budget.sigma2 / in.budget.pu;
  const auto [a, b] = shellOf(in.geometry, regionOf(in.scenario));
  const double factor = in.scenario == Scenario::OmaSingle ? 1.0 : 0.5;
  return detail::fromSeries(ergodicSeries(m, in.channel.alpha, c, a, b, ctl), factor);
}

struct SpectrumEfficiency {
  double tauNoma = 0.0;
  double tauGapVsOma1 = 0.0;
  double tauGapVsOma2 = 0.0;
  double omaSingle = 0.0;
  double omaPair = 0.0;
  double seriesResidual = 0.0;
  bool converged = true;
};

/// NOMA spectrum efficiency log2(1 + aV2/aW2) + R_w and its gaps to the two
/// OMA baselines.
inline SpectrumEfficiency spectrumEfficiency(const OutageInputs& in,
                                             const ErgodicSeriesControl& ctl = {}) {
  OutageInputs x = in;
  const auto near = ergodicNearNoma(x, ctl);
  x.scenario = Scenario::OmaSingle;
  const auto single = ergodicOma(x, ctl);
  x.scenario = Scenario::OmaPairNear;
  const auto pairNear = ergodicOma(x, ctl);
  x.scenario = Scenario::OmaPairFar;
  const auto pairFar = ergodicOma(x, ctl);

  SpectrumEfficiency se;
  se.tauNoma = farRateCeiling(in.budget) + near.value;
  se.omaSingle = single.value;
  se.omaPair = pairNear.value + pairFar.value;
  se.tauGapVsOma1 = se.tauNoma - se.omaSingle;
  se.tauGapVsOma2 = se.tauNoma - se.omaPair;
  for (const auto* e : {&near, &single, &pairNear, &pairFar}) {
    se.seriesResidual += e->diag.seriesResidual.value_or(0.0);
    se.converged = se.converged && e->diag.converged;
  }
  return se;
}

}  // namespace u2x
