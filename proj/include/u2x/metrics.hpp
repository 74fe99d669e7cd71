#pragma once

// Figures of merit derived from metric curves over transmit SNR.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "u2x/analytic.hpp"
#include "u2x/montecarlo.hpp"

namespace u2x {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MetricKind { OutageProb, RateBpcu };

struct MetricCurve {
  std::vector<double> xDb;  // transmit SNR (or power) in dB, strictly increasing
  std::vector<double> y;
  MetricKind kind = MetricKind::OutageProb;
};

inline void checkCurve(const MetricCurve& c) {
  if (c.xDb.size() != c.y.size()) throw MetricError("curve: x and y lengths differ");
  for (std::size_t i = 1; i < c.xDb.size(); ++i)
    if (!(c.xDb[i] > c.xDb[i - 1])) throw MetricError("curve: x must be strictly increasing");
  for (double v : c.y)
    if (!(v >= 0.0)) throw MetricError("curve: values must be nonnegative");
}

namespace detail {

inline double leastSquaresSlope(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

inline std::size_t windowStart(const MetricCurve& c, std::size_t window) {
  if (window < 3) throw MetricError("slope window needs at least 3 points");
  if (c.xDb.size() < window) throw MetricError("curve shorter than the slope window");
  return c.xDb.size() - window;
}

}  // namespace detail

/// Least-squares slope of -log10(P) against log10(SNR) over the last
/// `window` points. When Monte Carlo half-widths are supplied every window
/// point must be resolved to better than 10 %.
inline double diversityOrder(const MetricCurve& c, std::size_t window = 5,
                             std::span<const double> ciHalfWidths = {}) {
  checkCurve(c);
  const std::size_t first = detail::windowStart(c, window);
  std::vector<double> lx, ly;
  for (std::size_t i = first; i < c.xDb.size(); ++i) {
    if (!(c.y[i] > 0.0))
      throw MetricError("zero outage in the slope window; lower the SNR ceiling or add trials");
    if (!ciHalfWidths.empty() && !(ciHalfWidths[i] < 0.1 * c.y[i]))
      throw MetricError("Monte Carlo interval wider than 10 % of the value in the slope window");
    lx.push_back(c.xDb[i] / 10.0);
    ly.push_back(-std::log10(c.y[i]));
  }
  return detail::leastSquaresSlope(lx, ly);
}

/// Least-squares slope of rate (BPCU) against log2(SNR) over the last
/// `window` points.
inline double highSnrSlope(const MetricCurve& c, std::size_t window = 5) {
  checkCurve(c);
  const std::size_t first = detail::windowStart(c, window);
  std::vector<double> lx, ly;
  for (std::size_t i = first; i < c.xDb.size(); ++i) {
    lx.push_back(c.xDb[i] / 10.0 * std::log2(10.0));
    ly.push_back(c.y[i]);
  }
  return detail::leastSquaresSlope(lx, ly);
}

/// (1 - pV) rV + (1 - pW) rW.
inline double outageSumRate(double pV, double pW, const RateTargets& r) {
  return (1.0 - pV) * r.rV + (1.0 - pW) * r.rW;
}

// --------------------------------------------------------------------------
// Diversity order / high-SNR slope table

struct TableOneSpec {
  OutageInputs base;           // scenario and pu are overwritten
  std::vector<double> puDbm;   // transmit power grid
  std::vector<int> mValues = {1, 2};
  std::size_t window = 5;
  MonteCarloOptions farRate{100'000, {}, 1};
  ErgodicSeriesControl series;
  double diversityTol = 0.3;
  double slopeTol = 0.05;
};

struct TableOneRow {
  Scenario scenario;
  int m = 1;
  double diversity = 0.0;
  double slope = 0.0;
  double expectedDiversity = 0.0;
  double expectedSlope = 0.0;
  bool diversityOk = false;
  bool slopeOk = false;
  std::string slopeSource;  // "exact" or "monte_carlo"
};

inline double expectedHighSnrSlope(Scenario s) {
  switch (s) {
    case Scenario::NomaNear:
    case Scenario::OmaSingle: return 1.0;
    case Scenario::NomaFar: return 0.0;
    case Scenario::OmaPairNear:
    case Scenario::OmaPairFar: return 0.5;
  }
  return 0.0;
}

/// Fit D and S for every scenario and m from analytic outage curves and
/// ergodic curves (series for near/OMA users, Monte Carlo for the NOMA far
/// user, whose closed form is only the ceiling).
inline std::vector<TableOneRow> tableOne(const TableOneSpec& spec) {
  if (spec.puDbm.size() < std::max<std::size_t>(3, spec.window))
    throw MetricError("tableOne: grid shorter than the slope window");
  std::vector<TableOneRow> rows;
  for (int m : spec.mValues) {
    for (Scenario sc : {Scenario::NomaNear, Scenario::NomaFar, Scenario::OmaPairNear,
                        Scenario::OmaPairFar, Scenario::OmaSingle}) {
      MetricCurve outage{spec.puDbm, {}, MetricKind::OutageProb};
      MetricCurve rate{spec.puDbm, {}, MetricKind::RateBpcu};
      OutageInputs in = spec.base;
      in.scenario = sc;
      in.channel.m = m;
      in.channel.losMix.reset();
      for (double p : spec.puDbm) {
        in.budget.pu = dbmToWatts(p);
        outage.y.push_back(outageExact(in).value);
        if (sc == Scenario::NomaFar)
          rate.y.push_back(estimate(in, MonteCarloMetric::Ergodic, spec.farRate).value);
        else if (sc == Scenario::NomaNear)
          rate.y.push_back(ergodicNearNoma(in, spec.series).value);
        else
          rate.y.push_back(ergodicOma(in, spec.series).value);
      }
      TableOneRow row;
      row.scenario = sc;
      row.m = m;
      row.diversity = diversityOrder(outage, spec.window);
      row.slope = highSnrSlope(rate, spec.window);
      row.expectedDiversity = m;
      row.expectedSlope = expectedHighSnrSlope(sc);
      row.diversityOk = std::fabs(row.diversity - row.expectedDiversity) <= spec.diversityTol;
      row.slopeOk = std::fabs(row.slope - row.expectedSlope) <= spec.slopeTol;
      row.slopeSource = sc == Scenario::NomaFar ? "monte_carlo" : "exact";
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace u2x
