#pragma once

// Monte Carlo reference for every analytic metric.
//
// Each trial places the receivers (inverse-CDF radius, UAV at the centre;
// angles never matter), draws Nakagami power gains and applies the decode
// rules directly. Draw order inside a trial is fixed: distances, LoS states
// (only with a LoS mixture), then gains.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "u2x/analytic.hpp"
#include "u2x/model.hpp"
#include "u2x/rng.hpp"

namespace u2x {

struct TrialOutcome {
  double distNear = 0.0;
  double distFar = 0.0;
  double gainNear = 0.0;
  double gainFar = 0.0;
  bool outageNear = false;
  bool outageFar = false;
  double rateNear = 0.0;  // BPCU
  double rateFar = 0.0;
};

/// Inverse-CDF radius for density proportional to r^2 on the region.
inline double sampleDistance(const GeometryConfig& g, Region region, double u) {
  const auto [a, b] = shellOf(g, region);
  const double a3 = a * a * a;
  return std::cbrt(a3 + u * (b * b * b - a3));
}

/// Unit-mean Nakagami power gain: Gamma(shape m, rate m).
inline double sampleGain(double m, TrialStream& s) {
  if (!(m > 0.0)) throw DomainError("sampleGain: m must be positive");
  return sampleStandardGamma(m, s) / m;
}

/// Bounded path loss: d^-alpha beyond r0, r0^-alpha inside.
inline double pathLoss(double d, double r0, double alpha) {
  return std::pow(std::max(d, r0), -alpha);
}

namespace detail {

enum class AccessMode { NomaPair, OmaPair, OmaSingle };

inline AccessMode accessModeOf(Scenario s) {
  switch (s) {
    case Scenario::NomaNear:
    case Scenario::NomaFar: return AccessMode::NomaPair;
    case Scenario::OmaPairNear:
    case Scenario::OmaPairFar: return AccessMode::OmaPair;
    case Scenario::OmaSingle: return AccessMode::OmaSingle;
  }
  return AccessMode::NomaPair;
}

}  // namespace detail

/// One placement + fading realisation. Computes both users of the scenario's
/// access mode; OmaSingle fills both slots with its single receiver.
inline TrialOutcome runTrial(const OutageInputs& in, TrialStream& s) {
  const auto& g = in.geometry;
  const auto& b = in.budget;
  const auto& r = in.rates;
  const double alpha = in.channel.alpha;
  const auto mode = detail::accessModeOf(in.scenario);
  const int users = mode == detail::AccessMode::OmaSingle ? 1 : 2;

  TrialOutcome t;
  if (users == 1) {
    t.distNear = t.distFar = sampleDistance(g, Region::FullBall, s.uniform());
  } else {
    t.distNear = sampleDistance(g, Region::NearBall, s.uniform());
    t.distFar = sampleDistance(g, Region::FarShell, s.uniform());
  }
  double mNear = in.channel.m;
  double mFar = in.channel.m;
  if (in.channel.losMix) {
    const auto& mix = *in.channel.losMix;
    mNear = s.uniform() < mix.pLoS ? mix.mLoS : 1.0;
    if (users == 2) mFar = s.uniform() < mix.pLoS ? mix.mLoS : 1.0;
    else mFar = mNear;
  }
  t.gainNear = sampleGain(mNear, s);
  t.gainFar = users == 2 ? sampleGain(mFar, s) : t.gainNear;

  // Received SNR at full transmit power.
  const double snrNear = b.pu * t.gainNear * pathLoss(t.distNear, g.r0, alpha) / b.sigma2;
  const double snrFar = b.pu * t.gainFar * pathLoss(t.distFar, g.r0, alpha) / b.sigma2;

  switch (mode) {
    case detail::AccessMode::NomaPair: {
      const double sinrFar = snrFar * b.aV2 / (1.0 + snrFar * b.aW2);
      const double sinrNearOfFar = snrNear * b.aV2 / (1.0 + snrNear * b.aW2);
      const double snrNearOwn = snrNear * b.aW2;
      t.outageFar = !(sinrFar >= r.epsV());
      t.outageNear = !(sinrNearOfFar >= r.epsV()) || !(snrNearOwn >= r.epsW());
      t.rateFar = std::log2(1.0 + sinrFar);
      t.rateNear = std::log2(1.0 + snrNearOwn);
      break;
    }
    case detail::AccessMode::OmaPair:
      t.outageNear = !(snrNear >= r.epsOW());
      t.outageFar = !(snrFar >= r.epsOV());
      t.rateNear = 0.5 * std::log2(1.0 + snrNear);
      t.rateFar = 0.5 * std::log2(1.0 + snrFar);
      break;
    case detail::AccessMode::OmaSingle:
      t.outageNear = t.outageFar = !(snrNear >= r.epsO());
      t.rateNear = t.rateFar = std::log2(1.0 + snrNear);
      break;
  }
  return t;
}

enum class MonteCarloMetric { Outage, Ergodic, OutageSumRate };

struct MonteCarloOptions {
  std::uint64_t trials = 1'000'000;
  SeedPolicy seeds;
  unsigned jobs = 1;
};

namespace detail {

inline constexpr std::uint64_t kTrialBlock = 8192;

struct Moments {
  double sum = 0.0;
  double sumSq = 0.0;
};

inline bool nearSlot(Scenario s) {
  return s == Scenario::NomaNear || s == Scenario::OmaPairNear || s == Scenario::OmaSingle;
}

inline double trialValue(const OutageInputs& in, MonteCarloMetric metric, const TrialOutcome& t) {
  const bool near = nearSlot(in.scenario);
  switch (metric) {
    case MonteCarloMetric::Outage: return (near ? t.outageNear : t.outageFar) ? 1.0 : 0.0;
    case MonteCarloMetric::Ergodic: return near ? t.rateNear : t.rateFar;
    case MonteCarloMetric::OutageSumRate:
      return (t.outageFar ? 0.0 : in.rates.rV) + (t.outageNear ? 0.0 : in.rates.rW);
  }
  return 0.0;
}

}  // namespace detail

/// Sample mean with a 95 % interval. Trials are processed in fixed blocks and
/// block sums are merged in block order, so the result is bit-identical for
/// any `jobs`.
inline MetricEstimate estimate(const OutageInputs& in, MonteCarloMetric metric,
                               const MonteCarloOptions& opt) {
  if (opt.trials < 1000) throw DomainError("estimate: at least 1000 trials required");
  OutageInputs x = in;
  if (metric == MonteCarloMetric::OutageSumRate) x.scenario = Scenario::NomaNear;

  const std::uint64_t blocks = (opt.trials + detail::kTrialBlock - 1) / detail::kTrialBlock;
  std::vector<detail::Moments> partial(blocks);
  std::atomic<std::uint64_t> nextBlock{0};
  auto worker = [&] {
    for (;;) {
      const std::uint64_t blk = nextBlock.fetch_add(1);
      if (blk >= blocks) return;
      detail::Moments mo;
      const std::uint64_t first = blk * detail::kTrialBlock;
      const std::uint64_t last = std::min(opt.trials, first + detail::kTrialBlock);
      for (std::uint64_t t = first; t < last; ++t) {
        TrialStream stream(opt.seeds.masterSeed, t);
        const double v = detail::trialValue(x, metric, runTrial(x, stream));
        mo.sum += v;
        mo.sumSq += v * v;
      }
      partial[blk] = mo;
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(blocks)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < jobs; ++i) pool.emplace_back(worker);
  }
  detail::Moments total;
  for (const auto& p : partial) {
    total.sum += p.sum;
    total.sumSq += p.sumSq;
  }

  const double n = static_cast<double>(opt.trials);
  const double mean = total.sum / n;
  const double var = std::max(0.0, (total.sumSq - n * mean * mean) / (n - 1.0));
  constexpr double z = 1.959963984540054;

  MetricEstimate e;
  e.method = Method::MonteCarlo;
  e.trials = opt.trials;
  e.value = mean;
  if (metric == MonteCarloMetric::Outage && mean < 1e-3) {
    // Wilson score interval.
    const double z2n = z * z / n;
    const double centre = (mean + 0.5 * z2n) / (1.0 + z2n);
    const double half = z / (1.0 + z2n) * std::sqrt(mean * (1.0 - mean) / n + 0.25 * z2n / n);
    e.ciLow = centre - half;
    e.ciHigh = centre + half;
    e.ciHalfWidth = half;
  } else {
    e.ciHalfWidth = z * std::sqrt(var / n);
    e.ciLow = mean - e.ciHalfWidth;
    e.ciHigh = mean + e.ciHalfWidth;
  }
  if (metric == MonteCarloMetric::Outage && isNoma(in.scenario)) {
    e.diag.infeasible = !nomaThresholdScale(in.budget, in.rates, NomaUser::Far).has_value();
  }
  return e;
}

}  // namespace u2x
