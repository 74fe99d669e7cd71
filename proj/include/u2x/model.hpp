#pragma once

// Domain parameters for a two-receiver NOMA downlink from a UAV at the centre
// of a sphere: near receiver uniform in the ball r0 < r < R, far receiver
// uniform in the shell R < r < D.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace u2x {

/// Thrown when an input lies outside the domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline double dbmToWatts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double wattsToDbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

struct GeometryConfig {
  double r0 = 1.0;   // exclusion radius [m]
  double R = 50.0;   // near-ball radius [m]
  double D = 100.0;  // outer-sphere radius [m]
};

struct LosMixture {
  double pLoS = 0.0;  // probability that a link is LoS
  double mLoS = 1.0;  // Nakagami shape of the LoS branch; NLoS is Rayleigh (m = 1)
};

struct ChannelConfig {
  double alpha = 4.0;  // path-loss exponent
  double m = 1.0;      // Nakagami shape
  std::optional<LosMixture> losMix;
};

struct LinkBudget {
  double pu = 0.1;        // transmit power [W]
  double sigma2 = 1e-12;  // noise power [W]
  double aW2 = 0.4;       // near-user power fraction
  double aV2 = 0.6;       // far-user power fraction
};

/// Target rates in bits per channel use.
struct RateTargets {
  double rW = 1.5;
  double rV = 1.0;
  double rO = 1.0;
  double rOW = 1.5;
  double rOV = 1.0;

  // SINR thresholds. OMA users get half the channel, hence the doubled exponent.
  double epsV() const { return std::exp2(rV) - 1.0; }
  double epsW() const { return std::exp2(rW) - 1.0; }
  double epsO() const { return std::exp2(2.0 * rO) - 1.0; }
  double epsOW() const { return std::exp2(2.0 * rOW) - 1.0; }
  double epsOV() const { return std::exp2(2.0 * rOV) - 1.0; }
};

enum class Scenario { NomaNear, NomaFar, OmaSingle, OmaPairNear, OmaPairFar };

inline constexpr Scenario kAllScenarios[] = {Scenario::NomaNear, Scenario::NomaFar,
                                             Scenario::OmaSingle, Scenario::OmaPairNear,
                                             Scenario::OmaPairFar};

inline std::string_view toString(Scenario s) {
  switch (s) {
    case Scenario::NomaNear: return "NomaNear";
    case Scenario::NomaFar: return "NomaFar";
    case Scenario::OmaSingle: return "OmaSingle";
    case Scenario::OmaPairNear: return "OmaPairNear";
    case Scenario::OmaPairFar: return "OmaPairFar";
  }
  return "?";
}

inline std::optional<Scenario> scenarioFromString(std::string_view name) {
  for (Scenario s : kAllScenarios)
    if (toString(s) == name) return s;
  return std::nullopt;
}

inline bool isNoma(Scenario s) { return s == Scenario::NomaNear || s == Scenario::NomaFar; }

/// Receiver placement regions. FullBall hosts the single OMA receiver.
enum class Region { NearBall, FarShell, FullBall };

struct Shell {
  double inner;
  double outer;
};

inline Shell shellOf(const GeometryConfig& g, Region region) {
  switch (region) {
    case Region::NearBall: return {g.r0, g.R};
    case Region::FarShell: return {g.R, g.D};
    case Region::FullBall: return {g.r0, g.D};
  }
  return {g.r0, g.D};
}

inline Region regionOf(Scenario s) {
  switch (s) {
    case Scenario::NomaNear:
    case Scenario::OmaPairNear: return Region::NearBall;
    case Scenario::NomaFar:
    case Scenario::OmaPairFar: return Region::FarShell;
    case Scenario::OmaSingle: return Region::FullBall;
  }
  return Region::FullBall;
}

enum class Method { Exact, Asymptotic, NoFadingLimit, MonteCarlo };

inline std::string_view toString(Method m) {
  switch (m) {
    case Method::Exact: return "exact";
    case Method::Asymptotic: return "asymptotic";
    case Method::NoFadingLimit: return "no_fading";
    case Method::MonteCarlo: return "monte_carlo";
  }
  return "?";
}

inline std::optional<Method> methodFromString(std::string_view name) {
  for (Method m : {Method::Exact, Method::Asymptotic, Method::NoFadingLimit, Method::MonteCarlo})
    if (toString(m) == name) return m;
  return std::nullopt;
}

/// Side information attached to an estimate. Nothing here changes `value`.
struct Diagnostics {
  std::optional<double> raw;          // unclamped value when clamping happened
  bool clamped = false;
  bool infeasible = false;            // far-message SINR ceiling below threshold
  std::optional<double> printedForm;  // value of the formula exactly as printed in the source derivation
  std::optional<double> seriesResidual;
  bool converged = true;
  bool thresholdMismatch = false;     // near asymptote built on M_v while M_w > M_v
};

struct MetricEstimate {
  double value = 0.0;
  Method method = Method::Exact;
  std::uint64_t trials = 0;  // Monte Carlo only
  double ciHalfWidth = 0.0;  // 95 %, Monte Carlo only
  double ciLow = 0.0;
  double ciHigh = 0.0;
  Diagnostics diag;
};

/// Clamp a probability into [0, 1], remembering the raw value.
inline MetricEstimate clampedProbability(double raw, Method method) {
  MetricEstimate e;
  e.method = method;
  e.value = raw;
  if (!(raw >= 0.0) || raw > 1.0) {
    e.value = std::isnan(raw) ? raw : std::fmin(1.0, std::fmax(0.0, raw));
    e.diag.clamped = true;
    e.diag.raw = raw;
  }
  return e;
}

/// Outcome of `validate`: hard violations plus the NOMA feasibility flag.
struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  bool feasible = true;
  bool ok() const { return violations.empty(); }
};

inline bool isPositiveInteger(double v) { return v >= 1.0 && std::floor(v) == v && std::isfinite(v); }

inline ValidationReport validate(const GeometryConfig& g, const ChannelConfig& c,
                                 const LinkBudget& b, const RateTargets& r) {
  ValidationReport rep;
  auto require = [&rep](bool cond, std::string msg) {
    if (!cond) rep.violations.push_back(std::move(msg));
  };
  require(std::isfinite(g.r0) && std::isfinite(g.R) && std::isfinite(g.D), "radii must be finite");
  require(g.r0 > 0.0, "r0 > 0 violated");
  require(g.r0 < g.R, "r0 < R violated");
  require(g.R < g.D, "R < D violated");

  require(c.alpha >= 2.0, "alpha >= 2 violated");
  require(c.m >= 1.0, "m >= 1 violated");
  if (c.losMix) {
    require(c.losMix->pLoS >= 0.0 && c.losMix->pLoS <= 1.0, "0 <= pLoS <= 1 violated");
    require(c.losMix->mLoS >= 1.0, "mLoS >= 1 violated");
  }

  require(b.pu > 0.0, "pu > 0 violated");
  require(b.sigma2 > 0.0, "sigma2 > 0 violated");
  require(b.aW2 > 0.0 && b.aV2 > 0.0, "power fractions must be positive");
  require(std::fabs(b.aW2 + b.aV2 - 1.0) <= 1e-9, "aW2 + aV2 = 1 violated");
  if (b.aV2 <= b.aW2)
    rep.warnings.push_back("aV2 <= aW2: far user does not get the larger power share");

  require(r.rW > 0.0 && r.rV > 0.0 && r.rO > 0.0 && r.rOW > 0.0 && r.rOV > 0.0,
          "target rates must be positive");

  rep.feasible = b.aV2 - r.epsV() * b.aW2 > 0.0;
  if (!rep.feasible)
    rep.warnings.push_back("infeasible power split: far-user NOMA outage is identically 1");
  return rep;
}

enum class NomaUser { Far, Near };

/// Threshold scale M such that a receiver at distance d with gain g is in
/// outage iff g < M * sigma2 * d^alpha. nullopt means the far message can
/// never be decoded (aV2 - epsV * aW2 <= 0).
inline std::optional<double> nomaThresholdScale(const LinkBudget& b, const RateTargets& r,
                                                NomaUser which) {
  const double epsV = r.epsV();
  const double margin = b.aV2 - epsV * b.aW2;
  if (!(margin > 0.0)) return std::nullopt;
  const double mV = epsV / (b.pu * margin);
  if (which == NomaUser::Far) return mV;
  const double mW = r.epsW() / (b.pu * b.aW2);
  return std::fmax(mV, mW);
}

/// M_w alone (near user's own-message threshold), used for diagnostics.
inline double nearOwnThresholdScale(const LinkBudget& b, const RateTargets& r) {
  return r.epsW() / (b.pu * b.aW2);
}

/// Threshold scale for any scenario (OMA users get eps/P_u).
inline std::optional<double> thresholdScale(const LinkBudget& b, const RateTargets& r, Scenario s) {
  switch (s) {
    case Scenario::NomaFar: return nomaThresholdScale(b, r, NomaUser::Far);
    case Scenario::NomaNear: return nomaThresholdScale(b, r, NomaUser::Near);
    case Scenario::OmaSingle: return r.epsO() / b.pu;
    case Scenario::OmaPairNear: return r.epsOW() / b.pu;
    case Scenario::OmaPairFar: return r.epsOV() / b.pu;
  }
  return std::nullopt;
}

/// Nakagami shape matching a Rician K-factor: (K+1)^2 / (2K+1).
inline double ricianKToNakagamiM(double k) {
  if (!(k >= 0.0)) throw DomainError("ricianKToNakagamiM: K must be nonnegative");
  return (k + 1.0) * (k + 1.0) / (2.0 * k + 1.0);
}

}  // namespace u2x
