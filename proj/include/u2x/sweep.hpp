#pragma once

// Parameter sweeps driven by a JSON config file.
//
// A config holds one base parameter set, an optional list of named runs that
// override parts of it, and a sweep section naming one axis. Every run
// produces its own table of rows ordered by
//   axis value -> scenario -> metric -> method,
// followed by the system-level metrics for that axis value. Rows are
// evaluated on a worker pool but always written in that order, and Monte
// Carlo rows use the counter-based streams, so the CSV depends only on the
// config content.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "u2x/analytic.hpp"
#include "u2x/metrics.hpp"
#include "u2x/model.hpp"
#include "u2x/montecarlo.hpp"

namespace u2x {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParamSet {
  GeometryConfig geometry;
  ChannelConfig channel;
  LinkBudget budget{dbmToWatts(20.0), dbmToWatts(-90.0), 0.4, 0.6};
  RateTargets rates;
};

inline OutageInputs inputsFor(const ParamSet& p, Scenario s) {
  return {p.geometry, p.channel, p.budget, p.rates, s};
}

enum class SweepMetric {
  Outage,
  Ergodic,
  OutageSumRate,
  SystemOutage,
  SpectrumEfficiency,
  SeGapOma1,
  SeGapOma2,
};

inline std::string_view toString(SweepMetric m) {
  switch (m) {
    case SweepMetric::Outage: return "outage";
    case SweepMetric::Ergodic: return "ergodic";
    case SweepMetric::OutageSumRate: return "outage_sum_rate";
    case SweepMetric::SystemOutage: return "system_outage";
    case SweepMetric::SpectrumEfficiency: return "spectrum_efficiency";
    case SweepMetric::SeGapOma1: return "se_gap_oma1";
    case SweepMetric::SeGapOma2: return "se_gap_oma2";
  }
  return "?";
}

inline std::optional<SweepMetric> sweepMetricFromString(std::string_view s) {
  for (auto m : {SweepMetric::Outage, SweepMetric::Ergodic, SweepMetric::OutageSumRate,
                 SweepMetric::SystemOutage, SweepMetric::SpectrumEfficiency, SweepMetric::SeGapOma1,
                 SweepMetric::SeGapOma2})
    if (toString(m) == s) return m;
  return std::nullopt;
}

/// Metrics evaluated per receiver (one row per scenario); the rest describe
/// the whole system and get their own pseudo-scenarios.
inline bool perUserMetric(SweepMetric m) {
  return m == SweepMetric::Outage || m == SweepMetric::Ergodic;
}

struct RunSpec {
  std::string label;  // empty for the implicit single run
  ParamSet params;
};

struct TableOneConfig {
  std::vector<double> puDbm;
  std::vector<int> mValues = {1, 2};
  std::size_t window = 5;
  std::uint64_t farRateTrials = 100'000;
};

struct SweepSpec {
  int schemaVersion = 1;
  std::string name;
  ParamSet base;
  std::vector<RunSpec> runs;  // always at least one after parsing
  std::string axis;           // empty when the config only asks for table1
  std::vector<double> values;
  std::vector<Scenario> scenarios;
  std::vector<SweepMetric> metrics;
  std::vector<Method> methods;
  std::optional<std::uint64_t> trials;
  std::optional<std::uint64_t> seed;
  ErgodicSeriesControl series;
  std::optional<TableOneConfig> table1;
  std::string sourceText;  // raw config bytes, hashed into the summary
};

// --------------------------------------------------------------------------
// Axes

inline const std::vector<std::string>& knownAxes() {
  static const std::vector<std::string> axes = {
      "pu_dbm", "sigma2_dbm", "r_w", "r_v",  "r_o", "r_ow", "r_ov", "r_near", "r_far",
      "r0",     "R",          "D",   "alpha", "m",  "a_w2", "a_v2", "p_los"};
  return axes;
}

inline bool isKnownAxis(std::string_view a) {
  const auto& k = knownAxes();
  return std::find(k.begin(), k.end(), a) != k.end();
}

/// Set one named parameter. r_near moves every near/single OMA target with
/// the NOMA near target; r_far does the same for the far targets.
inline void applyAxis(ParamSet& p, std::string_view axis, double v) {
  if (axis == "pu_dbm") p.budget.pu = dbmToWatts(v);
  else if (axis == "sigma2_dbm") p.budget.sigma2 = dbmToWatts(v);
  else if (axis == "r_w") p.rates.rW = v;
  else if (axis == "r_v") p.rates.rV = v;
  else if (axis == "r_o") p.rates.rO = v;
  else if (axis == "r_ow") p.rates.rOW = v;
  else if (axis == "r_ov") p.rates.rOV = v;
  else if (axis == "r_near") p.rates.rW = p.rates.rOW = p.rates.rO = v;
  else if (axis == "r_far") p.rates.rV = p.rates.rOV = v;
  else if (axis == "r0") p.geometry.r0 = v;
  else if (axis == "R") p.geometry.R = v;
  else if (axis == "D") p.geometry.D = v;
  else if (axis == "alpha") p.channel.alpha = v;
  else if (axis == "m") p.channel.m = v;
  else if (axis == "a_w2") {
    p.budget.aW2 = v;
    p.budget.aV2 = 1.0 - v;
  } else if (axis == "a_v2") {
    p.budget.aV2 = v;
    p.budget.aW2 = 1.0 - v;
  } else if (axis == "p_los") {
    if (!p.channel.losMix) throw ConfigError("axis p_los needs channel.los_mix");
    p.channel.losMix->pLoS = v;
  } else {
    throw ConfigError("unknown axis '" + std::string(axis) + "'");
  }
}

// --------------------------------------------------------------------------
// Config parsing

namespace detail {

using nlohmann::json;

inline std::string joinPath(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline void rejectUnknownKeys(const json& obj, const std::string& path,
                              std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("field '" + joinPath(path, key) + "': unknown key");
  }
}

inline const json& requireObject(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError("field '" + path + "': expected an object");
  return j;
}

inline std::optional<double> optNumber(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_number())
    throw ConfigError("field '" + joinPath(path, key) + "': expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ConfigError("field '" + joinPath(path, key) + "': must be finite");
  return v;
}

inline std::optional<std::uint64_t> optUnsigned(const json& obj, const std::string& key,
                                                const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_number_unsigned())
    throw ConfigError("field '" + joinPath(path, key) + "': expected a nonnegative integer");
  return it->get<std::uint64_t>();
}

inline std::vector<std::string> stringList(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError("field '" + path + "': expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ConfigError("field '" + path + "': expected an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

/// Round to 12 significant digits so generated grids print cleanly.
inline double tidy(double v) {
  if (v == 0.0) return 0.0;
  const double scale = std::pow(10.0, 11 - std::floor(std::log10(std::fabs(v))));
  return std::round(v * scale) / scale;
}

inline std::vector<double> parseGrid(const json& obj, const std::string& path) {
  const bool hasValues = obj.contains("values");
  const bool hasRange = obj.contains("range");
  if (hasValues == hasRange)
    throw ConfigError("field '" + path + "': give exactly one of 'values' or 'range'");
  std::vector<double> out;
  if (hasValues) {
    const auto& v = obj.at("values");
    if (!v.is_array()) throw ConfigError("field '" + joinPath(path, "values") + "': expected an array");
    for (const auto& e : v) {
      if (!e.is_number())
        throw ConfigError("field '" + joinPath(path, "values") + "': expected numbers");
      out.push_back(e.get<double>());
    }
  } else {
    const std::string rp = joinPath(path, "range");
    const auto& r = requireObject(obj.at("range"), rp);
    rejectUnknownKeys(r, rp, {"start", "stop", "step"});
    const auto start = optNumber(r, "start", rp);
    const auto stop = optNumber(r, "stop", rp);
    const auto step = optNumber(r, "step", rp);
    if (!start || !stop || !step) throw ConfigError("field '" + rp + "': needs start, stop and step");
    if (!(*step > 0.0)) throw ConfigError("field '" + rp + ".step': must be positive");
    if (*stop < *start) throw ConfigError("field '" + rp + "': stop < start");
    const auto n = static_cast<std::size_t>(std::floor((*stop - *start) / *step + 1e-9)) + 1;
    if (n > 100000) throw ConfigError("field '" + rp + "': more than 100000 points");
    for (std::size_t i = 0; i < n; ++i) out.push_back(tidy(*start + static_cast<double>(i) * *step));
  }
  if (out.empty()) throw ConfigError("field '" + joinPath(path, "values") + "': must not be empty");
  for (std::size_t i = 1; i < out.size(); ++i)
    if (!(out[i] > out[i - 1]))
      throw ConfigError("field '" + joinPath(path, "values") + "': must be strictly increasing");
  return out;
}

/// Overlay the parameter sections present in `obj` onto `p`.
inline void parseParams(const json& obj, ParamSet& p, const std::string& path) {
  if (const auto it = obj.find("geometry"); it != obj.end()) {
    const std::string gp = joinPath(path, "geometry");
    requireObject(*it, gp);
    rejectUnknownKeys(*it, gp, {"r0", "R", "D"});
    if (auto v = optNumber(*it, "r0", gp)) p.geometry.r0 = *v;
    if (auto v = optNumber(*it, "R", gp)) p.geometry.R = *v;
    if (auto v = optNumber(*it, "D", gp)) p.geometry.D = *v;
  }
  if (const auto it = obj.find("channel"); it != obj.end()) {
    const std::string cp = joinPath(path, "channel");
    requireObject(*it, cp);
    rejectUnknownKeys(*it, cp, {"alpha", "m", "los_mix"});
    if (auto v = optNumber(*it, "alpha", cp)) p.channel.alpha = *v;
    if (auto v = optNumber(*it, "m", cp)) p.channel.m = *v;
    if (const auto lm = it->find("los_mix"); lm != it->end()) {
      const std::string lp = joinPath(cp, "los_mix");
      if (lm->is_null()) {
        p.channel.losMix.reset();
      } else {
        requireObject(*lm, lp);
        rejectUnknownKeys(*lm, lp, {"p_los", "m_los"});
        LosMixture mix = p.channel.losMix.value_or(LosMixture{});
        if (auto v = optNumber(*lm, "p_los", lp)) mix.pLoS = *v;
        if (auto v = optNumber(*lm, "m_los", lp)) mix.mLoS = *v;
        p.channel.losMix = mix;
      }
    }
  }
  if (const auto it = obj.find("budget"); it != obj.end()) {
    const std::string bp = joinPath(path, "budget");
    requireObject(*it, bp);
    rejectUnknownKeys(*it, bp, {"pu_dbm", "pu_w", "sigma2_dbm", "sigma2_w", "a_w2", "a_v2"});
    if (it->contains("pu_dbm") && it->contains("pu_w"))
      throw ConfigError("field '" + bp + "': give pu_dbm or pu_w, not both");
    if (it->contains("sigma2_dbm") && it->contains("sigma2_w"))
      throw ConfigError("field '" + bp + "': give sigma2_dbm or sigma2_w, not both");
    if (auto v = optNumber(*it, "pu_dbm", bp)) p.budget.pu = dbmToWatts(*v);
    if (auto v = optNumber(*it, "pu_w", bp)) p.budget.pu = *v;
    if (auto v = optNumber(*it, "sigma2_dbm", bp)) p.budget.sigma2 = dbmToWatts(*v);
    if (auto v = optNumber(*it, "sigma2_w", bp)) p.budget.sigma2 = *v;
    const auto aw = optNumber(*it, "a_w2", bp);
    const auto av = optNumber(*it, "a_v2", bp);
    if (aw) p.budget.aW2 = *aw;
    if (av) p.budget.aV2 = *av;
    if (aw && !av) p.budget.aV2 = 1.0 - *aw;
    if (av && !aw) p.budget.aW2 = 1.0 - *av;
  }
  if (const auto it = obj.find("rates"); it != obj.end()) {
    const std::string rp = joinPath(path, "rates");
    requireObject(*it, rp);
    rejectUnknownKeys(*it, rp, {"r_w", "r_v", "r_o", "r_ow", "r_ov"});
    if (auto v = optNumber(*it, "r_w", rp)) p.rates.rW = *v;
    if (auto v = optNumber(*it, "r_v", rp)) p.rates.rV = *v;
    if (auto v = optNumber(*it, "r_o", rp)) p.rates.rO = *v;
    if (auto v = optNumber(*it, "r_ow", rp)) p.rates.rOW = *v;
    if (auto v = optNumber(*it, "r_ov", rp)) p.rates.rOV = *v;
  }
}

inline std::string locate(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline void checkParams(const ParamSet& p, const std::string& where) {
  const auto rep = validate(p.geometry, p.channel, p.budget, p.rates);
  if (!rep.ok()) throw ConfigError(where + ": " + rep.violations.front());
}

}  // namespace detail

/// Parse a config document. Throws ConfigError with a line/column position
/// for malformed JSON and a dotted field path for schema problems.
inline SweepSpec parseSweepSpec(std::string_view text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON at " + detail::locate(text, e.byte == 0 ? 0 : e.byte - 1) +
                      ": " + e.what());
  }
  detail::requireObject(root, "<root>");
  detail::rejectUnknownKeys(root, "", {"schema_version", "name", "geometry", "channel", "budget",
                                       "rates", "sweep", "runs", "monte_carlo", "series", "table1"});
  SweepSpec spec;
  spec.sourceText = std::string(text);
  const auto version = detail::optUnsigned(root, "schema_version", "");
  if (!version) throw ConfigError("field 'schema_version': required");
  if (*version != 1) throw ConfigError("field 'schema_version': unsupported version " + std::to_string(*version));
  spec.schemaVersion = 1;
  if (const auto it = root.find("name"); it != root.end()) {
    if (!it->is_string()) throw ConfigError("field 'name': expected a string");
    spec.name = it->get<std::string>();
  }
  detail::parseParams(root, spec.base, "");

  if (const auto it = root.find("runs"); it != root.end()) {
    if (!it->is_array() || it->empty()) throw ConfigError("field 'runs': expected a nonempty array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string rp = "runs[" + std::to_string(i) + "]";
      const auto& r = detail::requireObject((*it)[i], rp);
      detail::rejectUnknownKeys(r, rp, {"label", "geometry", "channel", "budget", "rates"});
      const auto lab = r.find("label");
      if (lab == r.end() || !lab->is_string() || lab->get<std::string>().empty())
        throw ConfigError("field '" + rp + ".label': required nonempty string");
      RunSpec run{lab->get<std::string>(), spec.base};
      for (char c : run.label)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
          throw ConfigError("field '" + rp + ".label': use letters, digits, '_', '-' or '.'");
      if (!seen.insert(run.label).second) throw ConfigError("field '" + rp + ".label': duplicate label");
      detail::parseParams(r, run.params, rp);
      spec.runs.push_back(std::move(run));
    }
  } else {
    spec.runs.push_back({"", spec.base});
  }

  if (const auto it = root.find("monte_carlo"); it != root.end()) {
    detail::requireObject(*it, "monte_carlo");
    detail::rejectUnknownKeys(*it, "monte_carlo", {"trials", "seed"});
    spec.trials = detail::optUnsigned(*it, "trials", "monte_carlo");
    spec.seed = detail::optUnsigned(*it, "seed", "monte_carlo");
  }
  if (const auto it = root.find("series"); it != root.end()) {
    detail::requireObject(*it, "series");
    detail::rejectUnknownKeys(*it, "series", {"k_max", "rel_tol"});
    if (auto v = detail::optUnsigned(*it, "k_max", "series")) spec.series.kMax = *v;
    if (auto v = detail::optNumber(*it, "rel_tol", "series")) spec.series.relTol = *v;
    if (spec.series.kMax < 64) throw ConfigError("field 'series.k_max': must be at least 64");
    if (!(spec.series.relTol > 0.0)) throw ConfigError("field 'series.rel_tol': must be positive");
  }

  if (const auto it = root.find("sweep"); it != root.end()) {
    const auto& s = detail::requireObject(*it, "sweep");
    detail::rejectUnknownKeys(s, "sweep", {"axis", "values", "range", "scenarios", "metrics", "methods"});
    const auto ax = s.find("axis");
    if (ax == s.end() || !ax->is_string()) throw ConfigError("field 'sweep.axis': required string");
    spec.axis = ax->get<std::string>();
    if (!isKnownAxis(spec.axis)) throw ConfigError("field 'sweep.axis': unknown axis '" + spec.axis + "'");
    spec.values = detail::parseGrid(s, "sweep");

    const auto scen = s.find("scenarios");
    if (scen != s.end()) {
      for (const auto& name : detail::stringList(*scen, "sweep.scenarios")) {
        const auto sc = scenarioFromString(name);
        if (!sc) throw ConfigError("field 'sweep.scenarios': unknown scenario '" + name + "'");
        spec.scenarios.push_back(*sc);
      }
    }
    const auto met = s.find("metrics");
    if (met == s.end()) throw ConfigError("field 'sweep.metrics': required");
    for (const auto& name : detail::stringList(*met, "sweep.metrics")) {
      const auto m = sweepMetricFromString(name);
      if (!m) throw ConfigError("field 'sweep.metrics': unknown metric '" + name + "'");
      spec.metrics.push_back(*m);
    }
    const auto meth = s.find("methods");
    if (meth == s.end()) throw ConfigError("field 'sweep.methods': required");
    for (const auto& name : detail::stringList(*meth, "sweep.methods")) {
      const auto m = methodFromString(name);
      if (!m) throw ConfigError("field 'sweep.methods': unknown method '" + name + "'");
      spec.methods.push_back(*m);
    }
    if (spec.metrics.empty()) throw ConfigError("field 'sweep.metrics': must not be empty");
    if (spec.methods.empty()) throw ConfigError("field 'sweep.methods': must not be empty");
    const bool needsScenario = std::any_of(spec.metrics.begin(), spec.metrics.end(), perUserMetric);
    if (needsScenario && spec.scenarios.empty())
      throw ConfigError("field 'sweep.scenarios': required for outage/ergodic metrics");
  }

  if (const auto it = root.find("table1"); it != root.end()) {
    const auto& t = detail::requireObject(*it, "table1");
    detail::rejectUnknownKeys(t, "table1", {"values", "range", "m_values", "window", "far_rate_trials"});
    TableOneConfig tc;
    tc.puDbm = detail::parseGrid(t, "table1");
    if (const auto mv = t.find("m_values"); mv != t.end()) {
      if (!mv->is_array() || mv->empty()) throw ConfigError("field 'table1.m_values': expected a nonempty array");
      tc.mValues.clear();
      for (const auto& e : *mv) {
        if (!e.is_number_integer() || e.get<int>() < 1)
          throw ConfigError("field 'table1.m_values': expected positive integers");
        tc.mValues.push_back(e.get<int>());
      }
    }
    if (auto v = detail::optUnsigned(t, "window", "table1")) tc.window = *v;
    if (auto v = detail::optUnsigned(t, "far_rate_trials", "table1")) tc.farRateTrials = *v;
    if (tc.window < 3) throw ConfigError("field 'table1.window': must be at least 3");
    if (tc.puDbm.size() < tc.window)
      throw ConfigError("field 'table1': grid has fewer points than the slope window");
    spec.table1 = tc;
  }

  if (spec.axis.empty() && !spec.table1)
    throw ConfigError("config needs a 'sweep' or a 'table1' section");
  return spec;
}

/// Checks that need the final trial/seed settings (CLI flags may supply
/// them): Monte Carlo requested => trials and seed known, and every run is
/// valid at every axis value.
inline void checkSweepSpec(const SweepSpec& spec) {
  const bool wantsMc =
      std::find(spec.methods.begin(), spec.methods.end(), Method::MonteCarlo) != spec.methods.end();
  if (wantsMc && (!spec.trials || !spec.seed))
    throw ConfigError("field 'monte_carlo': trials and seed are required when Monte Carlo runs");
  if (spec.table1 && !spec.seed)
    throw ConfigError("field 'monte_carlo.seed': required for the table1 far-user rate fit");
  if (spec.trials && *spec.trials < 1000)
    throw ConfigError("field 'monte_carlo.trials': at least 1000 trials required");
  for (const auto& run : spec.runs) {
    const std::string where = run.label.empty() ? std::string("base parameters") : "run '" + run.label + "'";
    if (spec.axis.empty()) {
      detail::checkParams(run.params, where);
      continue;
    }
    if (spec.axis == "p_los" && !run.params.channel.losMix)
      throw ConfigError(where + ": axis p_los needs channel.los_mix");
    for (double v : spec.values) {
      ParamSet p = run.params;
      applyAxis(p, spec.axis, v);
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      detail::checkParams(p, where + " at " + spec.axis + "=" + std::string(buf, res.ptr));
    }
  }
}

// --------------------------------------------------------------------------
// Evaluation

struct SweepRow {
  std::string axisName;
  double axisValue = 0.0;
  std::string scenario;
  std::string metric;
  std::string method;
  std::optional<double> estimate;
  std::optional<double> rawUnclamped;
  std::optional<double> ciLow;
  std::optional<double> ciHigh;
  std::optional<std::uint64_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<double> truncationError;
  Diagnostics diag;
  std::optional<std::string> error;
};

struct SweepTask {
  std::size_t run = 0;
  double axisValue = 0.0;
  std::optional<Scenario> scenario;  // per-user metrics
  std::string systemLabel;           // system metrics
  SweepMetric metric = SweepMetric::Outage;
  Method method = Method::Exact;
};

/// True when (scenario, metric, method) has an evaluator under `p`.
inline bool supported(const ParamSet& p, std::optional<Scenario> s, std::string_view system,
                      SweepMetric metric, Method method) {
  const bool mix = p.channel.losMix.has_value();
  if (method == Method::MonteCarlo) {
    return metric == SweepMetric::Outage || metric == SweepMetric::Ergodic ||
           metric == SweepMetric::OutageSumRate;
  }
  switch (metric) {
    case SweepMetric::Outage:
      if (method == Method::Exact) return !mix || isNoma(*s);
      if (method == Method::Asymptotic) return !mix && isNoma(*s);
      return method == Method::NoFadingLimit && !mix;
    case SweepMetric::Ergodic:
      if (mix) return false;
      if (method == Method::Exact) return *s != Scenario::NomaFar;
      return method == Method::Asymptotic && *s == Scenario::NomaFar;
    case SweepMetric::OutageSumRate:
      if (method == Method::Exact) return true;
      return !mix && (method == Method::Asymptotic || method == Method::NoFadingLimit);
    case SweepMetric::SystemOutage:
      if (system != "NomaPair" && mix) return false;
      return method == Method::Exact || (!mix && method == Method::NoFadingLimit);
    case SweepMetric::SpectrumEfficiency:
    case SweepMetric::SeGapOma1:
    case SweepMetric::SeGapOma2: return !mix && method == Method::Exact;
  }
  return false;
}

/// Rows of one run in output order.
inline std::vector<SweepTask> planRun(const SweepSpec& spec, std::size_t run) {
  std::vector<SweepTask> tasks;
  const ParamSet& base = spec.runs[run].params;
  for (double v : spec.values) {
    ParamSet p = base;
    applyAxis(p, spec.axis, v);
    for (Scenario s : spec.scenarios)
      for (SweepMetric m : spec.metrics)
        if (perUserMetric(m))
          for (Method meth : spec.methods)
            if (supported(p, s, "", m, meth)) tasks.push_back({run, v, s, "", m, meth});
    for (SweepMetric m : spec.metrics) {
      if (perUserMetric(m)) continue;
      std::vector<std::string> systems;
      if (m == SweepMetric::OutageSumRate) systems = {"NomaPair"};
      else if (m == SweepMetric::SystemOutage) systems = {"NomaPair", "OmaPair", "OmaSingle"};
      else systems = {"System"};
      for (const auto& sys : systems)
        for (Method meth : spec.methods)
          if (supported(p, std::nullopt, sys, m, meth)) tasks.push_back({run, v, std::nullopt, sys, m, meth});
    }
  }
  return tasks;
}

namespace detail {

inline MetricEstimate outageBy(const OutageInputs& in, Method method, const MonteCarloOptions& mc) {
  switch (method) {
    case Method::Exact: return in.channel.losMix ? outageLosMixture(in) : outageExact(in);
    case Method::Asymptotic: return outageAsymptotic(in);
    case Method::NoFadingLimit: return outageNoFading(in);
    case Method::MonteCarlo: return estimate(in, MonteCarloMetric::Outage, mc);
  }
  throw DomainError("unknown method");
}

inline void fillFromEstimate(SweepRow& row, const MetricEstimate& e) {
  row.estimate = e.value;
  row.rawUnclamped = e.diag.raw.value_or(e.value);
  row.diag = e.diag;
  if (e.method == Method::MonteCarlo) {
    row.ciLow = e.ciLow;
    row.ciHigh = e.ciHigh;
  }
  if (e.diag.seriesResidual) row.truncationError = *e.diag.seriesResidual;
}

}  // namespace detail

/// Evaluate one planned row. Evaluation errors are recorded on the row.
/// `mcJobs` threads share the row's Monte Carlo trials.
inline SweepRow evaluateTask(const SweepSpec& spec, const SweepTask& t, unsigned mcJobs = 1) {
  SweepRow row;
  row.axisName = spec.axis;
  row.axisValue = t.axisValue;
  row.scenario = t.scenario ? std::string(toString(*t.scenario)) : t.systemLabel;
  row.metric = std::string(toString(t.metric));
  row.method = std::string(toString(t.method));

  ParamSet p = spec.runs[t.run].params;
  applyAxis(p, spec.axis, t.axisValue);
  MonteCarloOptions mc;
  if (t.method == Method::MonteCarlo) {
    mc.trials = spec.trials.value_or(0);
    mc.seeds.masterSeed = spec.seed.value_or(0);
    mc.jobs = mcJobs;
    row.trials = mc.trials;
    row.seed = mc.seeds.masterSeed;
  }
  try {
    switch (t.metric) {
      case SweepMetric::Outage:
        detail::fillFromEstimate(row, detail::outageBy(inputsFor(p, *t.scenario), t.method, mc));
        break;
      case SweepMetric::Ergodic: {
        const auto in = inputsFor(p, *t.scenario);
        MetricEstimate e;
        if (t.method == Method::MonteCarlo) e = estimate(in, MonteCarloMetric::Ergodic, mc);
        else if (*t.scenario == Scenario::NomaNear) e = ergodicNearNoma(in, spec.series);
        else if (*t.scenario == Scenario::NomaFar) e = ergodicFarNoma(in);
        else e = ergodicOma(in, spec.series);
        detail::fillFromEstimate(row, e);
        break;
      }
      case SweepMetric::OutageSumRate: {
        if (t.method == Method::MonteCarlo) {
          detail::fillFromEstimate(
              row, estimate(inputsFor(p, Scenario::NomaNear), MonteCarloMetric::OutageSumRate, mc));
          break;
        }
        const auto pv = detail::outageBy(inputsFor(p, Scenario::NomaFar), t.method, mc);
        const auto pw = detail::outageBy(inputsFor(p, Scenario::NomaNear), t.method, mc);
        row.estimate = row.rawUnclamped = outageSumRate(pv.value, pw.value, p.rates);
        row.diag.clamped = pv.diag.clamped || pw.diag.clamped;
        row.diag.infeasible = pv.diag.infeasible;
        row.diag.thresholdMismatch = pw.diag.thresholdMismatch;
        if (pv.diag.printedForm && pw.diag.printedForm)
          row.diag.printedForm = outageSumRate(*pv.diag.printedForm, *pw.diag.printedForm, p.rates);
        break;
      }
      case SweepMetric::SystemOutage: {
        Scenario a = Scenario::NomaFar, b = Scenario::NomaNear;
        if (t.systemLabel == "OmaPair") a = Scenario::OmaPairFar, b = Scenario::OmaPairNear;
        if (t.systemLabel == "OmaSingle") a = b = Scenario::OmaSingle;
        const auto pa = detail::outageBy(inputsFor(p, a), t.method, mc);
        const auto pb = detail::outageBy(inputsFor(p, b), t.method, mc);
        row.estimate = row.rawUnclamped = pa.value * pb.value;
        row.diag.clamped = pa.diag.clamped || pb.diag.clamped;
        row.diag.infeasible = pa.diag.infeasible;
        if (pa.diag.printedForm && pb.diag.printedForm)
          row.diag.printedForm = *pa.diag.printedForm * *pb.diag.printedForm;
        break;
      }
      case SweepMetric::SpectrumEfficiency:
      case SweepMetric::SeGapOma1:
      case SweepMetric::SeGapOma2: {
        const auto se = spectrumEfficiency(inputsFor(p, Scenario::NomaNear), spec.series);
        const double v = t.metric == SweepMetric::SpectrumEfficiency ? se.tauNoma
                         : t.metric == SweepMetric::SeGapOma1        ? se.tauGapVsOma1
                                                                     : se.tauGapVsOma2;
        row.estimate = row.rawUnclamped = v;
        row.truncationError = se.seriesResidual;
        row.diag.seriesResidual = se.seriesResidual;
        row.diag.converged = se.converged;
        break;
      }
    }
  } catch (const std::exception& e) {
    row.estimate.reset();
    row.rawUnclamped.reset();
    row.diag.converged = false;
    row.error = e.what();
  }
  return row;
}

struct FitRecord {
  std::string run;
  std::string scenario;
  std::string metric;
  std::string method;
  std::string kind;  // "diversity_order" or "high_snr_slope"
  std::optional<double> value;
  std::optional<std::string> error;
};

struct RunOutput {
  std::string label;
  std::vector<SweepRow> rows;
  std::vector<FitRecord> fits;
};

struct SweepResult {
  std::vector<RunOutput> runs;
  std::vector<TableOneRow> table1;
  std::string configHash;
  double wallSeconds = 0.0;
  unsigned jobs = 1;
  bool anyFailure() const {
    for (const auto& r : runs)
      for (const auto& row : r.rows)
        if (row.error || !row.diag.converged) return true;
    return false;
  }
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hashTag(std::string_view bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

namespace detail {

/// Slope fits along a transmit-power axis for every per-user curve.
inline std::vector<FitRecord> fitCurves(const SweepSpec& spec, const RunOutput& out) {
  std::vector<FitRecord> fits;
  if (spec.axis != "pu_dbm" || spec.values.size() < 5) return fits;
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<MetricCurve, std::vector<double>>> curves;
  std::vector<std::tuple<std::string, std::string, std::string>> order;
  for (const auto& row : out.rows) {
    if (row.metric != "outage" && row.metric != "ergodic") continue;
    const auto key = std::make_tuple(row.scenario, row.metric, row.method);
    auto [it, fresh] = curves.try_emplace(key);
    if (fresh) order.push_back(key);
    auto& [curve, ci] = it->second;
    curve.kind = row.metric == "outage" ? MetricKind::OutageProb : MetricKind::RateBpcu;
    curve.xDb.push_back(row.axisValue);
    curve.y.push_back(row.estimate.value_or(std::nan("")));
    ci.push_back(row.ciHigh && row.ciLow ? 0.5 * (*row.ciHigh - *row.ciLow) : 0.0);
  }
  for (const auto& key : order) {
    const auto& [curve, ci] = curves.at(key);
    FitRecord f{out.label, std::get<0>(key), std::get<1>(key), std::get<2>(key),
                curve.kind == MetricKind::OutageProb ? "diversity_order" : "high_snr_slope", {}, {}};
    try {
      if (curve.kind == MetricKind::OutageProb) {
        const bool mcCurve = std::get<2>(key) == "monte_carlo";
        f.value = diversityOrder(curve, 5, mcCurve ? std::span<const double>(ci) : std::span<const double>{});
      } else {
        f.value = highSnrSlope(curve, 5);
      }
    } catch (const MetricError& e) {
      f.error = e.what();
    }
    fits.push_back(std::move(f));
  }
  return fits;
}

}  // namespace detail

/// Evaluate every run of `spec`, rows spread over `jobs` workers.
inline SweepResult runSweep(const SweepSpec& spec, unsigned jobs) {
  checkSweepSpec(spec);
  const auto start = std::chrono::steady_clock::now();
  SweepResult result;
  result.configHash = hashTag(spec.sourceText);
  result.jobs = std::max(1u, jobs);

  if (!spec.axis.empty()) {
    std::vector<SweepTask> tasks;
    std::vector<std::size_t> firstOfRun;
    for (std::size_t r = 0; r < spec.runs.size(); ++r) {
      firstOfRun.push_back(tasks.size());
      auto plan = planRun(spec, r);
      tasks.insert(tasks.end(), plan.begin(), plan.end());
    }
    firstOfRun.push_back(tasks.size());

    std::vector<SweepRow> rows(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        rows[i] = evaluateTask(spec, tasks[i]);
      }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(result.jobs, static_cast<unsigned>(tasks.size())));
    if (n == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    }

    for (std::size_t r = 0; r < spec.runs.size(); ++r) {
      RunOutput out;
      out.label = spec.runs[r].label;
      out.rows.assign(std::make_move_iterator(rows.begin() + firstOfRun[r]),
                      std::make_move_iterator(rows.begin() + firstOfRun[r + 1]));
      out.fits = detail::fitCurves(spec, out);
      result.runs.push_back(std::move(out));
    }
  }

  if (spec.table1) {
    TableOneSpec ts;
    ts.base = inputsFor(spec.runs.front().params, Scenario::NomaNear);
    ts.puDbm = spec.table1->puDbm;
    ts.mValues = spec.table1->mValues;
    ts.window = spec.table1->window;
    ts.farRate.trials = spec.table1->farRateTrials;
    ts.farRate.seeds.masterSeed = *spec.seed;
    ts.farRate.jobs = result.jobs;
    ts.series = spec.series;
    result.table1 = tableOne(ts);
  }

  result.wallSeconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// --------------------------------------------------------------------------
// Output

inline std::string formatNumber(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// RFC 4180 field: quoted only when it contains a comma, quote or line break.
inline std::string csvField(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline constexpr std::string_view kCsvHeader =
    "axis_name,axis_value,scenario,metric,method,estimate,raw_unclamped,ci_low,ci_high,trials,seed,"
    "series_truncation_error";

/// CSV with CRLF line ends; absent values are empty fields.
inline void writeCsv(std::ostream& os, const std::vector<SweepRow>& rows) {
  auto num = [](const std::optional<double>& v) { return v ? formatNumber(*v) : std::string(); };
  auto count = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string(); };
  os << kCsvHeader << "\r\n";
  for (const auto& r : rows) {
    os << csvField(r.axisName) << ',' << formatNumber(r.axisValue) << ',' << csvField(r.scenario) << ','
       << csvField(r.metric) << ',' << csvField(r.method) << ',' << num(r.estimate) << ','
       << num(r.rawUnclamped) << ',' << num(r.ciLow) << ',' << num(r.ciHigh) << ',' << count(r.trials)
       << ',' << count(r.seed) << ',' << num(r.truncationError) << "\r\n";
  }
}

/// Table-one results as rows of the same CSV schema (axis m).
inline std::vector<SweepRow> tableOneRows(const std::vector<TableOneRow>& table) {
  std::vector<SweepRow> rows;
  for (const auto& t : table) {
    SweepRow d;
    d.axisName = "m";
    d.axisValue = t.m;
    d.scenario = std::string(toString(t.scenario));
    d.metric = "diversity_order";
    d.method = "exact";
    d.estimate = d.rawUnclamped = t.diversity;
    rows.push_back(d);
    SweepRow s = d;
    s.metric = "high_snr_slope";
    s.method = t.slopeSource;
    s.estimate = s.rawUnclamped = t.slope;
    rows.push_back(s);
  }
  return rows;
}

namespace detail {

inline nlohmann::json numberOrNull(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

inline nlohmann::json rowDiagnostics(const SweepRow& r, std::size_t index) {
  using nlohmann::json;
  json flags = json::array();
  if (r.diag.clamped) flags.push_back("clamped");
  if (r.diag.infeasible) flags.push_back("infeasible");
  if (r.diag.thresholdMismatch) flags.push_back("threshold_mismatch");
  if (!r.diag.converged) flags.push_back("not_converged");
  if (r.error) flags.push_back("error");
  if (r.diag.printedForm) flags.push_back("printed_form_discrepancy");
  if (r.diag.seriesResidual) flags.push_back("series_residual");
  if (flags.empty()) return nullptr;
  json d = {{"row", index},
            {"axis_value", r.axisValue},
            {"scenario", r.scenario},
            {"metric", r.metric},
            {"method", r.method},
            {"flags", flags}};
  if (r.diag.raw) d["raw_unclamped"] = numberOrNull(r.diag.raw);
  if (r.diag.printedForm) {
    d["printed_form"] = numberOrNull(r.diag.printedForm);
    if (r.estimate) d["printed_discrepancy"] = numberOrNull(std::fabs(*r.diag.printedForm - *r.estimate));
  }
  if (r.diag.seriesResidual) d["series_residual"] = numberOrNull(r.diag.seriesResidual);
  if (r.error) d["error"] = *r.error;
  return d;
}

}  // namespace detail

/// Summary document: hash, timing, per-row diagnostics, fits, table one.
inline nlohmann::json summaryJson(const SweepSpec& spec, const SweepResult& res,
                                  const std::vector<std::string>& files) {
  using nlohmann::json;
  json doc;
  doc["schema_version"] = 1;
  doc["name"] = spec.name;
  doc["config_hash"] = res.configHash;
  doc["wall_time_s"] = res.wallSeconds;
  doc["jobs"] = res.jobs;
  doc["files"] = files;
  if (spec.trials) doc["trials"] = *spec.trials;
  if (spec.seed) doc["seed"] = *spec.seed;
  doc["axis"] = spec.axis;
  std::size_t failures = 0;
  json runs = json::array();
  for (const auto& r : res.runs) {
    json diags = json::array();
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      if (r.rows[i].error || !r.rows[i].diag.converged) ++failures;
      auto d = detail::rowDiagnostics(r.rows[i], i);
      if (!d.is_null()) diags.push_back(std::move(d));
    }
    json fits = json::array();
    for (const auto& f : r.fits) {
      json jf = {{"scenario", f.scenario}, {"metric", f.metric}, {"method", f.method}, {"kind", f.kind},
                 {"value", detail::numberOrNull(f.value)}};
      if (f.error) jf["error"] = *f.error;
      fits.push_back(std::move(jf));
    }
    runs.push_back({{"label", r.label}, {"rows", r.rows.size()}, {"diagnostics", diags}, {"fits", fits}});
  }
  doc["runs"] = runs;
  doc["failed_rows"] = failures;
  if (!res.table1.empty()) {
    json t = json::array();
    for (const auto& row : res.table1) {
      t.push_back({{"scenario", toString(row.scenario)},
                   {"m", row.m},
                   {"diversity_order", row.diversity},
                   {"expected_diversity_order", row.expectedDiversity},
                   {"diversity_ok", row.diversityOk},
                   {"high_snr_slope", row.slope},
                   {"expected_high_snr_slope", row.expectedSlope},
                   {"slope_ok", row.slopeOk},
                   {"slope_source", row.slopeSource}});
    }
    doc["table1"] = t;
  }
  return doc;
}

}  // namespace u2x
