// u2x: sweep, point and validate commands over a JSON config.
//
// Exit codes: 0 success, 1 config error, 2 convergence failure (--strict).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "u2x/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitConvergence = 2;

struct CommonOptions {
  std::string config;
  std::string out;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::uint64_t> trials;
  std::optional<std::uint64_t> seed;
  bool strict = false;
};

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw u2x::ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

u2x::SweepSpec loadSpec(const CommonOptions& o) {
  auto spec = u2x::parseSweepSpec(readFile(o.config));
  if (o.trials) spec.trials = *o.trials;
  if (o.seed) spec.seed = *o.seed;
  return spec;
}

void writeFile(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw u2x::ConfigError("cannot write '" + path.string() + "'");
  f << content;
}

json estimateJson(const u2x::SweepRow& r) {
  auto num = [](const std::optional<double>& v) -> json {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
  };
  json j = {{"axis_name", r.axisName},
            {"axis_value", r.axisValue},
            {"scenario", r.scenario},
            {"metric", r.metric},
            {"method", r.method},
            {"estimate", num(r.estimate)},
            {"raw_unclamped", num(r.rawUnclamped)},
            {"ci_low", num(r.ciLow)},
            {"ci_high", num(r.ciHigh)},
            {"trials", r.trials ? json(*r.trials) : json(nullptr)},
            {"seed", r.seed ? json(*r.seed) : json(nullptr)},
            {"series_truncation_error", num(r.truncationError)}};
  json d = {{"clamped", r.diag.clamped},
            {"infeasible", r.diag.infeasible},
            {"converged", r.diag.converged},
            {"threshold_mismatch", r.diag.thresholdMismatch},
            {"printed_form", num(r.diag.printedForm)}};
  if (r.error) d["error"] = *r.error;
  j["diagnostics"] = d;
  return j;
}

int runSweepCommand(const CommonOptions& o) {
  const auto spec = loadSpec(o);
  const auto result = u2x::runSweep(spec, o.jobs);

  fs::path out = o.out.empty() ? fs::path(o.config).stem().concat(".csv") : fs::path(o.out);
  const fs::path dir = out.parent_path();
  const std::string stem = out.stem().string();
  const std::string ext = out.has_extension() ? out.extension().string() : ".csv";
  if (!dir.empty()) fs::create_directories(dir);

  std::vector<std::string> files;
  auto emit = [&](const fs::path& path, const std::vector<u2x::SweepRow>& rows) {
    std::ostringstream ss;
    u2x::writeCsv(ss, rows);
    writeFile(path, ss.str());
    files.push_back(path.string());
  };
  for (const auto& run : result.runs) {
    const fs::path path = run.label.empty() ? out : dir / (stem + "_" + run.label + ext);
    emit(path, run.rows);
  }
  if (!result.table1.empty()) {
    const fs::path path = result.runs.empty() ? out : dir / (stem + "_table1" + ext);
    emit(path, u2x::tableOneRows(result.table1));
  }
  const auto summary = u2x::summaryJson(spec, result, files);
  const fs::path summaryPath = dir / (stem + ".summary.json");
  writeFile(summaryPath, summary.dump(2) + "\n");

  for (const auto& f : files) std::cout << "wrote " << f << '\n';
  std::cout << "wrote " << summaryPath.string() << '\n';
  if (!result.table1.empty()) {
    std::cout << "scenario m D(expected) S(expected)\n";
    for (const auto& t : result.table1) {
      std::cout << u2x::toString(t.scenario) << ' ' << t.m << ' ' << u2x::formatNumber(t.diversity) << '('
                << t.expectedDiversity << (t.diversityOk ? ",ok" : ",off") << ") "
                << u2x::formatNumber(t.slope) << '(' << t.expectedSlope << (t.slopeOk ? ",ok" : ",off")
                << ")\n";
    }
  }
  if (result.anyFailure()) {
    std::cerr << "warning: " << summary["failed_rows"].get<std::size_t>()
              << " row(s) failed to converge; see the summary\n";
    if (o.strict) return kExitConvergence;
  }
  return kExitOk;
}

struct PointOptions {
  std::string run;
  std::string scenario = "NomaFar";
  std::string metric = "outage";
  std::string method = "exact";
  std::vector<std::string> sets;
  bool compare = false;
};

int runPointCommand(const CommonOptions& o, const PointOptions& p) {
  auto spec = loadSpec(o);

  // Pick the parameter set, apply --set overrides, then evaluate as a
  // one-row sweep on a synthetic axis.
  u2x::ParamSet params = spec.base;
  if (!p.run.empty()) {
    auto it = std::find_if(spec.runs.begin(), spec.runs.end(), [&](const auto& r) { return r.label == p.run; });
    if (it == spec.runs.end()) throw u2x::ConfigError("no run labelled '" + p.run + "'");
    params = it->params;
  }
  std::string axis = "pu_dbm";
  double axisValue = u2x::wattsToDbm(params.budget.pu);
  for (const auto& s : p.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw u2x::ConfigError("--set expects name=value, got '" + s + "'");
    const std::string name = s.substr(0, eq);
    if (!u2x::isKnownAxis(name)) throw u2x::ConfigError("--set: unknown parameter '" + name + "'");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(s.substr(eq + 1), &used);
      if (used != s.size() - eq - 1) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw u2x::ConfigError("--set: bad number in '" + s + "'");
    }
    u2x::applyAxis(params, name, v);
    axis = name;
    axisValue = v;
  }
  spec.runs = {{"", params}};
  spec.axis = axis;
  spec.values = {axisValue};
  spec.table1.reset();

  const auto metric = u2x::sweepMetricFromString(p.metric);
  if (!metric) throw u2x::ConfigError("unknown metric '" + p.metric + "'");
  std::optional<u2x::Scenario> scenario;
  std::string system;
  if (u2x::perUserMetric(*metric)) {
    scenario = u2x::scenarioFromString(p.scenario);
    if (!scenario) throw u2x::ConfigError("unknown scenario '" + p.scenario + "'");
  } else {
    system = p.scenario;
  }
  std::vector<u2x::Method> methods;
  if (p.compare) {
    methods = {u2x::Method::Exact, u2x::Method::MonteCarlo};
  } else {
    const auto m = u2x::methodFromString(p.method);
    if (!m) throw u2x::ConfigError("unknown method '" + p.method + "'");
    methods = {*m};
  }
  spec.methods = methods;
  if (std::find(methods.begin(), methods.end(), u2x::Method::MonteCarlo) != methods.end()) {
    if (!spec.trials) spec.trials = 1'000'000;
    if (!spec.seed) spec.seed = u2x::SeedPolicy{}.masterSeed;
  }
  u2x::checkSweepSpec(spec);

  std::vector<u2x::SweepRow> rows;
  for (auto method : methods) {
    if (!u2x::supported(params, scenario, system, *metric, method))
      throw u2x::ConfigError("no " + std::string(u2x::toString(method)) + " evaluator for " + p.metric +
                             " / " + p.scenario);
    u2x::SweepTask task{0, axisValue, scenario, system, *metric, method};
    rows.push_back(u2x::evaluateTask(spec, task, o.jobs));
  }

  int code = kExitOk;
  for (const auto& r : rows)
    if ((r.error || !r.diag.converged) && o.strict) code = kExitConvergence;

  if (!p.compare) {
    std::cout << estimateJson(rows.front()).dump(2) << '\n';
    return code;
  }
  const auto& ex = rows[0];
  const auto& mc = rows[1];
  json doc = {{"exact", estimateJson(ex)}, {"monte_carlo", estimateJson(mc)}};
  if (ex.estimate && mc.estimate && mc.ciLow && mc.ciHigh) {
    const double se = (*mc.ciHigh - *mc.ciLow) / (2.0 * 1.959963984540054);
    const double diff = *ex.estimate - *mc.estimate;
    if (se > 0.0) doc["z"] = diff / se;
    else doc["z"] = diff == 0.0 ? json(0.0) : json(nullptr);
  } else {
    doc["z"] = nullptr;
  }
  std::cout << doc.dump(2) << '\n';
  return code;
}

int runValidateCommand(const CommonOptions& o) {
  const auto spec = u2x::parseSweepSpec(readFile(o.config));
  json report = json::array();
  bool ok = true;
  for (const auto& run : spec.runs) {
    const auto& p = run.params;
    const auto rep = u2x::validate(p.geometry, p.channel, p.budget, p.rates);
    ok = ok && rep.ok();
    report.push_back({{"run", run.label},
                      {"ok", rep.ok()},
                      {"feasible", rep.feasible},
                      {"violations", rep.violations},
                      {"warnings", rep.warnings}});
  }
  std::cout << json{{"config", o.config}, {"pass", ok}, {"runs", report}}.dump(2) << '\n';
  return ok ? kExitOk : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outage, ergodic rate and spectrum efficiency of NOMA UAV downlinks"};
  app.require_subcommand(1);

  CommonOptions common;
  PointOptions point;
  auto addCommon = [&common](CLI::App* sub, bool full) {
    sub->add_option("--config", common.config, "JSON config file")->required();
    if (!full) return;
    sub->add_option("--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--trials", common.trials, "Monte Carlo trials (overrides the config)");
    sub->add_option("--seed", common.seed, "Monte Carlo master seed (overrides the config)");
    sub->add_flag("--strict", common.strict, "exit 2 when any row fails to converge");
  };

  auto* sweep = app.add_subcommand("sweep", "run the configured sweep and write CSV + summary JSON");
  addCommon(sweep, true);
  sweep->add_option("--out", common.out, "CSV path; runs write <stem>_<label>.csv beside it");

  auto* pt = app.add_subcommand("point", "evaluate one (scenario, metric, method) at the base parameters");
  addCommon(pt, true);
  pt->add_option("--run", point.run, "take parameters from this run label");
  pt->add_option("--scenario", point.scenario, "scenario name (or NomaPair/OmaPair/OmaSingle/System)");
  pt->add_option("--metric", point.metric, "outage, ergodic, outage_sum_rate, ...");
  pt->add_option("--method", point.method, "exact, asymptotic, no_fading or monte_carlo");
  pt->add_option("--set", point.sets, "parameter override name=value (repeatable)");
  pt->add_flag("--compare", point.compare, "run exact and monte_carlo and print the z-score");

  auto* val = app.add_subcommand("validate", "check the parameter sets of a config");
  addCommon(val, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sweep->parsed()) return runSweepCommand(common);
    if (pt->parsed()) return runPointCommand(common, point);
    return runValidateCommand(common);
  } catch (const u2x::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
