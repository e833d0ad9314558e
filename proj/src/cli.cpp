#include "qcd/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "qcd/info.hpp"
#include "qcd/verify.hpp"

namespace qcd::cli {

using nlohmann::json;

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string row;
  for (std::size_t i = 0; i < fields.size(); ++i) row += (i ? "," : "") + csv_field(fields[i]);
  row += "\r\n";
  return row;
}

RunConfig apply(RunConfig config, const Overrides& o) {
  if (o.seed) config.mc.master_seed = *o.seed;
  if (o.workers) config.mc.workers = *o.workers;
  if (o.out) config.output = *o.out;
  config.validate();
  return config;
}

std::string summary_path(const std::string& csv_path) {
  const auto slash = csv_path.find_last_of('/');
  const auto dot = csv_path.find_last_of('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash))
    return csv_path.substr(0, dot) + ".summary.json";
  return csv_path + ".summary.json";
}

namespace {

json estimate_json(const MCEstimate& e) {
  return {{"mean", e.mean},
          {"std_error", e.std_error},
          {"n_effective", e.n_effective},
          {"censored_fraction", e.censored_fraction},
          {"discarded", e.discarded}};
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

std::string order_label(double r) { return "r" + format_double(r); }

/// Censoring above this fraction makes delay estimates unusable.
constexpr double kMaxDelayCensoring = 0.01;

}  // namespace

int calibrate(const RunConfig& config, std::ostream& log) {
  const Calibration cal = qcd::calibrate(config);
  DetectorConfig d = config.detector;
  d.threshold = cal.threshold;
  try {
    d.validate(config.prior, config.scenario.streams());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  json j{{"command", "calibrate"}, {"threshold", cal.threshold}, {"formula", cal.formula}};
  if (config.target.alpha) j["alpha"] = *config.target.alpha;
  if (config.target.cost) {
    j["cost"] = *config.target.cost;
    j["r"] = config.target.cost_r;
    j["d_constant"] = cal.d_constant;
    j["mu"] = cal.mu;
    j["scale"] = cal.scale;
  }
  const std::string text = j.dump(2) + "\n";
  if (!config.output.empty()) write_file(config.output, text);
  log << text;
  return kOk;
}

int simulate(const RunConfig& config, std::ostream& log) {
  if (config.output.empty()) throw ConfigError("simulate needs an output path (--out or [output] path)");
  const DetectionProblem problem = config.problem();
  ChangePlan plan{config.change_mode, config.change};
  const auto records = [&] {
    try {
      return qcd::simulate(problem, plan, config.mc);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();

  std::string csv =
      csv_row({"replication", "nu", "stopped_at", "censored", "false_alarm", "delay", "subset", "grid_point"});
  for (const auto& r : records) {
    std::string subset;
    for (std::size_t i = 0; i < r.subset.size(); ++i) subset += (i ? "," : "") + std::to_string(r.subset[i]);
    const bool has_delay = r.stopped_at && !r.false_alarm() && r.nu != kNoChange;
    csv += csv_row({std::to_string(r.replication), r.nu == kNoChange ? "" : std::to_string(r.nu),
                    r.stopped_at ? std::to_string(*r.stopped_at) : "", r.censored() ? "1" : "0",
                    r.false_alarm() ? "1" : "0", has_delay ? std::to_string(r.delay()) : "", subset,
                    config.change_mode == ChangeMode::PriorAll ? std::to_string(r.grid_point) : ""});
  }
  write_file(config.output, csv);

  std::size_t censored = 0;
  for (const auto& r : records) censored += r.censored() ? 1 : 0;
  json j{{"command", "simulate"},
         {"mode", config.change_mode == ChangeMode::None      ? "none"
                  : config.change_mode == ChangeMode::Fixed   ? "fixed"
                  : config.change_mode == ChangeMode::PriorNu ? "prior-nu"
                                                              : "prior-all"},
         {"replications", records.size()},
         {"seed", config.mc.master_seed},
         {"horizon", config.mc.horizon},
         {"threshold", problem.detector.threshold},
         {"censored_fraction", static_cast<double>(censored) / static_cast<double>(records.size())}};

  int code = kOk;
  if (config.change_mode == ChangeMode::None) {
    const MCEstimate pfa = pfa_from_records(problem, records, config.mc.horizon);
    j["pfa"] = estimate_json(pfa);
    j["pfa"]["estimator"] = "rao-blackwell";
    j["pfa_bound"] = pfa_bound(problem);
    j["insufficient_horizon"] = pfa.insufficient_horizon;
    if (pfa.insufficient_horizon) code = kInfeasibleHorizon;
  } else {
    Accumulator fa;
    for (const auto& r : records) fa.add(r.false_alarm() ? 1.0 : 0.0);
    MCEstimate e;
    e.mean = fa.mean();
    e.std_error = fa.std_error();
    e.n_effective = fa.count();
    j[config.change_mode == ChangeMode::Fixed ? "false_alarm_fraction" : "pfa"] = estimate_json(e);
    if (config.change_mode != ChangeMode::Fixed) j["pfa"]["estimator"] = "indicator";
    json delays = json::array();
    for (double r : config.orders) {
      const MCEstimate d = delay_from_records(records, r);
      json dj = estimate_json(d);
      dj["r"] = r;
      delays.push_back(dj);
      if (d.censored_fraction > kMaxDelayCensoring) code = kInfeasibleHorizon;
    }
    j["delay"] = delays;
  }
  const std::string text = j.dump(2) + "\n";
  write_file(summary_path(config.output), text);
  log << text;
  if (code == kInfeasibleHorizon) log << "horizon too short for the requested estimates\n";
  return code;
}

int oc_sweep(const RunConfig& config, std::ostream& log) {
  if (config.output.empty()) throw ConfigError("oc-sweep needs an output path (--out or [output] path)");
  if (config.sweep_alphas.empty()) throw ConfigError("oc-sweep needs [sweep] alphas");
  if (config.change_mode != ChangeMode::Fixed && config.change_mode != ChangeMode::PriorNu)
    throw ConfigError("oc-sweep needs [change] mode = prior-nu (or fixed) with a subset and theta");
  DetectionProblem problem{config.scenario, config.prior, config.weights, config.grid, config.detector};
  const auto rows = [&] {
    try {
      return asymptotic_ratio_sweep(problem, config.change, config.sweep_alphas, config.orders, config.mc);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();

  std::vector<std::string> header{"alpha", "A", "pfa_est", "pfa_se", "pfa_censored_fraction"};
  for (double r : config.orders) {
    const std::string l = order_label(r);
    for (const char* col : {"delay_", "delay_se_", "delay_censored_fraction_", "first_order_", "ratio_", "ratio_se_"})
      header.push_back(col + l);
  }
  std::string csv = csv_row(header);
  int code = kOk;
  for (const auto& row : rows) {
    std::vector<std::string> f{format_double(row.alpha), format_double(row.threshold), format_double(row.pfa.mean),
                               format_double(row.pfa.std_error), format_double(row.pfa.censored_fraction)};
    if (row.pfa.insufficient_horizon) code = kInfeasibleHorizon;
    for (std::size_t j = 0; j < config.orders.size(); ++j) {
      f.push_back(format_double(row.delay[j].mean));
      f.push_back(format_double(row.delay[j].std_error));
      f.push_back(format_double(row.delay[j].censored_fraction));
      f.push_back(format_double(row.first_order[j]));
      f.push_back(format_double(row.ratio[j]));
      f.push_back(format_double(row.ratio_se[j]));
      if (row.delay[j].censored_fraction > kMaxDelayCensoring) code = kInfeasibleHorizon;
    }
    csv += csv_row(f);
  }
  write_file(config.output, csv);
  log << csv;
  if (code == kInfeasibleHorizon) log << "horizon too short for the requested estimates\n";
  return code;
}

int verify(const std::string& suite, std::uint64_t seed, int workers, int paths, const std::string& out,
           std::ostream& log) {
  verify::VerifyOptions opts;
  opts.seed = seed;
  opts.workers = workers;
  opts.paths = paths;
  std::vector<verify::CheckResult> results;
  try {
    results = verify::run_suite(suite, opts);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  bool ok = true;
  json report = json::array();
  for (const auto& r : results) {
    ok = ok && r.passed;
    log << (r.passed ? "PASS " : "FAIL ") << r.suite << ": " << r.invariant << " (max error "
        << format_double(r.max_error) << ", tolerance " << format_double(r.tolerance) << ", cases " << r.cases
        << ")\n";
    report.push_back({{"suite", r.suite},
                      {"invariant", r.invariant},
                      {"passed", r.passed},
                      {"max_error", r.max_error},
                      {"tolerance", r.tolerance},
                      {"cases", r.cases}});
  }
  if (!out.empty()) write_file(out, report.dump(2) + "\n");
  return ok ? kOk : kVerificationFailed;
}

int main(int argc, char** argv) {
  CLI::App app{"Bayesian quickest change detection in multistream data"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides o;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config_path, "INI configuration file");
    if (needs_config) c->required();
    sub->add_option("--seed", seed, "master seed (overrides [mc] seed)");
    sub->add_option("--workers", workers, "worker threads (overrides [mc] workers)")
        ->envname("QCD_WORKERS")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output path");
  };
  auto* cal = app.add_subcommand("calibrate", "threshold for a PFA or cost target");
  auto* sim = app.add_subcommand("simulate", "per-replication records and a JSON summary");
  auto* sweep = app.add_subcommand("oc-sweep", "operating characteristics over an alpha grid");
  auto* ver = app.add_subcommand("verify", "run the oracle suites");
  add_common(cal, true);
  add_common(sim, true);
  add_common(sweep, true);
  add_common(ver, false);
  std::string suite = "all";
  int paths = 100;
  ver->add_option("--suite", suite, "suite name or 'all'");
  ver->add_option("--paths", paths, "random cases per quantified check")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--workers") || std::getenv("QCD_WORKERS")) o.workers = workers;
  if (sub->count("--out")) o.out = out;

  try {
    if (sub == ver) {
      return verify(suite, o.seed.value_or(1), o.workers.value_or(1), paths, o.out.value_or(""), std::cout);
    }
    const RunConfig config = apply(load_config(config_path), o);
    if (sub == cal) return calibrate(config, std::cout);
    if (sub == sim) return simulate(config, std::cout);
    return oc_sweep(config, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace qcd::cli
