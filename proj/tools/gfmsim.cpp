// Command-line front end: run one scenario, compare all controllers on a
// scenario, or dump the small-signal modes of an operating point.
//
// Exit codes: 0 ok, 2 usage/parse/validation, 3 no convergence,
// 4 diverged, 1 anything else.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gfm/config.hpp"
#include "gfm/metrics.hpp"
#include "gfm/parallel.hpp"
#include "gfm/report.hpp"
#include "gfm/simulator.hpp"

namespace fs = std::filesystem;
using namespace gfm;

namespace {

enum Exit { kOk = 0, kOther = 1, kUsage = 2, kNoConvergence = 3, kDiverged = 4 };

struct Options {
  std::string config;
  std::string controller;
  std::string scenario;
  std::string out;
  std::optional<double> dt;
  std::optional<double> duration;
};

void add_common(CLI::App* cmd, Options& o, bool needs_controller, bool needs_scenario) {
  cmd->add_option("--config", o.config, "YAML configuration file")->check(CLI::ExistingFile);
  if (needs_controller) cmd->add_option("--controller", o.controller, "droop, vsm-outer, vsm-inner, vadm or pr");
  if (needs_scenario) cmd->add_option("--scenario", o.scenario, "scenario id (load-step, phase-jump, none, p-step)");
  cmd->add_option("--out", o.out, "output directory");
  if (needs_scenario) {
    cmd->add_option("--dt", o.dt, "integration step in seconds");
    cmd->add_option("--duration", o.duration, "simulated time in seconds");
  }
}

RunConfig load(const Options& o) {
  RunConfig cfg = o.config.empty() ? parse_config_string("", "<defaults>") : parse_config(o.config);
  for (const auto& [id, s] : cfg.scenarios) {
    if (o.dt) {
      cfg.scenarios[id].dt = *o.dt;
      cfg.provenance["scenarios." + id + ".dt"] = Provenance::User;
    }
    if (o.duration) {
      cfg.scenarios[id].duration = *o.duration;
      cfg.provenance["scenarios." + id + ".duration"] = Provenance::User;
    }
  }
  if (!o.out.empty()) {
    cfg.output.directory = o.out;
    cfg.provenance["output.directory"] = Provenance::User;
  }
  validate_config(cfg);
  return cfg;
}

ControllerKind pick_controller(const Options& o, const RunConfig& cfg) {
  const std::string id = o.controller.empty() ? cfg.controller : o.controller;
  if (id.empty()) throw ValidationError("no controller given (use --controller or set 'controller')", "controller-known");
  return parse_controller_id(id);
}

std::string pick_scenario(const Options& o, const RunConfig& cfg) {
  if (!o.scenario.empty()) return o.scenario;
  if (!cfg.scenario.empty()) return cfg.scenario;
  return "load-step";
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.output.directory);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

int cmd_run(const Options& o) {
  const RunConfig cfg = load(o);
  const ControllerKind kind = pick_controller(o, cfg);
  const std::string scenario = pick_scenario(o, cfg);
  const ScenarioSpec spec = cfg.scenario_spec(kind, scenario);

  const ScenarioResult result = run_scenario(spec);
  const MetricsReport report = build_report(result.trace, spec, cfg.metrics);

  const fs::path dir = out_dir(cfg);
  const std::string stem = std::string(controller_id(kind)) + "_" + scenario;
  write_trace_csv((dir / (stem + ".csv")).string(), result.trace);
  write_text(dir / (stem + ".metrics.json"), metrics_json(report, cfg, std::string(controller_id(kind)), scenario));
  std::cout << comparison_table({{std::string(controller_id(kind)), report, ""}}, scenario);
  return kOk;
}

int cmd_compare(const Options& o) {
  const RunConfig cfg = load(o);
  const std::string scenario = pick_scenario(o, cfg);
  std::vector<ScenarioSpec> specs;
  for (auto kind : kAllControllers) specs.push_back(cfg.scenario_spec(kind, scenario));

  const auto outcomes = run_matrix(specs, Execution::Parallel);

  std::vector<ComparisonRow> rows;
  int code = kOk;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    ComparisonRow row{std::string(controller_id(kAllControllers[i])), std::nullopt, ""};
    const auto& oc = outcomes[i];
    if (oc.status == RunOutcome::Status::Ok) {
      try {
        row.report = build_report(oc.result->trace, specs[i], cfg.metrics);
      } catch (const std::exception& e) {
        row.failure = e.what();
        if (code == kOk) code = kOther;
      }
    } else {
      row.failure = oc.message;
      const int c = oc.status == RunOutcome::Status::Diverged       ? kDiverged
                    : oc.status == RunOutcome::Status::NoConvergence ? kNoConvergence
                                                                     : kOther;
      if (code == kOk) code = c;
      std::cerr << "error: " << row.controller << ": " << oc.message << '\n';
    }
    rows.push_back(std::move(row));
  }

  const fs::path dir = out_dir(cfg);
  const std::string table = comparison_table(rows, scenario);
  write_text(dir / ("compare_" + scenario + ".txt"), table);
  write_text(dir / ("compare_" + scenario + ".json"), comparison_json(rows, scenario));
  std::cout << table;
  return code;
}

int cmd_linearize(const Options& o) {
  const RunConfig cfg = load(o);
  const ControllerKind kind = pick_controller(o, cfg);
  const ScenarioSpec spec = cfg.scenario_spec(kind, "none");
  const Equilibrium eq = initialize(spec);
  const Linearization lin = linearize(spec, eq);
  const auto modes = eigen_modes(lin.a);
  if (o.out.empty()) {
    write_modes_csv(std::cout, modes);
  } else {
    const fs::path dir = out_dir(cfg);
    const fs::path path = dir / (std::string(controller_id(kind)) + "_modes.csv");
    std::ofstream out(path, std::ios::binary);
    write_modes_csv(out, modes);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    std::cout << path.string() << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-forming converter control comparison"};
  app.require_subcommand(1);
  Options o;
  auto* run = app.add_subcommand("run", "simulate one controller on one scenario");
  add_common(run, o, true, true);
  auto* compare = app.add_subcommand("compare", "simulate all five controllers on one scenario");
  add_common(compare, o, false, true);
  auto* lin = app.add_subcommand("linearize", "eigenvalues of the matched operating point as CSV");
  add_common(lin, o, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(o);
    if (*compare) return cmd_compare(o);
    return cmd_linearize(o);
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "invalid configuration [" << e.rule() << "]: " << e.what() << '\n';
    return kUsage;
  } catch (const UnknownVariant& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Diverged& e) {
    std::fprintf(stderr, "diverged: t = %.6f s (%s)\n", e.time(), e.what());
    return kDiverged;
  } catch (const NoConvergence& e) {
    std::cerr << "no convergence: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const InitInfeasible& e) {
    std::cerr << "no convergence: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const NotAnEquilibrium& e) {
    std::cerr << "no convergence: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}
