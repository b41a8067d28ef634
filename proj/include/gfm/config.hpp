#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gfm/controllers.hpp"
#include "gfm/errors.hpp"
#include "gfm/metrics.hpp"
#include "gfm/network.hpp"
#include "gfm/simulator.hpp"

namespace gfm {

/// Malformed document or unknown key. line() is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string key, int line)
      : Error(what), key_(std::move(key)), line_(line) {}
  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

/// Well-formed document whose values break an invariant; rule() names it.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::string rule) : Error(what), rule_(std::move(rule)) {}
  const std::string& rule() const { return rule_; }

 private:
  std::string rule_;
};

enum class Provenance { Default, User };

/// Timing and disturbance of one named scenario.
struct ScenarioConfig {
  Event event = NoEvent{};
  double event_time = 1.0;
  double duration = 3.0;
  double dt = 5e-5;
  bool operator==(const ScenarioConfig&) const = default;
};

struct OutputConfig {
  std::string directory = "out";
  std::size_t decimation = 1;
  bool operator==(const OutputConfig&) const = default;
};

/// Grid strength as written by the user: either z_grid or (scr, xr_ratio).
struct GridSpec {
  std::optional<double> scr;
  std::optional<double> xr_ratio;
  bool operator==(const GridSpec&) const = default;
};

struct RunConfig {
  double f_n = 50.0;
  SystemParams system{};
  GridSpec grid_spec{};
  OperatingTargets targets{};
  std::array<ControllerSpec, 5> controllers = default_controllers(50.0);
  std::map<std::string, ScenarioConfig> scenarios = default_scenarios();
  MetricSettings metrics{};
  OutputConfig output{};
  std::string controller;  // optional default for run/linearize
  std::string scenario;    // optional default for run/compare

  /// Dotted key -> origin for every leaf value. Not part of equality.
  std::map<std::string, Provenance> provenance;

  const ControllerSpec& controller_spec(ControllerKind kind) const;
  /// Throws ValidationError for an unknown scenario id.
  ScenarioSpec scenario_spec(ControllerKind kind, const std::string& scenario_id) const;

  bool operator==(const RunConfig& o) const;

  static std::array<ControllerSpec, 5> default_controllers(double f_n);
  static std::map<std::string, ScenarioConfig> default_scenarios();
};

/// Parse YAML text. origin labels diagnostics.
RunConfig parse_config_string(const std::string& text, const std::string& origin = "<string>");
/// Parse a YAML file. Throws ParseError if it cannot be read.
RunConfig parse_config(const std::string& path);
/// Full configuration with every value spelled out at round-trip precision.
std::string serialize_config(const RunConfig& cfg);

/// One leaf value rendered as text, with its origin.
struct ConfigEntry {
  std::string key;
  std::string value;
  Provenance source = Provenance::Default;
};
/// Every leaf in schema order. Keys absent from provenance count as defaults.
std::vector<ConfigEntry> flatten_config(const RunConfig& cfg);

/// Throws ValidationError naming the first violated rule.
void validate_config(const RunConfig& cfg);

}  // namespace gfm
