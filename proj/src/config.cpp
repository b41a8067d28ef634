#include "gfm/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace gfm {
namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : path) {
    if (c == '.') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// One pass over every leaf of the schema, in document order. Parsing and
// serialization share it so the two cannot drift apart.
class FieldVisitor {
 public:
  virtual ~FieldVisitor() = default;
  virtual void number(const std::string& path, double& v) = 0;
  virtual void count(const std::string& path, std::size_t& v) = 0;
  virtual void flag(const std::string& path, bool& v) = 0;
  virtual void text(const std::string& path, std::string& v) = 0;
  virtual void complex(const std::string& path, ComplexPu& v) = 0;
};

void walk_inner(FieldVisitor& v, const std::string& at, InnerLoopGains& g, bool voltage_loop) {
  if (voltage_loop) {
    v.number(at + ".k_pv", g.k_pv);
    v.number(at + ".k_iv", g.k_iv);
  }
  v.number(at + ".k_pc", g.k_pc);
  v.number(at + ".k_ic", g.k_ic);
}

void walk_vsm(FieldVisitor& v, const std::string& at, VsmGains& g) {
  v.number(at + ".j_inertia", g.j_inertia);
  v.number(at + ".d_p", g.d_p);
  v.number(at + ".k_q", g.k_q);
}

void walk_controller(FieldVisitor& v, ControllerSpec& spec) {
  const std::string at = "controllers." + std::string(controller_id(spec.kind()));
  std::visit(
      [&](auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DroopControl>) {
          v.number(at + ".k_p", c.power.k_p);
          v.number(at + ".k_q", c.power.k_q);
          walk_inner(v, at, c.inner, true);
        } else if constexpr (std::is_same_v<T, VsmOuterControl>) {
          walk_vsm(v, at, c.power);
        } else if constexpr (std::is_same_v<T, VsmInnerControl>) {
          walk_vsm(v, at, c.power);
          walk_inner(v, at, c.inner, true);
        } else if constexpr (std::is_same_v<T, VirtualAdmittanceControl>) {
          walk_vsm(v, at, c.power);
          v.number(at + ".l_v", c.admittance.l_v);
          v.number(at + ".r_v", c.admittance.r_v);
          walk_inner(v, at, c.inner, false);
        } else {
          walk_vsm(v, at, c.power);
          v.number(at + ".k_p_ab", c.pr.k_p_ab);
          v.number(at + ".k_r_ab", c.pr.k_r_ab);
          v.number(at + ".omega_res", c.pr.omega_res);
          v.number(at + ".k_i_ab", c.pr.k_i_ab);
          v.number(at + ".r_virt", c.pr.r_virt);
          v.number(at + ".omega_c", c.pr.omega_c);
        }
      },
      spec.law);
  v.number(at + ".reactive_sign", spec.reactive_sign);
}

void walk_scenario(FieldVisitor& v, const std::string& id, ScenarioConfig& s) {
  const std::string at = "scenarios." + id;
  std::string name = event_name(s.event);
  v.text(at + ".event", name);
  std::visit(
      [&](auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, LoadStep>) v.number(at + ".p_load", e.p_load);
        if constexpr (std::is_same_v<T, PhaseJump>) v.number(at + ".delta", e.delta);
        if constexpr (std::is_same_v<T, SetpointStep>) v.number(at + ".dp", e.dp);
      },
      s.event);
  v.number(at + ".event_time", s.event_time);
  v.number(at + ".duration", s.duration);
  v.number(at + ".dt", s.dt);
}

void walk(FieldVisitor& v, RunConfig& c) {
  v.text("controller", c.controller);
  v.text("scenario", c.scenario);

  v.number("system.f_n", c.f_n);
  if (c.grid_spec.scr) {
    v.number("system.grid.scr", *c.grid_spec.scr);
    v.number("system.grid.xr_ratio", *c.grid_spec.xr_ratio);
  } else {
    v.complex("system.grid.z_grid", c.system.grid.z_grid);
  }
  v.number("system.grid.v_mag", c.system.grid.v_mag);
  v.number("system.grid.phase", c.system.grid.phase);
  v.number("system.filter.l_f", c.system.filter.l_f);
  v.number("system.filter.c_f", c.system.filter.c_f);
  v.number("system.filter.r_f", c.system.filter.r_f);
  v.number("system.load.p_load", c.system.load.p_load);
  v.flag("system.load.connected", c.system.load.connected);
  v.number("system.actuation_lag", c.system.actuation_lag);
  v.number("system.targets.p", c.targets.p);
  v.number("system.targets.v_pcc", c.targets.v_pcc);

  for (auto& spec : c.controllers) walk_controller(v, spec);
  for (auto& [id, s] : c.scenarios) walk_scenario(v, id, s);

  v.number("metrics.rocof_window", c.metrics.rocof_window);
  v.number("metrics.band_pct", c.metrics.band_pct);
  v.number("metrics.band_floor", c.metrics.band_floor);
  v.number("metrics.pre_window", c.metrics.pre_window);
  v.number("metrics.final_window", c.metrics.final_window);
  v.number("metrics.settle_dwell", c.metrics.settle_dwell);

  v.text("output.directory", c.output.directory);
  v.count("output.decimation", c.output.decimation);
}

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

YAML::Node find(const YAML::Node& root, const std::string& path) {
  YAML::Node cur = root;
  for (const auto& part : split_path(path)) {
    if (!cur.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node& view = cur;
    YAML::Node next = view[part];
    if (!next.IsDefined()) return next;
    cur.reset(next);
  }
  return cur;
}

class Reader final : public FieldVisitor {
 public:
  Reader(const YAML::Node& root, RunConfig& cfg) : root_(root), cfg_(cfg) {}

  void number(const std::string& path, double& v) override {
    if (auto n = locate(path, "a number")) v = scalar<double>(*n, path, "a number");
  }
  void count(const std::string& path, std::size_t& v) override {
    if (auto n = locate(path, "a positive integer")) {
      long long raw = scalar<long long>(*n, path, "a positive integer");
      if (raw < 1) throw ParseError(path + ": expected a positive integer", path, line_of(*n));
      v = static_cast<std::size_t>(raw);
    }
  }
  void flag(const std::string& path, bool& v) override {
    if (auto n = locate(path, "true or false")) v = scalar<bool>(*n, path, "true or false");
  }
  void text(const std::string& path, std::string& v) override {
    if (auto n = locate(path, "a string")) v = scalar<std::string>(*n, path, "a string");
  }
  void complex(const std::string& path, ComplexPu& v) override {
    auto n = locate(path, "[re, im]", true);
    if (!n) return;
    if (!n->IsSequence() || n->size() != 2)
      throw ParseError(path + ": expected a two-element list [re, im]", path, line_of(*n));
    v = {scalar<double>((*n)[0], path, "a number"), scalar<double>((*n)[1], path, "a number")};
  }

  const std::set<std::string>& known() const { return known_; }

 private:
  std::optional<YAML::Node> locate(const std::string& path, const char* expected, bool sequence = false) {
    known_.insert(path);
    YAML::Node n = find(root_, path);
    if (!n.IsDefined() || n.IsNull()) {
      cfg_.provenance[path] = Provenance::Default;
      return std::nullopt;
    }
    if (!sequence && !n.IsScalar())
      throw ParseError(path + ": expected " + std::string(expected), path, line_of(n));
    cfg_.provenance[path] = Provenance::User;
    return n;
  }

  template <class T>
  static T scalar(const YAML::Node& n, const std::string& path, const char* expected) {
    try {
      T out = n.as<T>();
      if constexpr (std::is_same_v<T, double>) {
        if (!std::isfinite(out)) throw YAML::Exception(n.Mark(), "non-finite");
      }
      return out;
    } catch (const YAML::Exception&) {
      throw ParseError(path + ": expected " + std::string(expected) + ", got '" + n.Scalar() + "'", path,
                       line_of(n));
    }
  }

  const YAML::Node& root_;
  RunConfig& cfg_;
  std::set<std::string> known_;
};

class Writer final : public FieldVisitor {
 public:
  void number(const std::string& path, double& v) override { at(path) = fmt17(v); }
  void count(const std::string& path, std::size_t& v) override { at(path) = std::to_string(v); }
  void flag(const std::string& path, bool& v) override { at(path) = v ? "true" : "false"; }
  void text(const std::string& path, std::string& v) override { at(path) = v; }
  void complex(const std::string& path, ComplexPu& v) override {
    YAML::Node seq(YAML::NodeType::Sequence);
    seq.push_back(fmt17(v.real()));
    seq.push_back(fmt17(v.imag()));
    seq.SetStyle(YAML::EmitterStyle::Flow);
    at(path) = seq;
  }
  const YAML::Node& root() const { return root_; }

 private:
  YAML::Node at(const std::string& path) {
    YAML::Node cur = root_;
    for (const auto& part : split_path(path)) {
      YAML::Node next = cur[part];
      cur.reset(next);
    }
    return cur;
  }
  YAML::Node root_{YAML::NodeType::Map};
};

class Flattener final : public FieldVisitor {
 public:
  explicit Flattener(const RunConfig& cfg) : cfg_(cfg) {}
  void number(const std::string& path, double& v) override { add(path, fmt17(v)); }
  void count(const std::string& path, std::size_t& v) override { add(path, std::to_string(v)); }
  void flag(const std::string& path, bool& v) override { add(path, v ? "true" : "false"); }
  void text(const std::string& path, std::string& v) override { add(path, v); }
  void complex(const std::string& path, ComplexPu& v) override {
    add(path, "[" + fmt17(v.real()) + ", " + fmt17(v.imag()) + "]");
  }
  std::vector<ConfigEntry> entries;

 private:
  void add(const std::string& path, std::string value) {
    auto it = cfg_.provenance.find(path);
    entries.push_back({path, std::move(value), it == cfg_.provenance.end() ? Provenance::Default : it->second});
  }
  const RunConfig& cfg_;
};

void collect_leaves(const YAML::Node& n, const std::string& prefix, std::vector<std::pair<std::string, int>>& out) {
  if (n.IsMap()) {
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      collect_leaves(kv.second, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else {
    out.emplace_back(prefix, line_of(n));
  }
}

Event event_from_name(const std::string& name, const std::string& path, int line) {
  if (name == "none") return NoEvent{};
  if (name == "load-step") return LoadStep{};
  if (name == "phase-jump") return PhaseJump{};
  if (name == "p-step") return SetpointStep{};
  throw ParseError(path + ": unknown event '" + name + "' (expected none, load-step, phase-jump, p-step)", path,
                   line);
}

template <class F>
void rule(bool ok, const std::string& name, F&& message) {
  if (!ok) throw ValidationError(message(), name);
}

}  // namespace

std::array<ControllerSpec, 5> RunConfig::default_controllers(double f_n) {
  const PerUnitBase base(f_n);
  std::array<ControllerSpec, 5> out;
  for (auto kind : kAllControllers) out[static_cast<std::size_t>(kind)] = ControllerSpec::defaults(kind, base);
  return out;
}

std::map<std::string, ScenarioConfig> RunConfig::default_scenarios() {
  std::map<std::string, ScenarioConfig> out;
  out["none"] = ScenarioConfig{NoEvent{}};
  out["load-step"] = ScenarioConfig{LoadStep{}};
  out["phase-jump"] = ScenarioConfig{PhaseJump{}};
  out["p-step"] = ScenarioConfig{SetpointStep{}};
  return out;
}

const ControllerSpec& RunConfig::controller_spec(ControllerKind kind) const {
  return controllers[static_cast<std::size_t>(kind)];
}

ScenarioSpec RunConfig::scenario_spec(ControllerKind kind, const std::string& scenario_id) const {
  auto it = scenarios.find(scenario_id);
  if (it == scenarios.end()) {
    std::string known;
    for (const auto& [id, s] : scenarios) known += (known.empty() ? "" : ", ") + id;
    throw ValidationError("unknown scenario '" + scenario_id + "' (configured: " + known + ")", "scenario-known");
  }
  ScenarioSpec spec;
  spec.duration = it->second.duration;
  spec.dt = it->second.dt;
  spec.event_time = it->second.event_time;
  spec.event = it->second.event;
  spec.controller = controller_spec(kind);
  spec.system = system;
  spec.targets = targets;
  spec.decimation = output.decimation;
  return spec;
}

bool RunConfig::operator==(const RunConfig& o) const {
  return f_n == o.f_n && system == o.system && grid_spec == o.grid_spec && targets == o.targets &&
         controllers == o.controllers && scenarios == o.scenarios && metrics == o.metrics && output == o.output &&
         controller == o.controller && scenario == o.scenario;
}

void validate_config(const RunConfig& c) {
  rule(std::isfinite(c.f_n) && c.f_n > 0.0, "f_n-positive", [] { return "system.f_n must be positive"; });
  if (c.grid_spec.scr) {
    rule(c.grid_spec.xr_ratio && *c.grid_spec.scr > 0.0 && *c.grid_spec.xr_ratio > 0.0, "scr-xr-positive",
         [] { return "system.grid: scr and xr_ratio must be positive"; });
  }
  try {
    c.system.validate();
  } catch (const std::exception& e) {
    throw ValidationError(std::string("system: ") + e.what(), "system-physical");
  }
  for (const auto& spec : c.controllers) {
    try {
      spec.validate();
    } catch (const std::exception& e) {
      throw ValidationError("controllers." + std::string(controller_id(spec.kind())) + ": " + e.what(),
                            "controller-gains");
    }
  }
  for (const auto& [id, s] : c.scenarios) {
    rule(!id.empty() && id.find('.') == std::string::npos, "scenario-id",
         [&] { return "scenario id '" + id + "' must be non-empty and contain no '.'"; });
    ScenarioSpec spec = c.scenario_spec(ControllerKind::Droop, id);
    try {
      spec.validate();
    } catch (const std::exception& e) {
      throw ValidationError("scenarios." + id + ": " + e.what(), "scenario-timing");
    }
  }
  const auto& m = c.metrics;
  rule(m.rocof_window > 0.0 && m.band_pct > 0.0 && m.band_floor >= 0.0 && m.pre_window > 0.0 &&
           m.final_window > 0.0 && m.settle_dwell >= 0.0,
       "metrics-positive", [] { return "metrics windows and band must be positive (band_floor and settle_dwell non-negative)"; });
  rule(c.output.decimation >= 1, "decimation-positive", [] { return "output.decimation must be at least 1"; });
  rule(!c.output.directory.empty(), "output-directory", [] { return "output.directory must not be empty"; });
  if (!c.controller.empty()) {
    try {
      parse_controller_id(c.controller);
    } catch (const UnknownVariant& e) {
      throw ValidationError(e.what(), "controller-known");
    }
  }
  if (!c.scenario.empty()) {
    rule(c.scenarios.count(c.scenario) == 1, "scenario-known",
         [&] { return "default scenario '" + c.scenario + "' is not configured"; });
  }
}

RunConfig parse_config_string(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg, "", e.mark.line + 1);
  }
  if (root.IsNull() || !root.IsDefined()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ParseError(origin + ": top level must be a mapping", "", line_of(root));

  RunConfig cfg;

  // Values that decide which other keys exist are read first.
  if (auto n = find(root, "system.f_n"); n.IsDefined() && n.IsScalar()) {
    try {
      cfg.f_n = n.as<double>();
    } catch (const YAML::Exception&) {
      throw ParseError(origin + ":" + std::to_string(line_of(n)) + ": system.f_n: expected a number", "system.f_n",
                       line_of(n));
    }
    rule(std::isfinite(cfg.f_n) && cfg.f_n > 0.0, "f_n-positive", [] { return "system.f_n must be positive"; });
  }
  cfg.controllers = RunConfig::default_controllers(cfg.f_n);

  const bool has_z = find(root, "system.grid.z_grid").IsDefined();
  const bool has_scr = find(root, "system.grid.scr").IsDefined();
  const bool has_xr = find(root, "system.grid.xr_ratio").IsDefined();
  rule(!(has_z && (has_scr || has_xr)), "grid-exclusive",
       [] { return "system.grid: give either z_grid or (scr, xr_ratio), not both"; });
  rule(has_scr == has_xr, "grid-scr-pair", [] { return "system.grid: scr and xr_ratio must be given together"; });
  if (has_scr) {
    cfg.grid_spec.scr = 0.0;
    cfg.grid_spec.xr_ratio = 0.0;
  }

  if (auto sc = root["scenarios"]; sc.IsDefined() && !sc.IsNull()) {
    if (!sc.IsMap()) throw ParseError(origin + ": scenarios must be a mapping", "scenarios", line_of(sc));
    for (const auto& kv : sc) {
      const auto id = kv.first.as<std::string>();
      const std::string path = "scenarios." + id + ".event";
      YAML::Node ev = kv.second.IsMap() ? kv.second["event"] : YAML::Node(YAML::NodeType::Undefined);
      if (ev.IsDefined() && ev.IsScalar()) {
        cfg.scenarios[id].event = event_from_name(ev.Scalar(), path, line_of(ev));
      } else if (!cfg.scenarios.count(id)) {
        throw ValidationError("scenarios." + id + ": new scenarios must name an event", "scenario-event");
      }
    }
  }

  Reader reader(root, cfg);
  try {
    walk(reader, cfg);
  } catch (const ParseError& e) {
    throw ParseError(origin + ":" + std::to_string(e.line()) + ": " + e.what(), e.key(), e.line());
  }

  std::vector<std::pair<std::string, int>> leaves;
  collect_leaves(root, "", leaves);
  for (const auto& [path, line] : leaves) {
    if (!reader.known().count(path))
      throw ParseError(origin + ":" + std::to_string(line) + ": unknown key '" + path + "'", path, line);
  }

  cfg.system.base = PerUnitBase(cfg.f_n);
  if (cfg.grid_spec.scr) {
    rule(*cfg.grid_spec.scr > 0.0 && *cfg.grid_spec.xr_ratio > 0.0, "scr-xr-positive",
         [] { return "system.grid: scr and xr_ratio must be positive"; });
    cfg.system.grid.z_grid = impedance_from_scr_xr(*cfg.grid_spec.scr, *cfg.grid_spec.xr_ratio);
  }
  validate_config(cfg);
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read config file '" + path + "'", "", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str(), path);
}

std::vector<ConfigEntry> flatten_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  Flattener f(cfg);
  walk(f, copy);
  return std::move(f.entries);
}

std::string serialize_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  Writer writer;
  walk(writer, copy);
  YAML::Emitter out;
  out << writer.root();
  return std::string(out.c_str()) + "\n";
}

}  // namespace gfm
