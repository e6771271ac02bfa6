#pragma once

// Versioned JSON run configuration. Every rejection is a ConfigError whose
// message starts with the JSON-pointer path of the offending value.

#include "dotlab/electrostatics.hpp"
#include "dotlab/errors.hpp"
#include "dotlab/esr.hpp"
#include "dotlab/fci.hpp"
#include "dotlab/hubbard.hpp"
#include "dotlab/io.hpp"
#include "dotlab/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace dotlab::config {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

/// Read-only view of one JSON object with its path, for precise errors.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  const std::string& path() const { return path_; }
  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError((path_.empty() ? "/" : path_) + ": " + msg); }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(path_ + "/" + key + ": " + msg);
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) fail(it.key(), "unknown key");
  }

  Node child(const std::string& key) const {
    if (!has(key)) fail(key, "required section is missing");
    if (!j_.at(key).is_object()) fail(key, "expected an object");
    return Node(j_.at(key), path_ + "/" + key);
  }

  double number(const std::string& key) const {
    if (!has(key)) fail(key, "required number is missing");
    const auto& v = j_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }

  std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string text(const std::string& key) const {
    if (!has(key)) fail(key, "required string is missing");
    if (!j_.at(key).is_string()) fail(key, "expected a string");
    return j_.at(key).get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) const { return has(key) ? text(key) : fallback; }

  std::vector<double> numbers(const std::string& key) const {
    if (!has(key)) fail(key, "required array is missing");
    const auto& v = j_.at(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(key + "/" + std::to_string(i), "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<std::string> texts(const std::string& key) const {
    const auto& v = j_.at(key);
    if (!v.is_array()) fail(key, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) fail(key + "/" + std::to_string(i), "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  std::vector<Node> objects(const std::string& key) const {
    if (!has(key)) fail(key, "required array is missing");
    const auto& v = j_.at(key);
    if (!v.is_array()) fail(key, "expected an array of objects");
    std::vector<Node> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(v[i], path_ + "/" + key + "/" + std::to_string(i));
    return out;
  }

  /// Two-element [lo, hi] range with lo < hi.
  std::pair<double, double> range(const std::string& key) const {
    const auto r = numbers(key);
    if (r.size() != 2) fail(key, "expected [min, max]");
    if (!(r[1] > r[0])) fail(key, "range must satisfy min < max");
    return {r[0], r[1]};
  }

 private:
  const json& j_;
  std::string path_;
};

/// Parsed top level: the raw document plus the fields shared by all commands.
struct RunConfig {
  json doc;
  fs::path base_dir;
  std::string command;
  std::uint64_t seed = 0;

  Node root() const { return Node(doc, ""); }
  /// Resolves a path from the config relative to the config file.
  fs::path resolve(const std::string& p) const { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; }
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"potential", "exchange-sweep", "funnel", "fit-funnel", "fit-ramsey", "hubbard"};
  return names;
}

inline RunConfig parse_document(const std::string& text, const fs::path& base_dir = ".") {
  RunConfig cfg;
  try {
    cfg.doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("/: malformed JSON: ") + e.what());
  }
  const Node root(cfg.doc, "");
  root.allow({"schema", "command", "description", "seed", "device", "grid", "sweep", "exchange", "funnel", "map",
              "data", "init", "ramsey", "hubbard"});
  if (!root.has("schema")) root.fail("schema", "required schema version is missing");
  if (root.integer("schema", 0) != kSchemaVersion)
    root.fail("schema", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  cfg.command = root.text("command", "");
  if (!cfg.command.empty() && std::find(commands().begin(), commands().end(), cfg.command) == commands().end())
    root.fail("command", "unknown command '" + cfg.command + "'");
  cfg.seed = root.unsigned64("seed", 0);
  cfg.base_dir = base_dir;
  return cfg;
}

inline RunConfig load(const fs::path& file) {
  return parse_document(io::read_text(file), file.has_parent_path() ? file.parent_path() : fs::path("."));
}

// ------------------------------------------------------------ device

inline electrostatics::Permittivities parse_permittivity(const Node& n) {
  n.allow({"Si", "SiO2", "Al2O3"});
  electrostatics::Permittivities p;
  p.si = n.number("Si", p.si);
  p.sio2 = n.number("SiO2", p.sio2);
  p.al2o3 = n.number("Al2O3", p.al2o3);
  return p;
}

inline electrostatics::LinearArray parse_array(const Node& n, electrostatics::LinearArray a = {}) {
  n.allow({"n_gates", "voltages", "t_SiO2", "t_Al2O3", "d", "x", "z_2deg", "gate_length", "gate_thickness", "permittivity"});
  a.n_gates = n.integer("n_gates", a.n_gates);
  if (n.has("voltages")) a.voltages = n.numbers("voltages");
  if (static_cast<int>(a.voltages.size()) != a.n_gates) n.fail("voltages", "needs one voltage per gate");
  a.t_sio2 = n.number("t_SiO2", a.t_sio2);
  a.t_al2o3 = n.number("t_Al2O3", a.t_al2o3);
  a.d = n.number("d", a.d);
  a.x = n.number("x", a.x);
  a.z_2deg = n.number("z_2deg", a.z_2deg);
  a.gate_length = n.number("gate_length", a.gate_length);
  a.gate_thickness = n.number("gate_thickness", a.gate_thickness);
  if (n.has("permittivity")) a.permittivity = parse_permittivity(n.child("permittivity"));
  return a;
}

inline electrostatics::DeviceSpec parse_device_spec(const Node& n) {
  n.allow({"gates", "dots", "t_SiO2", "t_Al2O3", "d", "x", "z_2deg", "gate_thickness", "permittivity"});
  electrostatics::DeviceSpec s;
  for (const auto& g : n.objects("gates")) {
    g.allow({"name", "rect", "level", "voltage"});
    const auto r = g.numbers("rect");
    if (r.size() != 4) g.fail("rect", "expected [x0, x1, y0, y1]");
    s.gates.push_back({g.text("name"), {r[0], r[1], r[2], r[3]}, g.integer("level", 0), g.number("voltage", 0.0)});
  }
  if (n.has("dots")) s.dots = n.texts("dots");
  s.t_sio2 = n.number("t_SiO2", s.t_sio2);
  s.t_al2o3 = n.number("t_Al2O3", s.t_al2o3);
  s.d = n.number("d", s.d);
  s.x = n.number("x", s.x);
  s.z_2deg = n.number("z_2deg", s.z_2deg);
  s.gate_thickness = n.number("gate_thickness", s.gate_thickness);
  if (n.has("permittivity")) s.permittivity = parse_permittivity(n.child("permittivity"));
  return s;
}

struct GridOptions {
  double spacing = 2.0;
  double margin = 40.0;
  double depth = 80.0;
  int nz = 16;
  double tol = 1e-6;
};

inline GridOptions parse_grid(const Node& n) {
  n.allow({"spacing", "margin", "depth", "nz", "tol"});
  GridOptions g;
  g.spacing = n.number("spacing", g.spacing);
  g.margin = n.number("margin", g.margin);
  g.depth = n.number("depth", g.depth);
  g.nz = n.integer("nz", g.nz);
  g.tol = n.number("tol", g.tol);
  if (!(g.spacing > 0.0)) n.fail("spacing", "must be positive");
  if (!(g.margin >= 0.0)) n.fail("margin", "must be non-negative");
  if (!(g.tol > 0.0 && g.tol < 1.0)) n.fail("tol", "must lie in (0, 1)");
  return g;
}

struct PotentialConfig {
  electrostatics::DeviceSpec spec;
  electrostatics::GridSpec grid;
  double tol = 1e-6;
  std::optional<std::string> lever_gate;
  double lever_dv = 0.01;
};

/// `device` holds either an explicit gate list or an `array` block.
inline PotentialConfig parse_potential(const RunConfig& cfg) {
  const Node root = cfg.root();
  const Node dev = root.child("device");
  PotentialConfig out;
  const GridOptions g = root.has("grid") ? parse_grid(root.child("grid")) : GridOptions{};
  if (dev.has("array")) {
    dev.allow({"array", "lever_arm"});
    const auto arr = parse_array(dev.child("array"));
    out.spec = arr.build();
    out.grid = arr.grid(g.spacing, g.margin, g.depth, g.nz);
  } else {
    const Node d = dev;
    json stripped = cfg.doc.at("device");
    stripped.erase("lever_arm");
    out.spec = parse_device_spec(Node(stripped, d.path()));
    out.grid = electrostatics::grid_for(out.spec, g.spacing, g.margin, g.depth, g.nz);
  }
  if (dev.has("lever_arm")) {
    const Node la = dev.child("lever_arm");
    la.allow({"gate", "dv"});
    out.lever_gate = la.text("gate");
    out.lever_dv = la.number("dv", out.lever_dv);
  }
  out.tol = g.tol;
  return out;
}

// ------------------------------------------------------------ sweeps

inline fci::CoulombKernel parse_kernel(const Node& n) {
  n.allow({"epsilon_r", "softening", "image_distance"});
  fci::CoulombKernel k;
  k.epsilon_r = n.number("epsilon_r", k.epsilon_r);
  k.softening = n.number("softening", k.softening);
  if (n.has("image_distance")) k.image_distance = n.number("image_distance");
  try {
    k.validate();
  } catch (const ConfigError& e) {
    n.fail(e.what());
  }
  return k;
}

struct SweepConfig {
  pipeline::ExchangeSetup setup;
  pipeline::SweepAxis axis = pipeline::SweepAxis::D;
  std::vector<double> values;
  bool with_ci = true;
};

inline std::vector<double> parse_values(const Node& n) {
  if (n.has("values")) {
    auto v = n.numbers("values");
    if (v.empty()) n.fail("values", "must not be empty");
    return v;
  }
  const double from = n.number("from"), to = n.number("to");
  const int steps = n.integer("steps", 0);
  if (steps < 1) n.fail("steps", "must be at least 1");
  std::vector<double> v;
  for (int i = 0; i < steps; ++i) v.push_back(steps == 1 ? from : from + (to - from) * i / (steps - 1));
  return v;
}

inline SweepConfig parse_sweep(const RunConfig& cfg) {
  const Node root = cfg.root();
  SweepConfig out;
  const Node sw = root.child("sweep");
  sw.allow({"parameter", "values", "from", "to", "steps", "mode"});
  try {
    out.axis = pipeline::parse_axis(sw.text("parameter"));
  } catch (const ConfigError& e) {
    sw.fail("parameter", e.what());
  }
  out.values = parse_values(sw);
  const std::string mode = sw.text("mode", "exchange");
  if (mode != "exchange" && mode != "t0") sw.fail("mode", "expected 'exchange' or 't0'");
  out.with_ci = mode == "exchange";
  if (root.has("device")) {
    const Node dev = root.child("device");
    dev.allow({"array"});
    out.setup.array = parse_array(dev.child("array"), out.setup.array);
  }
  if (root.has("exchange")) {
    const Node ex = root.child("exchange");
    ex.allow({"es_spacing", "es_tol", "orbital_spacing", "orbital_margin", "dot_depth", "n_orbitals", "m_inplane",
              "valley_splitting", "kernel", "doublet_guard"});
    auto& s = out.setup;
    s.es_spacing = ex.number("es_spacing", s.es_spacing);
    s.es_tol = ex.number("es_tol", s.es_tol);
    s.orbital_spacing = ex.number("orbital_spacing", s.orbital_spacing);
    s.orbital_margin = ex.number("orbital_margin", s.orbital_margin);
    s.dot_depth = ex.number("dot_depth", s.dot_depth);
    s.n_orbitals = ex.integer("n_orbitals", s.n_orbitals);
    if (s.n_orbitals < 3 || s.n_orbitals > 16) ex.fail("n_orbitals", "must lie in 3..16");
    s.mass.m_inplane = ex.number("m_inplane", s.mass.m_inplane);
    s.mass.valley_splitting = ex.number("valley_splitting", s.mass.valley_splitting);
    s.doublet_guard = ex.number("doublet_guard", s.doublet_guard);
    if (ex.has("kernel")) s.kernel = parse_kernel(ex.child("kernel"));
  }
  return out;
}

// ------------------------------------------------------------ funnels

inline esr::FunnelParams parse_funnel_params(const Node& n, esr::FunnelParams p = {}) {
  n.allow({"t0", "alpha", "v_ac", "s", "f0", "delta_ez"});
  p.t0 = n.number("t0", p.t0);
  p.alpha = n.number("alpha", p.alpha);
  p.v_ac = n.number("v_ac", p.v_ac);
  p.s = n.number("s", p.s);
  p.f0 = n.number("f0", p.f0);
  p.delta_ez = n.number("delta_ez", p.delta_ez);
  try {
    p.validate();
  } catch (const ConfigError& e) {
    n.fail(e.what());
  }
  return p;
}

struct FunnelConfig {
  esr::FunnelParams params;
  double v_min = -1.0, v_max = 0.25;
  int n_v = 251;
  std::optional<std::pair<double, double>> f_range;  // MHz, default chosen from the lines
  int n_f = 301;
  double linewidth = 2.0;  // MHz
};

inline FunnelConfig parse_funnel(const RunConfig& cfg) {
  const Node root = cfg.root();
  FunnelConfig out;
  out.params = parse_funnel_params(root.child("funnel"));
  if (root.has("map")) {
    const Node m = root.child("map");
    m.allow({"v_range", "n_v", "f_range", "n_f", "linewidth"});
    if (m.has("v_range")) std::tie(out.v_min, out.v_max) = m.range("v_range");
    out.n_v = m.integer("n_v", out.n_v);
    if (m.has("f_range")) out.f_range = m.range("f_range");
    out.n_f = m.integer("n_f", out.n_f);
    out.linewidth = m.number("linewidth", out.linewidth);
    if (out.n_v < 2) m.fail("n_v", "must be at least 2");
    if (out.n_f < 2) m.fail("n_f", "must be at least 2");
    if (!(out.linewidth > 0.0)) m.fail("linewidth", "must be positive");
  }
  return out;
}

struct FitFunnelConfig {
  std::optional<esr::FunnelParams> truth;  // synthetic data when set
  std::optional<fs::path> data_file;
  double v_min = -1.0, v_max = 0.25;
  int n_points = 200;
  double sigma_f = 0.05;  // MHz
  std::vector<esr::Branch> branches{esr::Branch::I, esr::Branch::II};
  std::optional<esr::FunnelParams> init;  // data-driven guess when absent
  double delta_ez = 40.0;
};

inline FitFunnelConfig parse_fit_funnel(const RunConfig& cfg) {
  const Node root = cfg.root();
  FitFunnelConfig out;
  const Node data = root.child("data");
  data.allow({"file", "truth", "v_range", "n_points", "sigma_f", "branches"});
  if (data.has("file") == data.has("truth")) data.fail("exactly one of 'file' or 'truth' is required");
  if (data.has("file")) out.data_file = cfg.resolve(data.text("file"));
  if (data.has("truth")) {
    out.truth = parse_funnel_params(data.child("truth"));
    out.delta_ez = out.truth->delta_ez;
  }
  if (data.has("v_range")) std::tie(out.v_min, out.v_max) = data.range("v_range");
  out.n_points = data.integer("n_points", out.n_points);
  out.sigma_f = data.number("sigma_f", out.sigma_f);
  if (!(out.sigma_f >= 0.0)) data.fail("sigma_f", "must be non-negative");
  if (data.has("branches")) {
    out.branches.clear();
    for (const auto& b : data.texts("branches")) {
      try {
        out.branches.push_back(esr::parse_branch(b));
      } catch (const ConfigError& e) {
        data.fail("branches", e.what());
      }
    }
  }
  if (root.has("init")) {
    const Node init = root.child("init");
    out.init = parse_funnel_params(init, out.truth.value_or(esr::FunnelParams{}));
    out.delta_ez = out.init->delta_ez;
  }
  return out;
}

struct FitRamseyConfig {
  std::optional<esr::RamseyParams> truth;
  std::optional<fs::path> trace_file;
  double span = 400.0;  // us
  int n = 200;
  double sigma = 0.01;
};

inline FitRamseyConfig parse_fit_ramsey(const RunConfig& cfg) {
  const Node r = cfg.root().child("ramsey");
  r.allow({"file", "truth", "span", "n", "sigma"});
  FitRamseyConfig out;
  if (r.has("file") == r.has("truth")) r.fail("exactly one of 'file' or 'truth' is required");
  if (r.has("file")) out.trace_file = cfg.resolve(r.text("file"));
  if (r.has("truth")) {
    const Node t = r.child("truth");
    t.allow({"a", "b", "omega", "t2"});
    esr::RamseyParams p;
    p.a = t.number("a", p.a);
    p.b = t.number("b", p.b);
    p.omega = t.number("omega");
    p.t2 = t.number("t2");
    if (!(p.t2 > 0.0)) t.fail("t2", "must be positive");
    if (std::abs(p.a) > 0.5) t.fail("a", "|a| must not exceed 0.5");
    out.truth = p;
  }
  out.span = r.number("span", out.span);
  out.n = r.integer("n", out.n);
  out.sigma = r.number("sigma", out.sigma);
  if (!(out.span > 0.0)) r.fail("span", "must be positive");
  if (out.n < 20) r.fail("n", "must be at least 20");
  if (!(out.sigma >= 0.0)) r.fail("sigma", "must be non-negative");
  return out;
}

// ------------------------------------------------------------ Hubbard

struct HubbardConfig {
  hubbard::ThreeSiteModel model;
  int order = 4;
  double max_ratio = 0.1;
};

inline HubbardConfig parse_hubbard(const RunConfig& cfg) {
  const Node h = cfg.root().child("hubbard");
  h.allow({"t12", "t23", "onsite", "u", "order", "max_ratio"});
  HubbardConfig out;
  out.model.t12 = h.number("t12");
  out.model.t23 = h.number("t23");
  if (h.has("onsite")) {
    const auto e = h.numbers("onsite");
    if (e.size() != 3) h.fail("onsite", "expected three on-site energies");
    out.model.onsite = {e[0], e[1], e[2]};
  }
  out.model.u = h.number("u", out.model.u);
  out.order = h.integer("order", out.order);
  out.max_ratio = h.number("max_ratio", out.max_ratio);
  if (out.order < 1 || out.order > 12) h.fail("order", "must lie in 1..12");
  try {
    out.model.validate();
  } catch (const ConfigError& e) {
    h.fail(e.what());
  }
  return out;
}

}  // namespace dotlab::config
