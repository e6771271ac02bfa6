#pragma once

// Command implementations behind the `dotlab` executable. Each command reads
// its sections of a RunConfig, writes CSV (canonical), SVG and JSON reports
// into the output directory and finishes with manifest.json.

#include "dotlab/config.hpp"
#include "dotlab/electrostatics.hpp"
#include "dotlab/esr.hpp"
#include "dotlab/hubbard.hpp"
#include "dotlab/io.hpp"
#include "dotlab/pipeline.hpp"
#include "dotlab/units.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace dotlab::harness {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunOptions {
  fs::path out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
};

// ------------------------------------------------------------ potential

inline void cmd_potential(const config::RunConfig& cfg, io::RunManifest& man) {
  const auto pc = config::parse_potential(cfg);
  const auto model = electrostatics::build_device(pc.spec);
  spdlog::info("potential: {} gates, grid {}x{}x{}", pc.spec.gates.size(), pc.grid.nx, pc.grid.ny, pc.grid.nz);
  const auto pot = electrostatics::solve_potential(model, pc.grid, pc.tol);
  spdlog::info("Laplace solve: {} iterations, residual {:.3g}", pot.iterations, pot.residual);

  io::CsvWriter csv({"x_nm", "y_nm", "U_ueV"});
  std::vector<double> xs, ys;
  Eigen::MatrixXd img(pot.grid.ny, pot.grid.nx);
  for (int i = 0; i < pot.grid.nx; ++i) xs.push_back(pot.grid.x(i));
  for (int j = 0; j < pot.grid.ny; ++j) {
    ys.push_back(pot.grid.y(j));
    for (int i = 0; i < pot.grid.nx; ++i) {
      csv.row({io::num(pot.grid.x(i)), io::num(pot.grid.y(j)), io::num(pot(i, j))});
      img(j, i) = pot(i, j);
    }
  }
  man.write("potential.csv", csv.str());
  man.write("potential.svg", io::svg_heatmap(xs, ys, img, "U at the 2DEG plane (ueV)", "x (nm)", "y (nm)"));

  io::CsvWriter dots({"dot", "x_nm", "y_nm", "U_min_ueV"});
  for (const auto& name : pc.spec.dot_gates()) {
    const auto& r = pc.spec.gate(name).rect;
    double best = INFINITY, bx = 0, by = 0;
    for (int j = 0; j < pot.grid.ny; ++j)
      for (int i = 0; i < pot.grid.nx; ++i)
        if (r.contains(pot.grid.x(i), pot.grid.y(j)) && pot(i, j) < best) best = pot(i, j), bx = pot.grid.x(i), by = pot.grid.y(j);
    dots.row({name, io::num(bx), io::num(by), io::num(best)});
  }
  man.write("dots.csv", dots.str());

  if (pc.lever_gate) {
    const auto arms = electrostatics::detuning_lever_arm(model, pc.grid, *pc.lever_gate, pc.lever_dv, std::min(pc.tol, 1e-9));
    io::CsvWriter la({"gate", "dot", "alpha_ueV_per_V"});
    for (const auto& a : arms) la.row({*pc.lever_gate, a.dot, io::num(a.alpha)});
    man.write("lever_arm.csv", la.str());
  }
}

// ------------------------------------------------------------ exchange sweep

inline void cmd_exchange_sweep(const config::RunConfig& cfg, io::RunManifest& man, int threads) {
  const auto sc = config::parse_sweep(cfg);
  const char* axis = pipeline::axis_name(sc.axis);
  spdlog::info("{} sweep over {}: {} points, {} threads", sc.with_ci ? "exchange" : "t0", axis, sc.values.size(), threads);
  const auto rows = sc.with_ci ? pipeline::sweep_exchange(sc.setup, sc.axis, sc.values, threads)
                               : pipeline::barrier_sweep_t0(sc.setup, sc.axis, sc.values, threads);
  std::vector<double> x, y;
  io::CsvWriter csv(sc.with_ci ? std::vector<std::string>{"param_nm", "J_MHz", "t0_MHz", "U_ueV", "status"}
                               : std::vector<std::string>{"param_nm", "t0_MHz", "eps_L_ueV", "eps_R_ueV", "status"});
  for (const auto& r : rows) {
    if (!r.ok()) {
      spdlog::warn("{} = {}: {}", axis, r.param, r.message);
      man.warn(fmt::format("{} = {}: {}", axis, io::num(r.param), r.message));
    }
    if (sc.with_ci)
      csv.row({io::num(r.param), io::num(r.j_mhz), io::num(r.t0_mhz), io::num(r.u_ueV), r.status});
    else
      csv.row({io::num(r.param), io::num(r.t0_mhz), io::num(r.eps_left), io::num(r.eps_right), r.status});
    if (r.ok()) x.push_back(r.param), y.push_back(sc.with_ci ? r.j_mhz : r.t0_mhz);
  }
  const std::string stem = sc.with_ci ? "exchange_sweep" : "t0_sweep";
  man.write(stem + ".csv", csv.str());
  io::Series s{sc.with_ci ? "J_direct" : "t0", x, y};
  man.write(stem + ".svg", io::svg_plot({s}, fmt::format("{} vs {}", sc.with_ci ? "J_direct" : "t0", axis),
                                        fmt::format("{} (nm)", axis), sc.with_ci ? "J (MHz)" : "t0 (MHz)", true));
}

// ------------------------------------------------------------ funnels

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

inline void cmd_funnel(const config::RunConfig& cfg, io::RunManifest& man) {
  const auto fc = config::parse_funnel(cfg);
  const auto& p = fc.params;
  const auto vs = linspace(fc.v_min, fc.v_max, fc.n_v);
  std::pair<double, double> fr;
  if (fc.f_range) {
    fr = *fc.f_range;
  } else {
    const double w = std::max(4.0 * std::abs(p.t0), 10.0 * fc.linewidth);
    const double stark_lo = std::min(p.s * fc.v_min, p.s * fc.v_max), stark_hi = std::max(p.s * fc.v_min, p.s * fc.v_max);
    fr = {p.f0 + std::min(0.0, p.delta_ez) + stark_lo - w, p.f0 + std::max(0.0, p.delta_ez) + stark_hi + w};
  }
  const auto fs_grid = linspace(fr.first, fr.second, fc.n_f);
  spdlog::info("funnel map: t0 {} MHz, {} x {} samples", p.t0, fc.n_v, fc.n_f);

  io::CsvWriter lines({"V_P_V", "f_MHz", "branch", "weight"});
  std::array<io::Series, 4> branch_series{io::Series{"i", {}, {}, "#d62728"}, io::Series{"ii", {}, {}, "#1f77b4"},
                                          io::Series{"iii", {}, {}, "#ff7f0e"}, io::Series{"iv", {}, {}, "#2ca02c"}};
  for (double v : vs)
    for (const auto& t : esr::transition_frequencies(p, v)) {
      lines.row({io::num(v), io::num(t.f), esr::label(t.branch), io::num(t.weight)});
      auto& s = branch_series[static_cast<std::size_t>(t.branch)];
      s.x.push_back(v);
      s.y.push_back(t.f - p.f0);
    }
  man.write("transitions.csv", lines.str());

  const auto map = esr::funnel_map(p, vs, fs_grid, fc.linewidth);
  io::CsvWriter grid({"V_P_V", "f_MHz", "visibility"});
  for (std::size_t iv = 0; iv < vs.size(); ++iv)
    for (std::size_t jf = 0; jf < fs_grid.size(); ++jf)
      grid.row({io::num(vs[iv]), io::num(fs_grid[jf]),
                io::num(map.values(static_cast<Eigen::Index>(jf), static_cast<Eigen::Index>(iv)))});
  man.write("funnel_map.csv", grid.str());
  std::vector<double> frel;
  for (double f : fs_grid) frel.push_back(f - p.f0);
  man.write("funnel.svg", io::svg_heatmap(vs, frel, map.values, fmt::format("Spin funnel, t0 = {} MHz", p.t0), "V_P (V)",
                                          fmt::format("f - {} (MHz)", p.f0)));
  std::vector<io::Series> present;
  for (auto& s : branch_series)
    if (!s.x.empty()) s.markers_only = true, present.push_back(s);
  man.write("branches.svg", io::svg_plot(present, "Transition branches", "V_P (V)", fmt::format("f - {} (MHz)", p.f0), false));
}

inline json params_json(const esr::FunnelParams& p) {
  return {{"t0", p.t0}, {"alpha", p.alpha}, {"v_ac", p.v_ac}, {"s", p.s}, {"f0", p.f0}, {"delta_ez", p.delta_ez}};
}

inline std::array<double, 5> funnel_values(const esr::FunnelParams& p) { return {p.t0, p.alpha, p.v_ac, p.s, p.f0}; }

inline void cmd_fit_funnel(const config::RunConfig& cfg, io::RunManifest& man, std::uint64_t seed) {
  const auto fc = config::parse_fit_funnel(cfg);
  std::vector<esr::FunnelPoint> data;
  if (fc.truth) {
    data = esr::synth_funnel(*fc.truth, fc.v_min, fc.v_max, fc.n_points, fc.sigma_f, seed, fc.branches);
  } else {
    std::vector<std::string> header;
    const auto rows = io::read_csv(*fc.data_file, &header);
    if (header.size() < 3 || header[0] != "V_P_V" || header[1] != "f_MHz" || header[2] != "branch")
      throw ConfigError("/data/file: expected columns V_P_V,f_MHz,branch");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      try {
        data.push_back({std::stod(rows[i].at(0)), std::stod(rows[i].at(1)), esr::parse_branch(rows[i].at(2))});
      } catch (const std::exception& e) {
        throw ConfigError("/data/file: row " + std::to_string(i + 2) + ": " + e.what());
      }
    }
  }
  io::CsvWriter ds({"V_P_V", "f_MHz", "branch"});
  for (const auto& d : data) ds.row({io::num(d.v_p), io::num(d.f), esr::label(d.branch)});
  man.write("dataset.csv", ds.str());

  const bool guessed = !fc.init;
  const esr::FunnelParams init = fc.init ? *fc.init : esr::guess_funnel(data, fc.delta_ez);
  spdlog::info("funnel fit: {} points, init t0 = {:.6g} MHz ({})", data.size(), init.t0, guessed ? "guess" : "config");
  const auto fit = esr::fit_funnel(data, init);

  json rep;
  rep["params"] = params_json(fit.params);
  rep["init"] = params_json(init);
  rep["init_source"] = guessed ? "guess" : "config";
  json se;
  for (std::size_t k = 0; k < 5; ++k) se[esr::kFunnelParamNames[k]] = fit.std_error[k];
  rep["std_error"] = se;
  rep["covariance"] = json::array();
  for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) row.push_back(fit.covariance(r, c));
    rep["covariance"].push_back(row);
  }
  rep["parameter_order"] = esr::kFunnelParamNames;
  rep["rms_MHz"] = fit.rms;
  rep["condition"] = fit.condition;
  rep["iterations"] = fit.iterations;
  rep["evaluations"] = fit.evaluations;
  rep["status"] = fit.status;
  rep["n_points"] = data.size();

  io::CsvWriter table({"param", "fit", "std_error", "truth", "rel_error"});
  const auto fv = funnel_values(fit.params);
  if (fc.truth) {
    rep["truth"] = params_json(*fc.truth);
    const auto tv = funnel_values(*fc.truth);
    rep["truth_vs_fit"] = json::array();
    for (std::size_t k = 0; k < 5; ++k) {
      const double rel = tv[k] != 0.0 ? (fv[k] - tv[k]) / std::abs(tv[k]) : fv[k] - tv[k];
      rep["truth_vs_fit"].push_back({{"param", esr::kFunnelParamNames[k]}, {"truth", tv[k]}, {"fit", fv[k]}, {"rel_error", rel}});
      table.row({esr::kFunnelParamNames[k], io::num(fv[k]), io::num(fit.std_error[k]), io::num(tv[k]), io::num(rel)});
    }
  } else {
    for (std::size_t k = 0; k < 5; ++k)
      table.row({esr::kFunnelParamNames[k], io::num(fv[k]), io::num(fit.std_error[k]), "nan", "nan"});
  }
  man.write("fit.csv", table.str());
  man.write("fit_report.json", rep.dump(2) + "\n");

  std::vector<io::Series> series;
  std::array<const char*, 4> colors{"#d62728", "#1f77b4", "#ff7f0e", "#2ca02c"};
  for (int b = 0; b < 4; ++b) {
    io::Series pts{"", {}, {}, colors[static_cast<std::size_t>(b)], true};
    for (const auto& d : data)
      if (static_cast<int>(d.branch) == b) pts.x.push_back(d.v_p), pts.y.push_back(d.f - fit.params.f0);
    if (pts.x.empty()) continue;
    io::Series model{fmt::format("branch {} fit", esr::label(static_cast<esr::Branch>(b))), {}, {}, colors[static_cast<std::size_t>(b)]};
    const auto [lo, hi] = std::minmax_element(pts.x.begin(), pts.x.end());
    for (double v : linspace(*lo, *hi, 400))
      model.x.push_back(v), model.y.push_back(esr::branch_frequency(fit.params, v, static_cast<esr::Branch>(b)) - fit.params.f0);
    series.push_back(pts);
    series.push_back(model);
  }
  man.write("fit.svg", io::svg_plot(series, fmt::format("Funnel fit, t0 = {:.6g} MHz", fit.params.t0), "V_P (V)",
                                    fmt::format("f - {:.6g} (MHz)", fit.params.f0), false));
}

inline void cmd_fit_ramsey(const config::RunConfig& cfg, io::RunManifest& man, std::uint64_t seed) {
  const auto rc = config::parse_fit_ramsey(cfg);
  esr::RamseyTrace trace;
  if (rc.truth) {
    trace = esr::synth_ramsey(*rc.truth, rc.span, rc.n, rc.sigma, seed);
  } else {
    std::vector<std::string> header;
    const auto rows = io::read_csv(*rc.trace_file, &header);
    if (header.size() < 2 || header[0] != "tau_us" || header[1] != "P_up")
      throw ConfigError("/ramsey/file: expected columns tau_us,P_up");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      try {
        trace.tau.push_back(std::stod(rows[i].at(0)));
        trace.p_up.push_back(std::stod(rows[i].at(1)));
      } catch (const std::exception& e) {
        throw ConfigError("/ramsey/file: row " + std::to_string(i + 2) + ": " + e.what());
      }
    }
  }
  io::CsvWriter tr({"tau_us", "P_up"});
  for (std::size_t i = 0; i < trace.tau.size(); ++i) tr.row({io::num(trace.tau[i]), io::num(trace.p_up[i])});
  man.write("trace.csv", tr.str());

  const auto fit = esr::fit_ramsey(trace);
  spdlog::info("Ramsey fit: T2* = {:.6g} +- {:.3g} us", fit.params.t2, fit.std_error.t2);
  for (const auto& w : fit.warnings) {
    spdlog::warn("Ramsey fit: {}", w);
    man.warn("Ramsey fit: " + w);
  }
  const auto pj = [](const esr::RamseyParams& p) {
    return json{{"a", p.a}, {"b", p.b}, {"omega", p.omega}, {"t2", p.t2}};
  };
  json rep;
  rep["params"] = pj(fit.params);
  rep["std_error"] = pj(fit.std_error);
  rep["rms"] = fit.rms;
  rep["iterations"] = fit.iterations;
  rep["status"] = fit.status;
  rep["warnings"] = fit.warnings;
  rep["n_points"] = trace.tau.size();
  io::CsvWriter table({"param", "fit", "std_error", "truth", "rel_error"});
  const std::array<double, 4> fv{fit.params.a, fit.params.b, fit.params.omega, fit.params.t2};
  const std::array<double, 4> ev{fit.std_error.a, fit.std_error.b, fit.std_error.omega, fit.std_error.t2};
  const std::array<const char*, 4> names{"a", "b", "omega", "t2"};
  std::array<double, 4> tv{NAN, NAN, NAN, NAN};
  if (rc.truth) {
    rep["truth"] = pj(*rc.truth);
    tv = {rc.truth->a, rc.truth->b, rc.truth->omega, rc.truth->t2};
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const double rel = rc.truth && tv[k] != 0.0 ? (fv[k] - tv[k]) / std::abs(tv[k]) : NAN;
    table.row({names[k], io::num(fv[k]), io::num(ev[k]), io::num(tv[k]), io::num(rel)});
  }
  man.write("ramsey_fit.csv", table.str());
  man.write("ramsey_report.json", rep.dump(2) + "\n");

  io::Series pts{"data", trace.tau, trace.p_up, "#1f77b4", true};
  io::Series model{"fit", {}, {}, "#d62728"};
  for (double t : linspace(trace.tau.front(), trace.tau.back(), 800)) model.x.push_back(t), model.y.push_back(fit.params(t));
  man.write("ramsey.svg", io::svg_plot({pts, model}, fmt::format("Ramsey, T2* = {:.4g} us", fit.params.t2), "tau (us)",
                                       "P_up", false));
}

// ------------------------------------------------------------ Hubbard

inline void cmd_hubbard(const config::RunConfig& cfg, io::RunManifest& man) {
  const auto hc = config::parse_hubbard(cfg);
  const auto spec = hubbard::three_site_ed(hc.model);
  io::CsvWriter levels({"level_index", "energy_ueV", "Sz", "charge_weight"});
  for (std::size_t i = 0; i < spec.levels.size(); ++i) {
    const auto& l = spec.levels[i];
    levels.row({std::to_string(i), io::num(l.energy), io::num(0.5 * l.two_sz), io::num(l.charge_weight)});
  }
  man.write("spectrum.csv", levels.str());

  io::CsvWriter couplings({"method", "J12_MHz", "J23_MHz", "J13_MHz", "residual_MHz", "status"});
  const auto ed = hubbard::heisenberg_fit(spec);
  couplings.row({"ed", io::num(ed.j12), io::num(ed.j23), io::num(ed.j13), io::num(ed.residual), "ok"});
  spdlog::info("ED: J12 = {:.6g}, J23 = {:.6g}, J13 = {:.6g} MHz", ed.j12, ed.j23, ed.j13);
  std::vector<int> orders{2};
  if (hc.order != 2) orders.push_back(hc.order);
  for (int order : orders) {
    const std::string method = "pt" + std::to_string(order);
    try {
      const auto pt = hubbard::superexchange_perturbative(hc.model, order, hc.max_ratio);
      const auto& c = pt.couplings;
      couplings.row({method, io::num(c.j12), io::num(c.j23), io::num(c.j13), io::num(c.residual), "ok"});
    } catch (const RegimeViolation& e) {
      spdlog::warn("{}: {}", method, e.what());
      man.warn(method + ": RegimeViolation: " + e.what());
      couplings.row({method, "nan", "nan", "nan", "nan", "RegimeViolation"});
    }
  }
  man.write("couplings.csv", couplings.str());
}

// ------------------------------------------------------------ dispatch

/// Runs one command and writes its manifest. Returns the number of warnings.
inline std::size_t run(const std::string& command, const config::RunConfig& cfg, const RunOptions& opt) {
  if (!cfg.command.empty() && cfg.command != command)
    throw ConfigError("/command: configuration is for '" + cfg.command + "', not '" + command + "'");
  io::RunManifest man(opt.out_dir, command, cfg.doc, opt.seed);
  if (command == "potential") cmd_potential(cfg, man);
  else if (command == "exchange-sweep") cmd_exchange_sweep(cfg, man, opt.threads);
  else if (command == "funnel") cmd_funnel(cfg, man);
  else if (command == "fit-funnel") cmd_fit_funnel(cfg, man, opt.seed);
  else if (command == "fit-ramsey") cmd_fit_ramsey(cfg, man, opt.seed);
  else if (command == "hubbard") cmd_hubbard(cfg, man);
  else throw ConfigError("/command: unknown command '" + command + "'");
  man.finish();
  return man.warning_count();
}

/// Exit code contract: 0 success, 1 runtime failure, 2 configuration error.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const NonPositiveDimension*>(&e) ||
      dynamic_cast<const OverlappingGates*>(&e) || dynamic_cast<const UnknownGate*>(&e) ||
      dynamic_cast<const InvalidGrid*>(&e))
    return 2;
  return 1;
}

inline json error_json(const std::exception& e) {
  const auto* de = dynamic_cast<const Error*>(&e);
  return {{"error", {{"kind", de ? de->kind() : std::string("InternalError")}, {"message", e.what()},
                     {"exit_code", exit_code_for(e)}}}};
}

}  // namespace dotlab::harness
