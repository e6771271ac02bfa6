#pragma once

// Geometry sweeps: electrostatics -> orbitals -> (optionally) two-electron CI
// for one point of a linear-array parameter scan.
//
// Each point solves Laplace once on the array's fixed lateral mesh, rescales
// the potential so that its deepest point sits at -dot_depth (Laplace is
// linear, so this equals retuning the plunger voltages to a fixed dot depth),
// resamples it onto a finer orbital grid around the two dots and diagonalizes.

#include "dotlab/electrostatics.hpp"
#include "dotlab/errors.hpp"
#include "dotlab/fci.hpp"
#include "dotlab/orbitals.hpp"
#include "dotlab/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

namespace dotlab::pipeline {

enum class SweepAxis { TSiO2, TAl2O3, D };

inline const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::TSiO2: return "t_SiO2";
    case SweepAxis::TAl2O3: return "t_Al2O3";
    default: return "d";
  }
}

inline SweepAxis parse_axis(const std::string& s) {
  for (SweepAxis a : {SweepAxis::TSiO2, SweepAxis::TAl2O3, SweepAxis::D})
    if (s == axis_name(a)) return a;
  throw ConfigError("unknown sweep parameter '" + s + "' (expected t_SiO2, t_Al2O3 or d)");
}

struct ExchangeSetup {
  electrostatics::LinearArray array = [] {
    electrostatics::LinearArray a;
    a.n_gates = 2;
    a.voltages = {0.05, 0.05};
    return a;
  }();
  double es_spacing = 2.0;       // nm, Laplace mesh
  double es_tol = 1e-6;
  double orbital_spacing = 1.0;  // nm
  double orbital_margin = 10.0;  // nm beyond the outer dot edges
  double dot_depth = 15000.0;    // ueV; <= 0 keeps the raw gate voltages
  int n_orbitals = 12;
  orbitals::EffectiveMassParams mass;
  fci::CoulombKernel kernel;
  double doublet_guard = 3.0;
};

inline electrostatics::LinearArray with_parameter(electrostatics::LinearArray a, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::TSiO2: a.t_sio2 = value; break;
    case SweepAxis::TAl2O3: a.t_al2o3 = value; break;
    case SweepAxis::D: a.d = value; break;
  }
  return a;
}

/// Potential energy on the orbital grid spanning the two central dots.
inline Field2D dot_region_potential(const ExchangeSetup& setup, const electrostatics::LinearArray& array) {
  const auto spec = array.build();
  const auto model = electrostatics::build_device(spec);
  auto pot = electrostatics::solve_potential(model, array.grid(setup.es_spacing), setup.es_tol);
  if (setup.dot_depth > 0.0) {
    const double umin = pot.values.minCoeff();
    if (!(umin < 0.0)) throw ConfigError("gate voltages produce no confining well; cannot set the dot depth");
    pot.values *= -setup.dot_depth / umin;
  }
  const int centre = (array.n_gates - 1) / 2;
  const double c1 = (centre - 0.5 * (array.n_gates - 1)) * array.x;
  const double c2 = c1 + array.x;
  const double h = setup.orbital_spacing;
  const double xl = c1 - 0.5 * array.x - setup.orbital_margin;
  const double xr = c2 + 0.5 * array.x + setup.orbital_margin;
  const double yh = 0.5 * array.gate_length + setup.orbital_margin;
  Grid2D og;
  og.dx = og.dy = h;
  og.nx = static_cast<int>(std::round((xr - xl) / h)) + 1;
  og.ny = static_cast<int>(std::round(2.0 * yh / h)) + 1;
  og.x0 = xl;
  og.y0 = -yh;
  Field2D out{og, Eigen::VectorXd(static_cast<Eigen::Index>(og.size()))};
  for (int j = 0; j < og.ny; ++j)
    for (int i = 0; i < og.nx; ++i) out(i, j) = pot.sample(og.x(i), og.y(j));
  return out;
}

struct SweepRow {
  double param = 0.0;      // nm
  double j_mhz = 0.0;      // NaN for orbital-only sweeps
  double t0_mhz = 0.0;
  double eps_left = 0.0;   // ueV
  double eps_right = 0.0;  // ueV
  double u_ueV = 0.0;      // V_LLLL - V_LLRR; NaN for orbital-only sweeps
  std::string status = "ok";
  std::string message;

  bool ok() const { return status == "ok"; }
};

/// U_eff = V_LLLL - V_LLRR for the localized pair built from orbitals 0 and 1.
inline double effective_u(const orbitals::OrbitalBasis& basis, const orbitals::LocalizedPair& pair,
                          const fci::CoulombTensor& v) {
  const Eigen::Vector2d cl(basis.inner(basis.states.col(0), pair.left), basis.inner(basis.states.col(1), pair.left));
  const Eigen::Vector2d cr(basis.inner(basis.states.col(0), pair.right), basis.inner(basis.states.col(1), pair.right));
  double llll = 0.0, llrr = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          llll += cl[i] * cl[j] * cl[k] * cl[l] * v(i, j, k, l);
          llrr += cl[i] * cr[j] * cl[k] * cr[l] * v(i, j, k, l);
        }
  return llll - llrr;
}

/// One sweep point. Errors are captured in the row, never thrown.
inline SweepRow sweep_point(const ExchangeSetup& setup, SweepAxis axis, double value, bool with_ci) {
  SweepRow row;
  row.param = value;
  row.j_mhz = row.u_ueV = std::numeric_limits<double>::quiet_NaN();
  try {
    const auto array = with_parameter(setup.array, axis, value);
    const auto pot = dot_region_potential(setup, array);
    const auto op = orbitals::assemble_sp_hamiltonian(pot, setup.mass);
    const auto basis = orbitals::lowest_states(op, with_ci ? setup.n_orbitals : std::max(3, std::min(setup.n_orbitals, 4)));
    const auto pair = orbitals::localize_double_dot(basis, setup.doublet_guard);
    row.t0_mhz = pair.t0;
    row.eps_left = pair.eps_left;
    row.eps_right = pair.eps_right;
    if (with_ci) {
      const auto v = fci::coulomb_tensor(basis, setup.kernel);
      const auto ci = fci::build_and_solve_ci(basis, v);
      row.j_mhz = ci.j_direct;
      row.u_ueV = effective_u(basis, pair, v);
    }
  } catch (const Error& e) {
    row.status = "error";
    row.message = e.kind() + ": " + e.what();
  } catch (const std::exception& e) {
    row.status = "error";
    row.message = e.what();
  }
  return row;
}

/// Evaluates `n` independent jobs on up to `threads` workers; out[i] = job(i).
template <class Row, class Job>
std::vector<Row> parallel_map(std::size_t n, int threads, const Job& job) {
  std::vector<Row> out(n);
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) out[i] = job(i);
  };
  if (workers == 1) {
    work();
    return out;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  return out;
}

/// J_direct along one geometry axis; rows follow the order of `values`.
inline std::vector<SweepRow> sweep_exchange(const ExchangeSetup& setup, SweepAxis axis, const std::vector<double>& values,
                                            int threads = 1) {
  return parallel_map<SweepRow>(values.size(), threads,
                                [&](std::size_t i) { return sweep_point(setup, axis, values[i], true); });
}

/// Tunnel coupling and on-site energies along one geometry axis.
inline std::vector<SweepRow> barrier_sweep_t0(const ExchangeSetup& setup, SweepAxis axis, const std::vector<double>& values,
                                              int threads = 1) {
  return parallel_map<SweepRow>(values.size(), threads,
                                [&](std::size_t i) { return sweep_point(setup, axis, values[i], false); });
}

/// Slope, intercept and R^2 of log(y) against x over rows with y > 0.
struct LogLinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LogLinearFit log_linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> xs, ls;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (y[i] > 0.0 && std::isfinite(y[i])) xs.push_back(x[i]), ls.push_back(std::log(y[i]));
  if (xs.size() < 2) throw InsufficientData("log-linear fit needs two positive points");
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) a(i, 0) = 1.0, a(i, 1) = xs[static_cast<std::size_t>(i)], b[i] = ls[static_cast<std::size_t>(i)];
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
  const double mean = b.mean();
  const double ss_tot = (b.array() - mean).square().sum();
  const double ss_res = (a * c - b).squaredNorm();
  return {c[1], c[0], ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0};
}

}  // namespace dotlab::pipeline
