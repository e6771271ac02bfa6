#pragma once

// Layered gate/oxide device model and the electrostatic potential energy it
// produces at the 2DEG plane.
//
// Stack (z up, nm): Si substrate below z = 0, SiO2 on [0, t_SiO2], Al2O3 on
// [t_SiO2, t_SiO2 + t_Al2O3]. Level-0 gates are metal sheets on top of the
// Al2O3; a gate on level L sits (gate_thickness + t_Al2O3) higher than level
// L-1 with Al2O3 filling the gap between levels. The 2DEG plane is at
// z = -z_2deg.
//
// The potential solves div(eps grad phi) = 0 on a box. The top face of the box
// is the plane of the highest gate level: gate footprints carry the gate
// voltage (weighted by cell coverage so that results vary smoothly with gate
// geometry) and the exposed surface is pinned at 0 V. Gates on lower levels
// are Dirichlet sheets inside the box. All other outer faces are
// zero-normal-derivative.

#include "dotlab/errors.hpp"
#include "dotlab/grid.hpp"
#include "dotlab/units.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dotlab::electrostatics {

struct Permittivities {
  double si = 11.7;
  double sio2 = 3.9;
  double al2o3 = 9.0;
};

struct Rect {
  double x0 = 0.0;
  double x1 = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x0 + x1); }
  double cy() const { return 0.5 * (y0 + y1); }
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }

  double overlap_area(const Rect& o) const {
    const double w = std::min(x1, o.x1) - std::max(x0, o.x0);
    const double h = std::min(y1, o.y1) - std::max(y0, o.y0);
    return (w > 0.0 && h > 0.0) ? w * h : 0.0;
  }
};

struct GatePatch {
  std::string name;
  Rect rect;
  int level = 0;
  double voltage = 0.0;
};

struct DeviceSpec {
  std::vector<GatePatch> gates;
  double t_sio2 = 5.9;
  double t_al2o3 = 1.0;
  double d = 23.8;  // inter-gate oxide gap
  double x = 36.0;  // dot-centre pitch
  double z_2deg = 1.0;
  double gate_thickness = 5.0;
  Permittivities permittivity;
  // Gates that host a dot, in array order. Empty means every gate.
  std::vector<std::string> dots;

  const GatePatch& gate(const std::string& name) const {
    for (const auto& g : gates)
      if (g.name == name) return g;
    throw UnknownGate("no gate named '" + name + "'");
  }
  GatePatch& gate(const std::string& name) {
    return const_cast<GatePatch&>(static_cast<const DeviceSpec&>(*this).gate(name));
  }
  std::vector<std::string> dot_gates() const {
    if (!dots.empty()) return dots;
    std::vector<std::string> names;
    for (const auto& g : gates) names.push_back(g.name);
    return names;
  }
};

/// Computational box. x/y are uniform node grids; nz counts the graded Si
/// cells below the 2DEG plane. Each oxide layer gets `cells_per_layer` cells,
/// so the mesh deforms continuously when a layer thickness changes.
struct GridSpec {
  int nx = 0;
  int ny = 0;
  int nz = 16;
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  double depth = 80.0;  // Si substrate below the interface
  int cells_per_layer = 4;
  double dz_fine = 0.5;  // spacing between the interface and the 2DEG plane

  double dx() const { return (x_max - x_min) / (nx - 1); }
  double dy() const { return (y_max - y_min) / (ny - 1); }

  /// Halves every spacing; the coarse nodes are a subset of the refined ones.
  GridSpec refined() const {
    GridSpec g = *this;
    g.nx = 2 * nx - 1;
    g.ny = 2 * ny - 1;
    g.nz = 2 * nz;
    g.cells_per_layer = 2 * cells_per_layer;
    g.dz_fine = 0.5 * dz_fine;
    return g;
  }
};

struct Layer {
  std::string name;
  double z_lo = 0.0;
  double z_hi = 0.0;
  double eps = 1.0;
};

/// Validated device with resolved stack-layer z coordinates.
struct DeviceModel {
  DeviceSpec spec;
  std::vector<Layer> stack;     // above the Si/SiO2 interface, bottom to top
  std::vector<double> level_z;  // gate sheet height per level
  double z_plane = 0.0;         // 2DEG plane (= -z_2deg)

  int top_level() const { return static_cast<int>(level_z.size()) - 1; }
  double z_top() const { return level_z.back(); }
};

namespace detail {

inline void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << field << " must be > 0 (got " << v << ")";
    throw NonPositiveDimension(os.str());
  }
}

inline void require_non_negative(double v, const char* field) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << field << " must be >= 0 (got " << v << ")";
    throw NonPositiveDimension(os.str());
  }
}

}  // namespace detail

inline DeviceModel build_device(const DeviceSpec& spec) {
  detail::require_positive(spec.t_sio2, "t_SiO2");
  detail::require_non_negative(spec.t_al2o3, "t_Al2O3");
  detail::require_positive(spec.d, "d");
  detail::require_positive(spec.x, "x");
  detail::require_non_negative(spec.z_2deg, "z_2deg");
  detail::require_positive(spec.gate_thickness, "gate_thickness");
  detail::require_positive(spec.permittivity.si, "permittivities.Si");
  detail::require_positive(spec.permittivity.sio2, "permittivities.SiO2");
  detail::require_positive(spec.permittivity.al2o3, "permittivities.Al2O3");

  std::set<std::string> names;
  int max_level = 0;
  for (const auto& g : spec.gates) {
    if (!names.insert(g.name).second) throw ConfigError("duplicate gate name '" + g.name + "'");
    if (!(g.rect.x1 > g.rect.x0)) throw NonPositiveDimension("gate " + g.name + ": rect x1 must exceed x0");
    if (!(g.rect.y1 > g.rect.y0)) throw NonPositiveDimension("gate " + g.name + ": rect y1 must exceed y0");
    if (g.level < 0) throw ConfigError("gate " + g.name + ": level must be >= 0");
    if (!std::isfinite(g.voltage)) throw ConfigError("gate " + g.name + ": voltage is not finite");
    max_level = std::max(max_level, g.level);
  }
  for (std::size_t a = 0; a < spec.gates.size(); ++a)
    for (std::size_t b = a + 1; b < spec.gates.size(); ++b) {
      const auto& ga = spec.gates[a];
      const auto& gb = spec.gates[b];
      if (ga.level == gb.level && ga.rect.overlap_area(gb.rect) > 0.0)
        throw OverlappingGates("gates " + ga.name + " and " + gb.name + " overlap on level " +
                               std::to_string(ga.level));
    }
  for (const auto& dot : spec.dots) (void)spec.gate(dot);

  DeviceModel model;
  model.spec = spec;
  model.z_plane = -spec.z_2deg;
  double z = 0.0;
  model.stack.push_back({"SiO2", z, z + spec.t_sio2, spec.permittivity.sio2});
  z += spec.t_sio2;
  if (spec.t_al2o3 > 0.0) {
    model.stack.push_back({"Al2O3", z, z + spec.t_al2o3, spec.permittivity.al2o3});
    z += spec.t_al2o3;
  }
  model.level_z.push_back(z);
  for (int level = 1; level <= max_level; ++level) {
    const double gap = spec.gate_thickness + spec.t_al2o3;
    model.stack.push_back({"Al2O3", z, z + gap, spec.permittivity.al2o3});
    z += gap;
    model.level_z.push_back(z);
  }
  return model;
}

/// Box covering every gate with `margin` nm to spare at the given lateral spacing.
inline GridSpec grid_for(const DeviceSpec& spec, double spacing, double margin = 40.0, double depth = 80.0,
                         int nz = 16) {
  double x0 = std::numeric_limits<double>::max(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& g : spec.gates) {
    x0 = std::min(x0, g.rect.x0);
    x1 = std::max(x1, g.rect.x1);
    y0 = std::min(y0, g.rect.y0);
    y1 = std::max(y1, g.rect.y1);
  }
  if (spec.gates.empty()) x0 = y0 = -margin, x1 = y1 = margin;
  GridSpec grid;
  const auto cells = [&](double lo, double hi) { return static_cast<int>(std::ceil((hi - lo + 2 * margin) / spacing)); };
  const int cx = cells(x0, x1), cy = cells(y0, y1);
  const double mx = 0.5 * (x0 + x1), my = 0.5 * (y0 + y1);
  grid.nx = cx + 1;
  grid.ny = cy + 1;
  grid.x_min = mx - 0.5 * cx * spacing;
  grid.x_max = mx + 0.5 * cx * spacing;
  grid.y_min = my - 0.5 * cy * spacing;
  grid.y_max = my + 0.5 * cy * spacing;
  grid.depth = depth;
  grid.nz = nz;
  return grid;
}

inline void validate_grid(const DeviceModel& model, const GridSpec& grid) {
  if (grid.nx < 16 || grid.ny < 16) throw InvalidGrid("grid needs nx, ny >= 16");
  if (grid.nz < 2 || grid.cells_per_layer < 1) throw InvalidGrid("grid needs nz >= 2 and cells_per_layer >= 1");
  if (!(grid.x_max > grid.x_min) || !(grid.y_max > grid.y_min)) throw InvalidGrid("grid extents are empty");
  if (!(grid.depth > model.spec.z_2deg) || !(grid.dz_fine > 0.0))
    throw InvalidGrid("grid depth must exceed z_2deg and dz_fine must be positive");
  const double mx = 2.0 * grid.dx(), my = 2.0 * grid.dy();
  for (const auto& g : model.spec.gates) {
    if (g.rect.x0 < grid.x_min + mx || g.rect.x1 > grid.x_max - mx || g.rect.y0 < grid.y_min + my ||
        g.rect.y1 > grid.y_max - my)
      throw InvalidGrid("grid does not cover gate " + g.name + " with two spacings of margin");
  }
}

enum class PotentialSource { Numeric, Analytic };

inline const char* to_string(PotentialSource s) { return s == PotentialSource::Numeric ? "numeric" : "analytic"; }

/// Electron potential energy (ueV) sampled on the 2DEG plane.
struct PotentialMap : Field2D {
  PotentialSource source = PotentialSource::Numeric;
  double z = 0.0;
  int iterations = 0;
  double residual = 0.0;
  std::string note;
};

/// Full three-dimensional electrostatic potential (V) on the solver mesh.
struct LaplaceField {
  std::vector<double> xs, ys, zs;
  Eigen::VectorXd phi;
  std::vector<char> fixed;  // Dirichlet node flags
  int plane_k = 0;          // z index of the 2DEG plane
  int iterations = 0;
  double residual = 0.0;

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           xs.size() * (static_cast<std::size_t>(j) + ys.size() * static_cast<std::size_t>(k));
  }
};

namespace detail {

struct ZMesh {
  std::vector<double> z;    // node heights, ascending
  std::vector<double> eps;  // permittivity of cell [z[k], z[k+1]]
  int plane_k = 0;
  std::vector<int> level_k;
};

inline void append_uniform(ZMesh& m, double z_hi, int cells, double eps) {
  const double z_lo = m.z.back();
  for (int c = 1; c <= cells; ++c) {
    m.z.push_back(c == cells ? z_hi : z_lo + (z_hi - z_lo) * c / cells);
    m.eps.push_back(eps);
  }
}

inline ZMesh build_z_mesh(const DeviceModel& model, const GridSpec& grid) {
  ZMesh m;
  const double eps_si = model.spec.permittivity.si;
  const double plane = model.z_plane;
  const double graded = grid.depth + plane;  // length below the plane
  const double first = std::min(grid.dz_fine, graded / grid.nz);
  std::vector<double> widths(static_cast<std::size_t>(grid.nz), graded / grid.nz);
  if (first * grid.nz < graded * (1.0 - 1e-12)) {
    // Geometric grading: first * (r^n - 1) / (r - 1) == graded.
    double lo = 1.0, hi = 2.0;
    const auto total = [&](double r) { return first * (std::pow(r, grid.nz) - 1.0) / (r - 1.0); };
    while (total(hi) < graded) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (total(mid) < graded ? lo : hi) = mid;
    }
    const double r = 0.5 * (lo + hi);
    for (int c = 0; c < grid.nz; ++c) widths[static_cast<std::size_t>(grid.nz - 1 - c)] = first * std::pow(r, c);
  }
  m.z.push_back(-grid.depth);
  double z = -grid.depth;
  for (int c = 0; c < grid.nz; ++c) {
    z += widths[static_cast<std::size_t>(c)];
    m.z.push_back(c == grid.nz - 1 ? plane : z);
    m.eps.push_back(eps_si);
  }
  m.plane_k = static_cast<int>(m.z.size()) - 1;
  if (plane < 0.0) {
    const int cells = std::max(1, static_cast<int>(std::ceil(-plane / grid.dz_fine - 1e-9)));
    append_uniform(m, 0.0, cells, eps_si);
  }
  std::size_t next_level = 0;
  for (const auto& layer : model.stack) {
    append_uniform(m, layer.z_hi, grid.cells_per_layer, layer.eps);
    while (next_level < model.level_z.size() && std::abs(model.level_z[next_level] - layer.z_hi) < 1e-12) {
      m.level_k.push_back(static_cast<int>(m.z.size()) - 1);
      ++next_level;
    }
  }
  return m;
}

}  // namespace detail

/// Solves the charge-free Laplace problem. The returned field has relative
/// residual <= tol. The conjugate-gradient iteration runs to 1e-3 tol (floored
/// at 1e-13) so that the error of phi itself, which exceeds the residual by
/// the conditioning of the system, also stays below tol relative to |phi|.
inline LaplaceField solve_laplace(const DeviceModel& model, const GridSpec& grid, double tol = 1e-6,
                                  int max_iterations = 20000) {
  validate_grid(model, grid);
  const auto zm = detail::build_z_mesh(model, grid);
  LaplaceField f;
  f.xs.resize(static_cast<std::size_t>(grid.nx));
  f.ys.resize(static_cast<std::size_t>(grid.ny));
  for (int i = 0; i < grid.nx; ++i) f.xs[static_cast<std::size_t>(i)] = grid.x_min + grid.dx() * i;
  for (int j = 0; j < grid.ny; ++j) f.ys[static_cast<std::size_t>(j)] = grid.y_min + grid.dy() * j;
  f.zs = zm.z;
  f.plane_k = zm.plane_k;
  const int nx = grid.nx, ny = grid.ny, nz = static_cast<int>(zm.z.size());
  const double dx = grid.dx(), dy = grid.dy();
  const std::size_t n_nodes = static_cast<std::size_t>(nx) * ny * nz;
  f.phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_nodes));
  f.fixed.assign(n_nodes, 0);

  // Dirichlet data.
  const int top = nz - 1;
  for (int level = 0; level <= model.top_level(); ++level) {
    const int k = zm.level_k[static_cast<std::size_t>(level)];
    const bool top_plane = (k == top);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const Rect cell{f.xs[i] - 0.5 * dx, f.xs[i] + 0.5 * dx, f.ys[j] - 0.5 * dy, f.ys[j] + 0.5 * dy};
        double value = 0.0, best = 0.0, best_v = 0.0;
        for (const auto& g : model.spec.gates) {
          if (g.level != level) continue;
          const double frac = cell.overlap_area(g.rect) / cell.area();
          value += frac * g.voltage;
          if (frac > best) best = frac, best_v = g.voltage;
        }
        const std::size_t n = f.index(i, j, k);
        if (top_plane) {
          f.fixed[n] = 1;
          f.phi[static_cast<Eigen::Index>(n)] = value;
        } else if (best >= 0.5) {
          f.fixed[n] = 1;
          f.phi[static_cast<Eigen::Index>(n)] = best_v;
        }
      }
  }

  std::vector<Eigen::Index> unknown(n_nodes, -1);
  Eigen::Index n_free = 0;
  for (std::size_t n = 0; n < n_nodes; ++n)
    if (!f.fixed[n]) unknown[n] = n_free++;

  // Finite-volume conductances.
  const auto half = [](const std::vector<double>& c, int i, double h) {
    return (i == 0 || i == static_cast<int>(c.size()) - 1) ? 0.5 * h : h;
  };
  std::vector<double> wz(static_cast<std::size_t>(nz)), eps_node(static_cast<std::size_t>(nz));
  for (int k = 0; k < nz; ++k) {
    const double hb = k > 0 ? zm.z[k] - zm.z[k - 1] : 0.0;
    const double ha = k < nz - 1 ? zm.z[k + 1] - zm.z[k] : 0.0;
    const double eb = k > 0 ? zm.eps[k - 1] : 0.0;
    const double ea = k < nz - 1 ? zm.eps[k] : 0.0;
    wz[k] = 0.5 * (hb + ha);
    eps_node[k] = (0.5 * hb * eb + 0.5 * ha * ea) / wz[k];
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n_free) * 7);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_free);
  std::vector<double> diag(static_cast<std::size_t>(n_free), 0.0);
  const auto link = [&](std::size_t a, std::size_t b, double g) {
    const Eigen::Index ua = unknown[a], ub = unknown[b];
    if (ua < 0 && ub < 0) return;
    if (ua >= 0) diag[ua] += g;
    if (ub >= 0) diag[ub] += g;
    if (ua >= 0 && ub >= 0) {
      trip.emplace_back(ua, ub, -g);
      trip.emplace_back(ub, ua, -g);
    } else if (ua >= 0) {
      rhs[ua] += g * f.phi[static_cast<Eigen::Index>(b)];
    } else {
      rhs[ub] += g * f.phi[static_cast<Eigen::Index>(a)];
    }
  };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::size_t n = f.index(i, j, k);
        const double wx = half(f.xs, i, dx), wy = half(f.ys, j, dy);
        if (i + 1 < nx) link(n, f.index(i + 1, j, k), eps_node[k] * wy * wz[k] / dx);
        if (j + 1 < ny) link(n, f.index(i, j + 1, k), eps_node[k] * wx * wz[k] / dy);
        if (k + 1 < nz) link(n, f.index(i, j, k + 1), zm.eps[k] * wx * wy / (zm.z[k + 1] - zm.z[k]));
      }
  for (Eigen::Index u = 0; u < n_free; ++u) trip.emplace_back(u, u, diag[u]);

  Eigen::SparseMatrix<double> a(n_free, n_free);
  a.setFromTriplets(trip.begin(), trip.end());
  trip.clear();
  trip.shrink_to_fit();

  Eigen::VectorXd sol = Eigen::VectorXd::Zero(n_free);
  if (rhs.squaredNorm() > 0.0) {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
    cg.setTolerance(std::max(1e-3 * tol, 1e-13));
    cg.setMaxIterations(max_iterations);
    cg.compute(a);
    sol = cg.solve(rhs);
    f.iterations = static_cast<int>(cg.iterations());
    f.residual = cg.error();
    if (!(f.residual <= tol))
      throw NoConvergence("Laplace solve did not reach tolerance", f.iterations, f.residual);
  }
  for (std::size_t n = 0; n < n_nodes; ++n)
    if (unknown[n] >= 0) f.phi[static_cast<Eigen::Index>(n)] = sol[unknown[n]];
  return f;
}

/// Electron potential energy -e*phi (ueV) on the 2DEG plane.
inline PotentialMap solve_potential(const DeviceModel& model, const GridSpec& grid, double tol = 1e-6) {
  const auto field = solve_laplace(model, grid, tol);
  PotentialMap map;
  map.grid = Grid2D{grid.nx, grid.ny, grid.x_min, grid.y_min, grid.dx(), grid.dy()};
  map.values.resize(static_cast<Eigen::Index>(map.grid.size()));
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i)
      map(i, j) = -units::kUeVPerVolt * field.phi[static_cast<Eigen::Index>(field.index(i, j, field.plane_k))];
  map.source = PotentialSource::Numeric;
  map.z = model.z_plane;
  map.iterations = field.iterations;
  map.residual = field.residual;
  map.note = "charge-free Laplace, pinned top surface";
  return map;
}

/// Potential under a constant-voltage rectangle in a pinned surface at depth
/// `depth` below it, uniform dielectric. Returns volts.
inline double rectangle_kernel(const Rect& r, double x, double y, double depth) {
  const auto g = [depth](double u, double v) {
    return std::atan(u * v / (depth * std::sqrt(u * u + v * v + depth * depth)));
  };
  return (g(x - r.x0, y - r.y0) + g(x - r.x0, r.y1 - y) + g(r.x1 - x, y - r.y0) + g(r.x1 - x, r.y1 - y)) /
         (2.0 * std::numbers::pi);
}

/// Closed-form pinned-surface potential energy (ueV) of a set of gates at the
/// given depth below the gate plane, sampled on `grid`.
inline PotentialMap analytic_gate_potential(const std::vector<GatePatch>& gates, double depth, const Grid2D& grid) {
  detail::require_positive(depth, "depth");
  PotentialMap map;
  map.grid = grid;
  map.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      double phi = 0.0;
      for (const auto& g : gates) phi += g.voltage * rectangle_kernel(g.rect, grid.x(i), grid.y(j), depth);
      map(i, j) = -units::kUeVPerVolt * phi;
    }
  map.source = PotentialSource::Analytic;
  map.z = -depth;
  map.note = "uniform permittivity, pinned-surface closed form";
  return map;
}

struct LeverArm {
  std::string dot;
  double alpha = 0.0;  // ueV/V
};

namespace detail {

inline double dot_minimum(const PotentialMap& pot, const Rect& window) {
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < pot.grid.ny; ++j)
    for (int i = 0; i < pot.grid.nx; ++i)
      if (window.contains(pot.grid.x(i), pot.grid.y(j))) best = std::min(best, pot(i, j));
  return best;
}

}  // namespace detail

/// Response of each dot's potential-energy minimum to a voltage step on one
/// gate. The step is repeated at half size; a change of more than 1% in the
/// result is reported as NonlinearResponse.
inline std::vector<LeverArm> detuning_lever_arm(const DeviceModel& model, const GridSpec& grid,
                                                const std::string& gate_name, double dv, double tol = 1e-9) {
  if (dv == 0.0) throw ConfigError("lever-arm step must be non-zero");
  (void)model.spec.gate(gate_name);
  const auto solve_with = [&](double step) {
    DeviceModel m = model;
    m.spec.gate(gate_name).voltage += step;
    return solve_potential(m, grid, tol);
  };
  const auto base = solve_potential(model, grid, tol);
  const auto full = solve_with(dv);
  const auto halfway = solve_with(0.5 * dv);
  std::vector<LeverArm> out;
  for (const auto& dot : model.spec.dot_gates()) {
    const Rect window = model.spec.gate(dot).rect;
    const double u0 = detail::dot_minimum(base, window);
    const double a_full = (detail::dot_minimum(full, window) - u0) / dv;
    const double a_half = (detail::dot_minimum(halfway, window) - u0) / (0.5 * dv);
    if (std::abs(a_full - a_half) > 0.01 * std::max(std::abs(a_full), 1.0))
      throw NonlinearResponse("lever arm of dot " + dot + " changes by more than 1% when the step is halved");
    out.push_back({dot, a_full});
  }
  return out;
}

/// Linear array of plunger gates G1..Gn used by the sweep recipes. Gate k is
/// centred at (k - (n-1)/2) * x, spans x - d laterally and gate_length along y.
struct LinearArray {
  int n_gates = 3;
  double t_sio2 = 5.9;
  double t_al2o3 = 1.0;
  double d = 23.8;
  double x = 36.0;
  double z_2deg = 1.0;
  double gate_length = 30.0;
  double gate_thickness = 5.0;
  Permittivities permittivity;
  std::vector<double> voltages{0.05, 0.05, 0.05};

  DeviceSpec build() const {
    if (n_gates < 1) throw ConfigError("linear array needs at least one gate");
    if (static_cast<int>(voltages.size()) != n_gates) throw ConfigError("linear array needs one voltage per gate");
    detail::require_positive(x - d, "gate width (x - d)");
    detail::require_positive(gate_length, "gate_length");
    DeviceSpec spec;
    spec.t_sio2 = t_sio2;
    spec.t_al2o3 = t_al2o3;
    spec.d = d;
    spec.x = x;
    spec.z_2deg = z_2deg;
    spec.gate_thickness = gate_thickness;
    spec.permittivity = permittivity;
    const double w = x - d;
    for (int k = 0; k < n_gates; ++k) {
      const double c = (k - 0.5 * (n_gates - 1)) * x;
      spec.gates.push_back(GatePatch{"G" + std::to_string(k + 1),
                                     Rect{c - 0.5 * w, c + 0.5 * w, -0.5 * gate_length, 0.5 * gate_length}, 0,
                                     voltages[static_cast<std::size_t>(k)]});
      spec.dots.push_back(spec.gates.back().name);
    }
    return spec;
  }

  /// Solver box that depends only on the pitch and gate length, so that every
  /// point of a d or oxide sweep shares the same lateral mesh.
  GridSpec grid(double spacing, double margin = 40.0, double depth = 80.0, int nz = 16) const {
    const double half_x = 0.5 * n_gates * x + margin;
    const double half_y = 0.5 * gate_length + margin;
    const int cx = static_cast<int>(std::ceil(2.0 * half_x / spacing));
    const int cy = static_cast<int>(std::ceil(2.0 * half_y / spacing));
    GridSpec g;
    g.nx = cx + 1;
    g.ny = cy + 1;
    g.x_min = -0.5 * cx * spacing;
    g.x_max = 0.5 * cx * spacing;
    g.y_min = -0.5 * cy * spacing;
    g.y_max = 0.5 * cy * spacing;
    g.depth = depth;
    g.nz = nz;
    return g;
  }
};

}  // namespace dotlab::electrostatics
