#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace dotlab {

/// Uniform rectilinear cross-section. Index (i, j) maps to i + nx * j.
/// A grid with ny == 1 is treated as one-dimensional along x.
struct Grid2D {
  int nx = 0;
  int ny = 1;
  double x0 = 0.0;
  double y0 = 0.0;
  double dx = 1.0;
  double dy = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  bool is_1d() const { return ny == 1; }
  double x(int i) const { return x0 + dx * i; }
  double y(int j) const { return y0 + dy * j; }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx) * static_cast<std::size_t>(j);
  }
  double x_max() const { return x(nx - 1); }
  double y_max() const { return y(ny - 1); }

  /// Area (or length, for 1D grids) carried by one sample in discrete integrals.
  double cell_measure() const { return is_1d() ? dx : dx * dy; }

  static Grid2D line(int n, double x_start, double spacing) {
    return Grid2D{n, 1, x_start, 0.0, spacing, 1.0};
  }
};

inline bool same_grid(const Grid2D& a, const Grid2D& b, double tol = 1e-9) {
  return a.nx == b.nx && a.ny == b.ny && std::abs(a.x0 - b.x0) < tol && std::abs(a.y0 - b.y0) < tol &&
         std::abs(a.dx - b.dx) < tol && std::abs(a.dy - b.dy) < tol;
}

/// Scalar samples on a Grid2D.
struct Field2D {
  Grid2D grid;
  Eigen::VectorXd values;

  double operator()(int i, int j) const { return values[static_cast<Eigen::Index>(grid.index(i, j))]; }
  double& operator()(int i, int j) { return values[static_cast<Eigen::Index>(grid.index(i, j))]; }

  /// Bilinear interpolation, clamped to the grid bounds.
  double sample(double x, double y) const {
    const double fx = std::clamp((x - grid.x0) / grid.dx, 0.0, static_cast<double>(grid.nx - 1));
    const int i0 = std::min(static_cast<int>(fx), std::max(grid.nx - 2, 0));
    const double wx = grid.nx > 1 ? fx - i0 : 0.0;
    const int i1 = std::min(i0 + 1, grid.nx - 1);
    if (grid.is_1d()) return (1 - wx) * (*this)(i0, 0) + wx * (*this)(i1, 0);
    const double fy = std::clamp((y - grid.y0) / grid.dy, 0.0, static_cast<double>(grid.ny - 1));
    const int j0 = std::min(static_cast<int>(fy), std::max(grid.ny - 2, 0));
    const double wy = fy - j0;
    const int j1 = std::min(j0 + 1, grid.ny - 1);
    return (1 - wx) * (1 - wy) * (*this)(i0, j0) + wx * (1 - wy) * (*this)(i1, j0) +
           (1 - wx) * wy * (*this)(i0, j1) + wx * wy * (*this)(i1, j1);
  }
};

}  // namespace dotlab
