#pragma once

// Two-electron configuration interaction over an orbital basis, and a
// brute-force product-grid diagonalization used to validate it.

#include "dotlab/eigensolver.hpp"
#include "dotlab/errors.hpp"
#include "dotlab/grid.hpp"
#include "dotlab/orbitals.hpp"
#include "dotlab/units.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace dotlab::fci {

/// Softened Coulomb interaction kC/eps_r * [1/sqrt(r^2 + a^2) - 1/sqrt(r^2 + (2 z_img)^2)],
/// the second term only when an image plane is configured.
struct CoulombKernel {
  double epsilon_r = 11.7;
  double softening = 1.0;  // nm
  std::optional<double> image_distance;  // nm
  double scale = 1.0;

  void validate() const {
    if (!(epsilon_r > 0.0)) throw ConfigError("epsilon_r must be positive");
    if (!(softening > 0.0)) throw ConfigError("Coulomb softening must be positive");
    if (image_distance && !(*image_distance > 0.0)) throw ConfigError("image distance must be positive");
  }

  double operator()(double r2) const {
    double v = 1.0 / std::sqrt(r2 + softening * softening);
    if (image_distance) v -= 1.0 / std::sqrt(r2 + 4.0 * *image_distance * *image_distance);
    return scale * units::kCoulombConstant / epsilon_r * v;
  }
};

/// V_ijkl = <ij|V|kl> with particle 1 in (i, k) and particle 2 in (j, l).
class CoulombTensor {
 public:
  CoulombTensor() = default;
  explicit CoulombTensor(int m) : m_(m), data_(static_cast<std::size_t>(m) * m * m * m, 0.0) {}

  int size() const { return m_; }
  double operator()(int i, int j, int k, int l) const { return data_[offset(i, j, k, l)]; }
  double& operator()(int i, int j, int k, int l) { return data_[offset(i, j, k, l)]; }

 private:
  std::size_t offset(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * m_ + j) * m_ + k) * m_ + l;
  }
  int m_ = 0;
  std::vector<double> data_;
};

namespace detail {

// Kernel values indexed by lattice displacement (|di|, |dj|).
inline Eigen::MatrixXd kernel_table(const Grid2D& g, const CoulombKernel& k) {
  Eigen::MatrixXd t(g.nx, g.ny);
  for (int dj = 0; dj < g.ny; ++dj)
    for (int di = 0; di < g.nx; ++di) {
      const double rx = di * g.dx, ry = g.is_1d() ? 0.0 : dj * g.dy;
      t(di, dj) = k(rx * rx + ry * ry);
    }
  return t;
}

// Phi = K * rho for every column of rho, assembled block by block so the
// dense interaction matrix never exists in full.
inline Eigen::MatrixXd apply_kernel(const Grid2D& g, const CoulombKernel& k, const Eigen::MatrixXd& rho) {
  const Eigen::MatrixXd table = kernel_table(g, k);
  const Eigen::Index n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd phi(n, rho.cols());
  const Eigen::Index block = 256;
  Eigen::MatrixXd kb;
  for (Eigen::Index r0 = 0; r0 < n; r0 += block) {
    const Eigen::Index rows = std::min(block, n - r0);
    kb.resize(rows, n);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int i = static_cast<int>((r0 + r) % g.nx), j = static_cast<int>((r0 + r) / g.nx);
      for (int j2 = 0; j2 < g.ny; ++j2) {
        const int dj = std::abs(j - j2);
        for (int i2 = 0; i2 < g.nx; ++i2) kb(r, i2 + static_cast<Eigen::Index>(g.nx) * j2) = table(std::abs(i - i2), dj);
      }
    }
    phi.middleRows(r0, rows).noalias() = kb * rho;
  }
  return phi;
}

}  // namespace detail

inline CoulombTensor coulomb_tensor(const orbitals::OrbitalBasis& basis, const CoulombKernel& kernel,
                                    int max_orbitals = 16) {
  kernel.validate();
  const int m = basis.size();
  if (m > max_orbitals)
    throw BasisTooLarge("Coulomb tensor limited to " + std::to_string(max_orbitals) + " orbitals (got " +
                        std::to_string(m) + ")");
  const double da = basis.grid.cell_measure();
  // Pair densities rho_p = psi_i psi_k for i <= k.
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < m; ++i)
    for (int k = i; k < m; ++k) pairs.emplace_back(i, k);
  const Eigen::Index np = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd rho(static_cast<Eigen::Index>(basis.grid.size()), np);
  for (Eigen::Index p = 0; p < np; ++p)
    rho.col(p) = basis.states.col(pairs[p].first).cwiseProduct(basis.states.col(pairs[p].second));
  const Eigen::MatrixXd phi = detail::apply_kernel(basis.grid, kernel, rho);
  Eigen::MatrixXd c = (rho.transpose() * phi) * (da * da);
  // Exact symmetry: use the upper triangle only.
  for (Eigen::Index p = 0; p < np; ++p)
    for (Eigen::Index q = 0; q < p; ++q) c(p, q) = c(q, p);
  std::vector<int> pair_index(static_cast<std::size_t>(m * m));
  for (Eigen::Index p = 0; p < np; ++p) {
    pair_index[static_cast<std::size_t>(pairs[p].first * m + pairs[p].second)] = static_cast<int>(p);
    pair_index[static_cast<std::size_t>(pairs[p].second * m + pairs[p].first)] = static_cast<int>(p);
  }
  CoulombTensor v(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l)
          v(i, j, k, l) = c(pair_index[static_cast<std::size_t>(i * m + k)], pair_index[static_cast<std::size_t>(j * m + l)]);
  return v;
}

struct Level {
  double energy = 0.0;  // ueV
  int spin = 0;         // 0 singlet, 1 triplet
};

struct FCIResult {
  std::vector<Level> levels;  // ascending
  double singlet_ground = 0.0;
  double triplet_ground = 0.0;
  double j_direct = 0.0;  // MHz
  int singlet_dimension = 0;
  int triplet_dimension = 0;
};

namespace detail {

// Symmetric (sign = +1) or antisymmetric (sign = -1) spatial two-particle
// basis over pairs of `n` one-particle states, as columns of a sparse map from
// the product space (index a + n*b).
inline Eigen::SparseMatrix<double> exchange_sector(int n, int sign) {
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::Index col = 0;
  const double r = 1.0 / std::sqrt(2.0);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a <= b; ++a) {
      if (a == b) {
        if (sign < 0) continue;
        trip.emplace_back(a + static_cast<Eigen::Index>(n) * b, col, 1.0);
      } else {
        trip.emplace_back(a + static_cast<Eigen::Index>(n) * b, col, r);
        trip.emplace_back(b + static_cast<Eigen::Index>(n) * a, col, sign * r);
      }
      ++col;
    }
  Eigen::SparseMatrix<double> p(static_cast<Eigen::Index>(n) * n, col);
  p.setFromTriplets(trip.begin(), trip.end());
  return p;
}

}  // namespace detail

/// Exact diagonalization of two electrons in the M-orbital space, split into
/// spatially symmetric (singlet) and antisymmetric (triplet) sectors.
inline FCIResult build_and_solve_ci(const orbitals::OrbitalBasis& basis, const CoulombTensor& v, int n_electrons = 2) {
  if (n_electrons != 2) throw InconsistentDimensions("configuration interaction is implemented for two electrons");
  const int m = basis.size();
  if (v.size() != m) throw InconsistentDimensions("Coulomb tensor size does not match the orbital basis");
  if (m < 2) throw InconsistentDimensions("need at least two orbitals");
  const Eigen::Index dim = static_cast<Eigen::Index>(m) * m;
  Eigen::MatrixXd h(dim, dim);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < m; ++l)
        for (int k = 0; k < m; ++k) h(i + m * j, k + m * l) = v(i, j, k, l);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) h(i + m * j, i + m * j) += basis.energies[i] + basis.energies[j];

  FCIResult res;
  for (int sign : {+1, -1}) {
    const Eigen::MatrixXd p(detail::exchange_sector(m, sign));
    Eigen::MatrixXd hs = p.transpose() * h * p;
    hs = 0.5 * (hs + hs.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hs, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw EigensolverFailure("CI sector diagonalization failed");
    const int spin = sign > 0 ? 0 : 1;
    for (Eigen::Index e = 0; e < es.eigenvalues().size(); ++e) res.levels.push_back({es.eigenvalues()[e], spin});
    (sign > 0 ? res.singlet_ground : res.triplet_ground) = es.eigenvalues()[0];
    (sign > 0 ? res.singlet_dimension : res.triplet_dimension) = static_cast<int>(hs.rows());
  }
  std::stable_sort(res.levels.begin(), res.levels.end(),
                   [](const Level& a, const Level& b) { return a.energy < b.energy; });
  res.j_direct = units::ueV_to_mhz(res.triplet_ground - res.singlet_ground);
  return res;
}

/// U0 ((x/a)^2 - 1)^2 on n points spanning [-length/2, length/2]: two minima
/// at x = +-a separated by a barrier of height U0.
inline Field2D quartic_double_well(int n, double length, double u0, double a) {
  if (n < 3 || !(length > 0.0) || !(a > 0.0)) throw ConfigError("double well needs n >= 3 and positive lengths");
  Field2D pot{Grid2D::line(n, -0.5 * length, length / (n - 1)), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    const double x = pot.grid.x(i) / a;
    pot.values[i] = u0 * (x * x - 1.0) * (x * x - 1.0);
  }
  return pot;
}

struct OracleResult {
  double singlet_ground = 0.0;  // ueV
  double triplet_ground = 0.0;
  double j_exact = 0.0;  // MHz
  int dimension = 0;     // product-grid size N^2
};

/// Two particles on the full product grid of `pot`, with the same
/// finite-difference kinetic operator as the orbital solver and the
/// interaction evaluated pointwise. Lowest state of each exchange sector.
inline OracleResult exact_two_particle_oracle(const Field2D& pot, const CoulombKernel& kernel,
                                              const orbitals::EffectiveMassParams& params = {},
                                              int max_dimension = 10000) {
  kernel.validate();
  const Grid2D& g = pot.grid;
  const Eigen::Index n = static_cast<Eigen::Index>(g.size());
  if (n * n > max_dimension)
    throw ProblemTooLarge("two-particle grid dimension " + std::to_string(n * n) + " exceeds " +
                          std::to_string(max_dimension));
  const auto h1 = orbitals::assemble_sp_hamiltonian(pot, params);
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < h1.matrix.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(h1.matrix, c); it; ++it)
      for (Eigen::Index s = 0; s < n; ++s) {
        trip.emplace_back(it.row() + n * s, it.col() + n * s, it.value());
        trip.emplace_back(s + n * it.row(), s + n * it.col(), it.value());
      }
  for (Eigen::Index b = 0; b < n; ++b)
    for (Eigen::Index a = 0; a < n; ++a) {
      const int ia = static_cast<int>(a % g.nx), ja = static_cast<int>(a / g.nx);
      const int ib = static_cast<int>(b % g.nx), jb = static_cast<int>(b / g.nx);
      const double rx = g.x(ia) - g.x(ib), ry = g.is_1d() ? 0.0 : g.y(ja) - g.y(jb);
      trip.emplace_back(a + n * b, a + n * b, kernel(rx * rx + ry * ry));
    }
  Eigen::SparseMatrix<double> h2(n * n, n * n);
  h2.setFromTriplets(trip.begin(), trip.end());

  OracleResult res;
  res.dimension = static_cast<int>(n * n);
  for (int sign : {+1, -1}) {
    const auto p = detail::exchange_sector(static_cast<int>(n), sign);
    const Eigen::MatrixXd hs = Eigen::MatrixXd(Eigen::SparseMatrix<double>(p.transpose() * h2 * p));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hs, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw EigensolverFailure("two-particle diagonalization failed");
    (sign > 0 ? res.singlet_ground : res.triplet_ground) = es.eigenvalues()[0];
  }
  res.j_exact = units::ueV_to_mhz(res.triplet_ground - res.singlet_ground);
  return res;
}

}  // namespace dotlab::fci
