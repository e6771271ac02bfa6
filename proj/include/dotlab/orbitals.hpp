#pragma once

// Single-particle effective-mass problem on the 2DEG plane and the reduction of
// its lowest doublet to a pair of localized dot orbitals.

#include "dotlab/eigensolver.hpp"
#include "dotlab/errors.hpp"
#include "dotlab/grid.hpp"
#include "dotlab/units.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cmath>
#include <string>
#include <vector>

namespace dotlab::orbitals {

struct EffectiveMassParams {
  double m_inplane = 0.19;        // electron masses
  double valley_splitting = 0.0;  // ueV, reporting label only
};

/// Finite-difference Hamiltonian (ueV) on a Grid2D. Wavefunctions vanish
/// outside the grid.
struct DiscreteOperator {
  Grid2D grid;
  Eigen::SparseMatrix<double> matrix;
  double valley_splitting = 0.0;
};

inline DiscreteOperator assemble_sp_hamiltonian(const Field2D& pot, const EffectiveMassParams& params,
                                                double max_spacing = 1.5) {
  if (!(params.m_inplane > 0.0)) throw ConfigError("m_inplane must be positive");
  if (params.valley_splitting < 0.0) throw ConfigError("valley splitting must be non-negative");
  const Grid2D& g = pot.grid;
  if (g.dx > max_spacing || (!g.is_1d() && g.dy > max_spacing))
    throw GridTooCoarse("orbital grid spacing exceeds " + std::to_string(max_spacing) + " nm");
  if (!pot.values.allFinite()) throw ConfigError("potential contains non-finite values");
  const double c = units::kHbar2Over2Me / params.m_inplane;
  const double cx = c / (g.dx * g.dx);
  const double cy = g.is_1d() ? 0.0 : c / (g.dy * g.dy);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.size() * 5);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const auto n = static_cast<Eigen::Index>(g.index(i, j));
      trip.emplace_back(n, n, 2.0 * cx + 2.0 * cy + pot(i, j));
      if (i + 1 < g.nx) {
        const auto m = static_cast<Eigen::Index>(g.index(i + 1, j));
        trip.emplace_back(n, m, -cx);
        trip.emplace_back(m, n, -cx);
      }
      if (!g.is_1d() && j + 1 < g.ny) {
        const auto m = static_cast<Eigen::Index>(g.index(i, j + 1));
        trip.emplace_back(n, m, -cy);
        trip.emplace_back(m, n, -cy);
      }
    }
  DiscreteOperator op;
  op.grid = g;
  op.matrix.resize(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.valley_splitting = params.valley_splitting;
  return op;
}

/// Orthonormal single-particle states. Columns of `states` are normalized in
/// the discrete inner product sum(a * b) * cell_measure.
struct OrbitalBasis {
  Grid2D grid;
  Eigen::VectorXd energies;
  Eigen::MatrixXd states;
  double max_residual = 0.0;  // ueV, Euclidean-normalized eigenvectors
  double norm_estimate = 0.0;
  double valley_splitting = 0.0;

  int size() const { return static_cast<int>(energies.size()); }
  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const { return a.dot(b) * grid.cell_measure(); }
  Eigen::MatrixXd gram() const { return states.transpose() * states * grid.cell_measure(); }
};

inline OrbitalBasis lowest_states(const DiscreteOperator& h, int k, const linalg::EigenOptions& opt = {}) {
  if (k < 1 || k > 32) throw ConfigError("lowest_states supports 1..32 states");
  auto eig = linalg::lowest_eigenpairs(h.matrix, k, opt);
  if (eig.max_residual > 1e-6 * eig.norm_estimate)
    throw EigensolverFailure("eigenpair residual above 1e-6 of the operator norm");
  OrbitalBasis basis;
  basis.grid = h.grid;
  basis.energies = eig.values;
  basis.states = eig.vectors / std::sqrt(h.grid.cell_measure());
  basis.max_residual = eig.max_residual;
  basis.norm_estimate = eig.norm_estimate;
  basis.valley_splitting = h.valley_splitting;
  return basis;
}

struct LocalizedPair {
  Grid2D grid;
  Eigen::VectorXd left;
  Eigen::VectorXd right;
  double t0 = 0.0;        // MHz, hopping enters as -t0
  double eps_left = 0.0;  // ueV
  double eps_right = 0.0;
};

/// Rotates the lowest two states into the pair that diagonalizes the position
/// operator x within their span (at a symmetric configuration this is
/// (psi0 +- psi1)/sqrt(2)), then projects H onto that pair. Requires
/// E2 - E1 > guard_factor * (E1 - E0).
inline LocalizedPair localize_double_dot(const OrbitalBasis& basis, double guard_factor = 3.0) {
  if (basis.size() < 3) throw NotADoublet("need at least three states to check the doublet guard");
  const double e0 = basis.energies[0], e1 = basis.energies[1], e2 = basis.energies[2];
  if (!(e2 - e1 > guard_factor * (e1 - e0)))
    throw NotADoublet("lowest states are not an isolated tunnel-split doublet (E2-E1 <= " +
                      std::to_string(guard_factor) + " (E1-E0))");
  const Grid2D& g = basis.grid;
  const Eigen::VectorXd psi0 = basis.states.col(0), psi1 = basis.states.col(1);
  Eigen::VectorXd xs(static_cast<Eigen::Index>(g.size()));
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) xs[static_cast<Eigen::Index>(g.index(i, j))] = g.x(i);
  Eigen::Matrix2d xop;
  xop(0, 0) = basis.inner(psi0, xs.cwiseProduct(psi0));
  xop(1, 1) = basis.inner(psi1, xs.cwiseProduct(psi1));
  xop(0, 1) = xop(1, 0) = basis.inner(psi0, xs.cwiseProduct(psi1));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(xop);
  // Eigenvalues ascending: column 0 is the left orbital.
  Eigen::Matrix2d c = es.eigenvectors();
  if (xop(0, 1) == 0.0 && xop(0, 0) == xop(1, 1)) c = Eigen::Matrix2d::Identity();
  LocalizedPair pair;
  pair.grid = g;
  pair.left = c(0, 0) * psi0 + c(1, 0) * psi1;
  pair.right = c(0, 1) * psi0 + c(1, 1) * psi1;
  for (Eigen::VectorXd* v : {&pair.left, &pair.right}) {
    Eigen::Index arg = 0;
    v->cwiseAbs().maxCoeff(&arg);
    if ((*v)[arg] < 0.0) *v *= -1.0;
  }
  pair.eps_left = c(0, 0) * c(0, 0) * e0 + c(1, 0) * c(1, 0) * e1;
  pair.eps_right = c(0, 1) * c(0, 1) * e0 + c(1, 1) * c(1, 1) * e1;
  const double h_lr = c(0, 0) * c(0, 1) * e0 + c(1, 0) * c(1, 1) * e1;
  pair.t0 = units::ueV_to_mhz(std::abs(h_lr));
  return pair;
}

}  // namespace dotlab::orbitals
