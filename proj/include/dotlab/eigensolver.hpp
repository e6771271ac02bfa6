#pragma once

// Lowest eigenpairs of a sparse symmetric matrix: block Krylov iteration on the
// shifted inverse (H - sigma)^-1 with Rayleigh-Ritz extraction on H itself.
// Everything is deterministic: the start block comes from a fixed-seed
// generator and all reductions run in a fixed order.
//
// Output convention: eigenvalues ascending; within an exactly degenerate
// cluster the basis is rotated so that, taking rows by decreasing norm, each
// successive vector is the only one with weight on its pivot row; every vector
// is then signed so that its largest-magnitude component (lowest index on
// ties) is positive.

#include "dotlab/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace dotlab::linalg {

struct EigenOptions {
  double tolerance = 1e-10;  // residual norm relative to the matrix norm estimate
  int max_basis = 240;
  int max_restarts = 60;
  int dense_threshold = 1500;  // use a dense solver at or below this size
  std::uint64_t seed = 0x5eed5eedULL;
};

struct EigenResult {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // columns, unit Euclidean norm
  double max_residual = 0.0;
  double norm_estimate = 0.0;
  int iterations = 0;
};

/// Gershgorin bounds [lo, hi] of a symmetric sparse matrix.
inline std::pair<double, double> gershgorin(const Eigen::SparseMatrix<double>& h) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(h.rows()), off = Eigen::VectorXd::Zero(h.rows());
  for (int c = 0; c < h.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(h, c); it; ++it) {
      if (it.row() == it.col())
        diag[it.row()] += it.value();
      else
        off[it.row()] += std::abs(it.value());
    }
  return {(diag - off).minCoeff(), (diag + off).maxCoeff()};
}

namespace detail {

inline void canonicalize_signs(Eigen::MatrixXd& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      if (std::abs(v(r, c)) > best * (1.0 + 1e-12)) best = std::abs(v(r, c)), arg = r;
    if (v(arg, c) < 0.0) v.col(c) *= -1.0;
  }
}

// Deterministic basis for each degenerate cluster (see header comment).
inline void canonicalize_clusters(const Eigen::VectorXd& values, Eigen::MatrixXd& v, double tol) {
  Eigen::Index start = 0;
  while (start < values.size()) {
    Eigen::Index end = start + 1;
    while (end < values.size() && values[end] - values[end - 1] <= tol) ++end;
    for (Eigen::Index p = start; p + 1 < end; ++p) {
      auto block = v.middleCols(p, end - p);
      Eigen::Index pivot = 0;
      block.rowwise().squaredNorm().maxCoeff(&pivot);
      Eigen::VectorXd u = block.row(pivot).transpose();
      u.normalize();
      // Orthonormal coefficient basis whose first column is u.
      Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(u.size(), u.size());
      basis.col(0) = u;
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
      Eigen::MatrixXd q = qr.householderQ();
      if (q.col(0).dot(u) < 0.0) q *= -1.0;
      Eigen::MatrixXd rotated = block * q;
      block = rotated;
      block.rightCols(block.cols() - 1).row(pivot).setZero();
    }
    start = end;
  }
}

inline Eigen::MatrixXd start_block(Eigen::Index n, Eigen::Index b, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Eigen::MatrixXd x(n, b);
  for (Eigen::Index c = 0; c < b; ++c)
    for (Eigen::Index r = 0; r < n; ++r) x(r, c) = static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5;
  return x;
}

// Orthogonalize block w against the first m columns of v (two passes of
// classical Gram-Schmidt) and then within itself.
inline void orthonormalize_against(const Eigen::MatrixXd& v, Eigen::Index m, Eigen::MatrixXd& w,
                                   std::uint64_t& seed) {
  for (int pass = 0; pass < 2; ++pass)
    if (m > 0) w -= v.leftCols(m) * (v.leftCols(m).transpose() * w);
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      for (int pass = 0; pass < 2; ++pass) {
        if (m > 0) w.col(c) -= v.leftCols(m) * (v.leftCols(m).transpose() * w.col(c));
        if (c > 0) w.col(c) -= w.leftCols(c) * (w.leftCols(c).transpose() * w.col(c));
      }
      const double nrm = w.col(c).norm();
      if (nrm > 1e-10) {
        w.col(c) /= nrm;
        break;
      }
      w.col(c) = start_block(w.rows(), 1, ++seed);
    }
  }
}

}  // namespace detail

/// k lowest eigenpairs of the symmetric matrix h.
inline EigenResult lowest_eigenpairs(const Eigen::SparseMatrix<double>& h, int k, const EigenOptions& opt = {}) {
  const Eigen::Index n = h.rows();
  if (k < 1 || k > n) throw EigensolverFailure("requested eigenpair count out of range");
  const auto [lo, hi] = gershgorin(h);
  EigenResult res;
  res.norm_estimate = std::max(std::abs(lo), std::abs(hi));
  const double scale = std::max(res.norm_estimate, 1e-300);

  if (n <= opt.dense_threshold) {
    const Eigen::MatrixXd dense(h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    if (es.info() != Eigen::Success) throw EigensolverFailure("dense eigensolver failed");
    res.values = es.eigenvalues().head(k);
    res.vectors = es.eigenvectors().leftCols(k);
  } else {
    const double sigma = lo - 1e-6 * scale;
    Eigen::SparseMatrix<double> shifted = h;
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
    if (ldlt.info() != Eigen::Success) throw EigensolverFailure("factorization of shifted operator failed");

    const Eigen::Index b = std::clamp<Eigen::Index>(k, 2, 8);
    const Eigen::Index keep = std::min<Eigen::Index>(k + b, n);
    const Eigen::Index max_basis = std::min<Eigen::Index>(std::max<Eigen::Index>(opt.max_basis, keep + 2 * b), n);
    Eigen::MatrixXd v(n, max_basis), hv(n, max_basis);
    std::uint64_t seed = opt.seed;
    Eigen::MatrixXd w = detail::start_block(n, b, seed);
    Eigen::Index m = 0;
    bool converged = false;
    for (int restart = 0; restart <= opt.max_restarts && !converged; ++restart) {
      while (m + w.cols() <= max_basis) {
        detail::orthonormalize_against(v, m, w, seed);
        v.middleCols(m, w.cols()) = w;
        hv.middleCols(m, w.cols()) = h * w;
        m += w.cols();
        ++res.iterations;
        if (m >= keep) {
          Eigen::MatrixXd g = v.leftCols(m).transpose() * hv.leftCols(m);
          g = 0.5 * (g + g.transpose()).eval();
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
          const Eigen::MatrixXd y = es.eigenvectors().leftCols(k);
          const Eigen::MatrixXd x = v.leftCols(m) * y;
          const Eigen::MatrixXd r = hv.leftCols(m) * y - x * es.eigenvalues().head(k).asDiagonal();
          const double worst = r.colwise().norm().maxCoeff();
          if (worst <= opt.tolerance * scale) {
            res.values = es.eigenvalues().head(k);
            res.vectors = x;
            converged = true;
            break;
          }
        }
        Eigen::MatrixXd next = ldlt.solve(v.middleCols(m - w.cols(), w.cols()));
        w = next;
        if (m + w.cols() > max_basis) break;
      }
      if (converged) break;
      // Thick restart on the leading Ritz vectors.
      Eigen::MatrixXd g = v.leftCols(m).transpose() * hv.leftCols(m);
      g = 0.5 * (g + g.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
      const Eigen::MatrixXd y = es.eigenvectors().leftCols(keep);
      Eigen::MatrixXd nv = v.leftCols(m) * y;
      Eigen::MatrixXd nhv = hv.leftCols(m) * y;
      v.leftCols(keep) = nv;
      hv.leftCols(keep) = nhv;
      m = keep;
      w = ldlt.solve(v.middleCols(keep - b, b));
    }
    if (!converged) throw EigensolverFailure("block Krylov iteration did not converge");
  }

  detail::canonicalize_clusters(res.values, res.vectors, opt.tolerance * scale);
  detail::canonicalize_signs(res.vectors);
  const Eigen::MatrixXd r = h * res.vectors - res.vectors * res.values.asDiagonal();
  res.max_residual = r.colwise().norm().maxCoeff();
  return res;
}

}  // namespace dotlab::linalg
