#pragma once

// Effective Hubbard models: the two-site (1,1)-(0,2) anticrossing and a
// three-site chain with three electrons, solved exactly and by
// degenerate perturbation theory.

#include "dotlab/errors.hpp"
#include "dotlab/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dotlab::hubbard {

// ---------------------------------------------------------------- two sites

/// Detuning eps (ueV) is zero at the S(1,1)-S(0,2) degeneracy and negative
/// deep in (1,1).
struct TwoSiteModel {
  double t0 = 0.0;       // MHz
  double epsilon = 0.0;  // ueV
  double ez1 = 0.0;      // ueV
  double ez2 = 0.0;      // ueV

  double delta_ez() const { return ez1 - ez2; }
};

/// The five levels of the two-site model. The {S(1,1), T0(1,1), S(0,2)} block
/// is returned in the basis order (S11, T0, S02), eigenvalues ascending.
struct TwoSiteSpectrum {
  double t_plus = 0.0;
  double t_minus = 0.0;
  Eigen::Vector3d block_values;
  Eigen::Matrix3d block_vectors;

  /// Block eigenstate with the largest T0(1,1) weight.
  int t0_index() const {
    Eigen::Index i = 0;
    block_vectors.row(1).cwiseAbs().maxCoeff(&i);
    return static_cast<int>(i);
  }
  double t0_level() const { return block_values[t0_index()]; }
  double s_lower() const { return block_values[0]; }
  double s_upper() const { return block_values[2]; }
  /// E_T0 - E_S_lower in MHz.
  double exchange() const { return units::ueV_to_mhz(t0_level() - s_lower()); }
};

inline Eigen::Matrix3d two_site_block(const TwoSiteModel& m) {
  const double t = units::mhz_to_ueV(m.t0);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  h(0, 2) = h(2, 0) = std::sqrt(2.0) * t;
  h(0, 1) = h(1, 0) = 0.5 * m.delta_ez();
  h(2, 2) = -m.epsilon;
  return h;
}

inline TwoSiteSpectrum two_site_spectrum(const TwoSiteModel& m) {
  TwoSiteSpectrum s;
  s.t_plus = 0.5 * (m.ez1 + m.ez2);
  s.t_minus = -0.5 * (m.ez1 + m.ez2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(two_site_block(m));
  s.block_values = es.eigenvalues();
  s.block_vectors = es.eigenvectors();
  return s;
}

/// Closed-form J(eps) at equal Zeeman energies, MHz. Written as
/// 4 t^2 / (sqrt(eps^2 + 8 t^2) - eps) so that it stays accurate for eps << 0.
inline double exchange_closed_form(double t0_mhz, double epsilon_ueV) {
  const double e = units::ueV_to_mhz(epsilon_ueV);
  const double root = std::sqrt(e * e + 8.0 * t0_mhz * t0_mhz);
  if (e <= 0.0) return 4.0 * t0_mhz * t0_mhz / (root - e);
  return 0.5 * (e + root);
}

struct ExchangePoint {
  double epsilon = 0.0;  // ueV
  double j = 0.0;        // MHz
};

inline std::vector<ExchangePoint> exchange_vs_detuning(double t0_mhz, const std::vector<double>& eps_grid) {
  if (!(t0_mhz > 0.0)) throw ConfigError("t0 must be positive");
  std::vector<ExchangePoint> out;
  out.reserve(eps_grid.size());
  for (double e : eps_grid) out.push_back({e, two_site_spectrum({t0_mhz, e, 0.0, 0.0}).exchange()});
  return out;
}

/// Tunnel coupling (MHz) that reproduces an observed exchange at detuning eps.
inline double effective_t_from_J(double j_obs_mhz, double epsilon_ueV) {
  if (!(j_obs_mhz > 0.0)) throw InconsistentInput("observed exchange must be positive");
  const double e = units::ueV_to_mhz(epsilon_ueV);
  const double radicand = 0.5 * j_obs_mhz * (j_obs_mhz - e);
  if (!(radicand > 0.0))
    throw InconsistentInput("observed exchange is below the minimum forced by the detuning (J <= eps/h)");
  return std::sqrt(radicand);
}

// -------------------------------------------------------------- three sites

/// Three electrons on a linear chain of three sites, no 1-3 hopping.
struct ThreeSiteModel {
  double t12 = 0.0;  // MHz
  double t23 = 0.0;  // MHz
  std::array<double, 3> onsite{0.0, 0.0, 0.0};  // ueV
  double u = 1000.0;                            // ueV

  void validate() const {
    if (!(t12 >= 0.0) || !(t23 >= 0.0)) throw ConfigError("hoppings must be non-negative");
    if (!(u > 0.0)) throw ConfigError("U must be positive");
  }
};

/// Fock states are 6-bit occupation masks, mode = 2 * site + spin (spin 0 up).
struct FockBasis {
  std::vector<unsigned> states;

  static FockBasis three_electrons() {
    FockBasis b;
    for (unsigned s = 0; s < 64; ++s)
      if (std::popcount(s) == 3) b.states.push_back(s);
    return b;
  }
  int index_of(unsigned s) const {
    const auto it = std::lower_bound(states.begin(), states.end(), s);
    return (it != states.end() && *it == s) ? static_cast<int>(it - states.begin()) : -1;
  }
  static int occupation(unsigned s, int site) { return static_cast<int>((s >> (2 * site)) & 1u) + static_cast<int>((s >> (2 * site + 1)) & 1u); }
  static bool singly_occupied(unsigned s) {
    return occupation(s, 0) == 1 && occupation(s, 1) == 1 && occupation(s, 2) == 1;
  }
  /// Twice the Sz of a state.
  static int two_sz(unsigned s) {
    const int up = std::popcount(s & 0b010101u);
    return 2 * up - std::popcount(s);
  }
};

namespace detail {

// Apply c_dag(to) c(from) to |s>; returns the sign, zero if the result vanishes.
inline int hop(unsigned s, int from, int to, unsigned& out) {
  if (!((s >> from) & 1u)) return 0;
  unsigned r = s & ~(1u << from);
  int sign = (std::popcount(r & ((1u << from) - 1u)) % 2) ? -1 : 1;
  if ((r >> to) & 1u) return 0;
  sign *= (std::popcount(r & ((1u << to) - 1u)) % 2) ? -1 : 1;
  out = r | (1u << to);
  return sign;
}

}  // namespace detail

/// Diagonal (on-site energies plus U) and hopping parts in the Fock basis.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> three_site_parts(const ThreeSiteModel& m, const FockBasis& b) {
  const Eigen::Index n = static_cast<Eigen::Index>(b.states.size());
  Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(n, n), v = Eigen::MatrixXd::Zero(n, n);
  const std::array<double, 2> t{units::mhz_to_ueV(m.t12), units::mhz_to_ueV(m.t23)};
  for (Eigen::Index a = 0; a < n; ++a) {
    const unsigned s = b.states[static_cast<std::size_t>(a)];
    for (int site = 0; site < 3; ++site) {
      const int occ = FockBasis::occupation(s, site);
      h0(a, a) += occ * m.onsite[static_cast<std::size_t>(site)] + (occ == 2 ? m.u : 0.0);
    }
    for (int bond = 0; bond < 2; ++bond)
      for (int spin = 0; spin < 2; ++spin)
        for (int dir = 0; dir < 2; ++dir) {
          const int from = 2 * (bond + dir) + spin, to = 2 * (bond + 1 - dir) + spin;
          unsigned out = 0;
          const int sign = detail::hop(s, from, to, out);
          if (sign == 0) continue;
          v(b.index_of(out), a) += -t[static_cast<std::size_t>(bond)] * sign;
        }
  }
  return {h0, v};
}

struct ThreeSiteLevel {
  double energy = 0.0;         // ueV
  int two_sz = 0;              // 2 Sz
  double charge_weight = 0.0;  // weight in the (1,1,1) sector
};

struct ThreeSiteSpectrum {
  FockBasis basis;
  std::vector<ThreeSiteLevel> levels;  // ascending
  Eigen::MatrixXd vectors;             // columns match levels
};

/// Exact eigenstates of all 20 three-electron states, diagonalized per Sz
/// sector. The eight lowest states must carry more than `guard` weight in
/// (1,1,1).
inline ThreeSiteSpectrum three_site_ed(const ThreeSiteModel& m, double guard = 0.9) {
  m.validate();
  ThreeSiteSpectrum out;
  out.basis = FockBasis::three_electrons();
  const auto [h0, v] = three_site_parts(m, out.basis);
  const Eigen::MatrixXd h = h0 + v;
  const Eigen::Index n = h.rows();
  std::vector<std::pair<ThreeSiteLevel, Eigen::VectorXd>> found;
  for (int sz : {-3, -1, 1, 3}) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index a = 0; a < n; ++a)
      if (FockBasis::two_sz(out.basis.states[static_cast<std::size_t>(a)]) == sz) idx.push_back(a);
    const Eigen::Index k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd hs(k, k);
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index c = 0; c < k; ++c) hs(r, c) = h(idx[r], idx[c]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hs);
    for (Eigen::Index e = 0; e < k; ++e) {
      Eigen::VectorXd vec = Eigen::VectorXd::Zero(n);
      double w = 0.0;
      for (Eigen::Index r = 0; r < k; ++r) {
        vec[idx[r]] = es.eigenvectors()(r, e);
        if (FockBasis::singly_occupied(out.basis.states[static_cast<std::size_t>(idx[r])]))
          w += vec[idx[r]] * vec[idx[r]];
      }
      found.push_back({{es.eigenvalues()[e], sz, w}, vec});
    }
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const auto& a, const auto& b) { return a.first.energy < b.first.energy; });
  out.vectors.resize(n, n);
  for (std::size_t i = 0; i < found.size(); ++i) {
    out.levels.push_back(found[i].first);
    out.vectors.col(static_cast<Eigen::Index>(i)) = found[i].second;
  }
  for (int i = 0; i < 8; ++i)
    if (!(out.levels[static_cast<std::size_t>(i)].charge_weight > guard))
      throw ChargeSectorLeak("state " + std::to_string(i) + " has only " +
                             std::to_string(out.levels[static_cast<std::size_t>(i)].charge_weight) +
                             " weight in the (1,1,1) sector");
  return out;
}

// -------------------------------------------------------- spin Hamiltonian

/// Indices of the (1,1,1) states within the Fock basis, ordered by mask.
inline std::vector<int> spin_manifold(const FockBasis& b) {
  std::vector<int> idx;
  for (std::size_t a = 0; a < b.states.size(); ++a)
    if (FockBasis::singly_occupied(b.states[a])) idx.push_back(static_cast<int>(a));
  return idx;
}

/// Spin of site `site` in a singly-occupied mask: +1 up, -1 down.
inline int site_spin(unsigned s, int site) { return ((s >> (2 * site)) & 1u) ? 1 : -1; }

/// S_i . S_j on the (1,1,1) manifold, in the Fock sign convention.
inline Eigen::MatrixXd spin_exchange_operator(const FockBasis& b, int i, int j) {
  const auto idx = spin_manifold(b);
  const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const unsigned s = b.states[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
    const int si = site_spin(s, i), sj = site_spin(s, j);
    op(a, a) = 0.25 * si * sj;
    if (si == sj) continue;
    // S_i^+ S_j^- + h.c. as products of fermion operators on the two sites.
    unsigned mid = 0, out = 0;
    const int up_from = si > 0 ? j : i;  // site whose spin goes up
    const int dn_from = si > 0 ? i : j;
    const int s1 = detail::hop(s, 2 * up_from + 1, 2 * up_from, mid);
    const int s2 = detail::hop(mid, 2 * dn_from, 2 * dn_from + 1, out);
    for (Eigen::Index c = 0; c < n; ++c)
      if (b.states[static_cast<std::size_t>(idx[static_cast<std::size_t>(c)])] == out) op(c, a) += 0.5 * s1 * s2;
  }
  return op;
}

struct HeisenbergFit {
  double j12 = 0.0;  // MHz
  double j23 = 0.0;
  double j13 = 0.0;
  double constant = 0.0;  // ueV
  double residual = 0.0;  // MHz, spectral norm of the unexplained part
};

/// Couplings of a spin Hamiltonian given as a matrix on the (1,1,1)
/// manifold (ueV). Each J is read from the spin-flip matrix elements of its
/// pair, which equal J/2 for a Heisenberg form; the constant comes from the
/// trace.
inline HeisenbergFit fit_heisenberg_matrix(const Eigen::MatrixXd& h_eff, const FockBasis& b, bool check = true) {
  const std::array<std::pair<int, int>, 3> pairs{{{0, 1}, {1, 2}, {0, 2}}};
  std::array<double, 3> j{};
  std::array<Eigen::MatrixXd, 3> ops;
  for (std::size_t p = 0; p < 3; ++p) {
    ops[p] = spin_exchange_operator(b, pairs[p].first, pairs[p].second);
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index r = 0; r < ops[p].rows(); ++r)
      for (Eigen::Index c = 0; c < ops[p].cols(); ++c)
        if (r != c && ops[p](r, c) != 0.0) sum += h_eff(r, c) / ops[p](r, c), ++count;
    j[p] = sum / count;
  }
  HeisenbergFit fit;
  fit.constant = h_eff.trace() / static_cast<double>(h_eff.rows());
  Eigen::MatrixXd model = fit.constant * Eigen::MatrixXd::Identity(h_eff.rows(), h_eff.cols());
  for (std::size_t p = 0; p < 3; ++p) model += j[p] * ops[p];
  const Eigen::MatrixXd rest = h_eff - model;
  fit.residual = units::ueV_to_mhz(
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (rest + rest.transpose()), Eigen::EigenvaluesOnly)
          .eigenvalues()
          .cwiseAbs()
          .maxCoeff());
  fit.j12 = units::ueV_to_mhz(j[0]);
  fit.j23 = units::ueV_to_mhz(j[1]);
  fit.j13 = units::ueV_to_mhz(j[2]);
  const double jmax = std::max({std::abs(fit.j12), std::abs(fit.j23), std::abs(fit.j13)});
  if (check && fit.residual > 0.01 * jmax && fit.residual > 1e-9)
    throw PoorFit("Heisenberg residual " + std::to_string(fit.residual) + " MHz exceeds 1% of the largest coupling");
  return fit;
}

/// Effective spin Hamiltonian of the eight lowest exact states: their
/// (1,1,1) components, symmetrically orthonormalized (des Cloizeaux), carry
/// the exact energies.
inline Eigen::MatrixXd effective_spin_hamiltonian(const ThreeSiteSpectrum& spec) {
  const auto idx = spin_manifold(spec.basis);
  const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd a(n, 8);
  for (Eigen::Index r = 0; r < n; ++r) a.row(r) = spec.vectors.row(idx[static_cast<std::size_t>(r)]).head(8);
  Eigen::VectorXd e(8);
  for (int i = 0; i < 8; ++i) e[i] = spec.levels[static_cast<std::size_t>(i)].energy;
  const Eigen::MatrixXd overlap = a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(overlap);
  const Eigen::MatrixXd inv_sqrt = es.operatorInverseSqrt();
  Eigen::MatrixXd h = inv_sqrt * a * e.asDiagonal() * a.transpose() * inv_sqrt;
  return 0.5 * (h + h.transpose());
}

inline HeisenbergFit heisenberg_fit(const ThreeSiteSpectrum& spec, bool check = true) {
  for (int i = 0; i < 8; ++i)
    if (!(spec.levels[static_cast<std::size_t>(i)].charge_weight > 0.9))
      throw ChargeSectorLeak("low-energy states are not (1,1,1) dominated");
  return fit_heisenberg_matrix(effective_spin_hamiltonian(spec), spec.basis, check);
}

// ------------------------------------------------- perturbation expansion

struct PerturbativeResult {
  HeisenbergFit couplings;
  Eigen::MatrixXd h_eff;  // on the (1,1,1) manifold, ueV
  int order = 0;
};

namespace detail {

// Truncated power series of matrices: terms[n] is the order-n coefficient.
using Series = std::vector<Eigen::MatrixXd>;

inline Series series_mul(const Series& a, const Series& b, int order) {
  Series c(static_cast<std::size_t>(order + 1), Eigen::MatrixXd::Zero(a[0].rows(), b[0].cols()));
  for (int i = 0; i <= order; ++i)
    for (int k = 0; k + i <= order; ++k) c[static_cast<std::size_t>(i + k)] += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(k)];
  return c;
}

// (I + x)^power for a series x without a zeroth-order term.
inline Series series_binomial_power(const Series& x, double power, int order) {
  const Eigen::Index n = x[0].rows();
  Series result(static_cast<std::size_t>(order + 1), Eigen::MatrixXd::Zero(n, n));
  Series term(static_cast<std::size_t>(order + 1), Eigen::MatrixXd::Zero(n, n));
  term[0] = Eigen::MatrixXd::Identity(n, n);
  double coef = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) {
      term = series_mul(term, x, order);
      coef *= (power - (k - 1)) / k;
    }
    for (int o = 0; o <= order; ++o) result[static_cast<std::size_t>(o)] += coef * term[static_cast<std::size_t>(o)];
  }
  return result;
}

}  // namespace detail

/// Effective spin Hamiltonian of the (1,1,1) manifold to the given order in
/// the hoppings, built numerically from the Hubbard matrices: Bloch wave
/// operator recursion followed by des Cloizeaux hermitization.
inline PerturbativeResult superexchange_perturbative(const ThreeSiteModel& m, int order = 4, double max_ratio = 0.1) {
  m.validate();
  if (order < 1 || order > 12) throw ConfigError("perturbation order must be in 1..12");
  const FockBasis b = FockBasis::three_electrons();
  const auto [h0, v] = three_site_parts(m, b);
  const auto idx = spin_manifold(b);
  const Eigen::Index n = h0.rows(), np = static_cast<Eigen::Index>(idx.size());
  std::vector<char> in_p(static_cast<std::size_t>(n), 0);
  for (int i : idx) in_p[static_cast<std::size_t>(i)] = 1;
  const double e0 = m.onsite[0] + m.onsite[1] + m.onsite[2];

  // Regime guard on the energy denominators of the virtual states.
  double gap_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index q = 0; q < n; ++q)
    if (!in_p[static_cast<std::size_t>(q)]) gap_min = std::min(gap_min, std::abs(h0(q, q) - e0));
  const double t_max = units::mhz_to_ueV(std::max(m.t12, m.t23));
  if (t_max > max_ratio * gap_min || t_max > max_ratio * m.u)
    throw RegimeViolation("hopping exceeds " + std::to_string(max_ratio) +
                          " of the smallest virtual-state gap or of U (t=" + std::to_string(t_max) +
                          " ueV, gap=" + std::to_string(gap_min) + " ueV)");

  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n), r = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    if (in_p[static_cast<std::size_t>(a)])
      p(a, a) = 1.0;
    else
      r(a, a) = 1.0 / (e0 - h0(a, a));
  }
  // Omega^(k) maps the P space into Q for k >= 1.
  std::vector<Eigen::MatrixXd> omega{p};
  for (int k = 1; k < order; ++k) {
    Eigen::MatrixXd rhs = v * omega[static_cast<std::size_t>(k - 1)];
    for (int j = 1; j < k; ++j) rhs -= omega[static_cast<std::size_t>(j)] * v * omega[static_cast<std::size_t>(k - 1 - j)];
    omega.push_back(r * rhs);
  }
  // Bloch Hamiltonian P V Omega, order by order, restricted to P.
  const auto restrict = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y(np, np);
    for (Eigen::Index i = 0; i < np; ++i)
      for (Eigen::Index j = 0; j < np; ++j) y(i, j) = x(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    return y;
  };
  detail::Series hb(static_cast<std::size_t>(order + 1), Eigen::MatrixXd::Zero(np, np));
  hb[0] = e0 * Eigen::MatrixXd::Identity(np, np);
  for (int k = 1; k <= order; ++k) hb[static_cast<std::size_t>(k)] = restrict(p * v * omega[static_cast<std::size_t>(k - 1)]);
  // Metric S = Omega^T Omega = I + X on P.
  detail::Series omega_p;  // full-space series
  for (int k = 0; k <= order; ++k)
    omega_p.push_back(k < static_cast<int>(omega.size()) ? omega[static_cast<std::size_t>(k)] : Eigen::MatrixXd::Zero(n, n));
  detail::Series omega_t;
  for (const auto& o : omega_p) omega_t.push_back(o.transpose());
  const auto metric = detail::series_mul(omega_t, omega_p, order);
  detail::Series x;
  for (const auto& s : metric) x.push_back(restrict(s));
  x[0].setZero();
  const auto s_half = detail::series_binomial_power(x, 0.5, order);
  const auto s_minus_half = detail::series_binomial_power(x, -0.5, order);
  const auto herm = detail::series_mul(detail::series_mul(s_half, hb, order), s_minus_half, order);
  Eigen::MatrixXd h_eff = Eigen::MatrixXd::Zero(np, np);
  for (const auto& term : herm) h_eff += term;
  h_eff = 0.5 * (h_eff + h_eff.transpose()).eval();

  PerturbativeResult out;
  out.h_eff = h_eff;
  out.order = order;
  out.couplings = fit_heisenberg_matrix(h_eff, b, false);
  return out;
}

}  // namespace dotlab::hubbard
