#pragma once

// ESR spin-funnel spectra of an exchange-coupled pair and the fits used to
// extract tunnel coupling, Stark slope and Ramsey dephasing times.

#include "dotlab/errors.hpp"
#include "dotlab/hubbard.hpp"
#include "dotlab/levmar.hpp"
#include "dotlab/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace dotlab::esr {

// ------------------------------------------------------------------ Zeeman

struct ZeemanConfig {
  double b_dc = 1.4;  // T
  double g = 2.0;
  std::vector<double> f0;     // MHz per qubit; empty means g * mu_B * B / h
  std::vector<double> stark;  // MHz/V per qubit

  double default_f0() const { return units::larmor_mhz(g, b_dc); }
  double qubit_f0(std::size_t q) const { return q < f0.size() ? f0[q] : default_f0(); }
  /// g-factor implied by a resonance frequency at this field.
  double implied_g(double f0_mhz) const { return units::mhz_to_ueV(f0_mhz) / (units::kBohrMagneton * b_dc); }
  /// True when some configured f0 implies a g-factor more than 5% away from 2.
  bool g_factor_warning() const {
    for (double f : f0)
      if (std::abs(implied_g(f) - 2.0) > 0.1) return true;
    return false;
  }
};

// ------------------------------------------------------------------ funnels

/// Detuning eps = alpha (V_P - V_ac). The two spins have Zeeman energies
/// h f0 and h (f0 + delta_ez).
struct FunnelParams {
  double t0 = 900.0;       // MHz
  double alpha = 500.0;    // ueV/V
  double v_ac = 0.0;       // V
  double s = 19.0;         // MHz/V
  double f0 = 39140.0;     // MHz
  double delta_ez = 40.0;  // MHz

  void validate() const {
    if (!(t0 > 0.0)) throw ConfigError("funnel t0 must be positive");
    if (alpha == 0.0 || !std::isfinite(alpha)) throw ConfigError("funnel lever arm must be non-zero");
    if (!std::isfinite(v_ac) || !std::isfinite(s) || !std::isfinite(f0) || !std::isfinite(delta_ez))
      throw ConfigError("funnel parameters must be finite");
  }
  double epsilon(double v_p) const { return alpha * (v_p - v_ac); }
};

/// Block eigenstates a < b < c of {S(1,1), T0, S(0,2)}. Branches:
///   i   T- -> a  (bends down as exchange grows)
///   ii  a  -> T+ (bends up; mirror of i)
///   iii T- -> b
///   iv  b  -> T+
enum class Branch { I = 0, II = 1, III = 2, IV = 3 };

inline const char* label(Branch b) {
  static constexpr std::array<const char*, 4> names{"i", "ii", "iii", "iv"};
  return names[static_cast<std::size_t>(b)];
}

inline Branch parse_branch(const std::string& s) {
  for (int k = 0; k < 4; ++k)
    if (s == label(static_cast<Branch>(k))) return static_cast<Branch>(k);
  throw ConfigError("unknown branch label '" + s + "'");
}

struct BranchSet {
  std::array<double, 4> f{};       // MHz, Stark term included
  std::array<double, 4> weight{};  // |<f|S1x+S2x|i>|^2 relative to a bare spin flip
};

inline BranchSet all_branches(const FunnelParams& p, double v_p) {
  const double ez1 = units::mhz_to_ueV(p.f0);
  const double ez2 = units::mhz_to_ueV(p.f0 + p.delta_ez);
  const auto spec = hubbard::two_site_spectrum({std::abs(p.t0), p.epsilon(v_p), ez1, ez2});
  const double stark = p.s * v_p;
  BranchSet out;
  const double a = spec.block_values[0], b = spec.block_values[1];
  out.f[0] = units::ueV_to_mhz(a - spec.t_minus) + stark;
  out.f[1] = units::ueV_to_mhz(spec.t_plus - a) + stark;
  out.f[2] = units::ueV_to_mhz(b - spec.t_minus) + stark;
  out.f[3] = units::ueV_to_mhz(spec.t_plus - b) + stark;
  // Only the T0(1,1) component couples to T+ or T- under S1x + S2x, with
  // amplitude 1/sqrt(2); a bare single-spin flip has |amplitude|^2 = 1/4.
  const double wa = 2.0 * spec.block_vectors(1, 0) * spec.block_vectors(1, 0);
  const double wb = 2.0 * spec.block_vectors(1, 1) * spec.block_vectors(1, 1);
  out.weight = {wa, wa, wb, wb};
  return out;
}

inline double branch_frequency(const FunnelParams& p, double v_p, Branch b) {
  return all_branches(p, v_p).f[static_cast<std::size_t>(b)];
}

/// Exchange implied by the (i)/(ii) pair splitting D = f_ii - f_i in an
/// S-T0 doublet with Zeeman difference delta_ez: D = J + sqrt(J^2 + delta_ez^2).
inline double pair_exchange(double f_i, double f_ii, double delta_ez) {
  const double d = f_ii - f_i;
  return (d * d - delta_ez * delta_ez) / (2.0 * d);
}

struct Transition {
  double f = 0.0;  // MHz
  Branch branch = Branch::I;
  double weight = 0.0;  // normalized over the column
};

/// Single-spin-flip lines at one pulse voltage with relative weight above
/// `min_weight`; the surviving weights are normalized to sum to one.
inline std::vector<Transition> transition_frequencies(const FunnelParams& p, double v_p, double min_weight = 1e-3) {
  p.validate();
  const auto set = all_branches(p, v_p);
  std::vector<Transition> out;
  double total = 0.0;
  for (int k = 0; k < 4; ++k)
    if (set.weight[static_cast<std::size_t>(k)] > min_weight) {
      out.push_back({set.f[static_cast<std::size_t>(k)], static_cast<Branch>(k), set.weight[static_cast<std::size_t>(k)]});
      total += set.weight[static_cast<std::size_t>(k)];
    }
  for (auto& t : out) t.weight /= total;
  return out;
}

/// Lorentzian-broadened lines; values(i_f, i_v), clamped to [0, 1].
struct FunnelMap {
  std::vector<double> v;
  std::vector<double> f;
  Eigen::MatrixXd values;
};

inline void require_ascending(const std::vector<double>& g, const char* what) {
  if (g.size() < 2) throw ConfigError(std::string(what) + " needs at least two points");
  for (std::size_t i = 1; i < g.size(); ++i)
    if (!(g[i] > g[i - 1])) throw ConfigError(std::string(what) + " must be strictly ascending");
}

inline FunnelMap funnel_map(const FunnelParams& p, const std::vector<double>& v_grid, const std::vector<double>& f_grid,
                            double linewidth) {
  require_ascending(v_grid, "V_P grid");
  require_ascending(f_grid, "frequency grid");
  if (!(linewidth > 0.0)) throw ConfigError("linewidth must be positive");
  FunnelMap map{v_grid, f_grid, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(f_grid.size()), static_cast<Eigen::Index>(v_grid.size()))};
  const double half = 0.5 * linewidth;
  for (std::size_t iv = 0; iv < v_grid.size(); ++iv) {
    const auto lines = transition_frequencies(p, v_grid[iv]);
    double wmax = 0.0;
    for (const auto& t : lines) wmax = std::max(wmax, t.weight);
    for (std::size_t jf = 0; jf < f_grid.size(); ++jf) {
      double sum = 0.0;
      for (const auto& t : lines) {
        const double x = (f_grid[jf] - t.f) / half;
        sum += (t.weight / wmax) / (1.0 + x * x);
      }
      map.values(static_cast<Eigen::Index>(jf), static_cast<Eigen::Index>(iv)) = std::clamp(sum, 0.0, 1.0);
    }
  }
  return map;
}

struct FunnelPoint {
  double v_p = 0.0;  // V
  double f = 0.0;    // MHz
  Branch branch = Branch::I;
};

/// n_points samples split evenly over `branches`, on a uniform V_P grid over
/// [v_min, v_max], with Gaussian frequency noise sigma_f (MHz).
inline std::vector<FunnelPoint> synth_funnel(const FunnelParams& p, double v_min, double v_max, int n_points,
                                             double sigma_f, std::uint64_t seed,
                                             const std::vector<Branch>& branches = {Branch::I, Branch::II}) {
  p.validate();
  if (!(sigma_f >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  if (branches.empty() || n_points < static_cast<int>(branches.size()))
    throw ConfigError("need at least one point per branch");
  if (!(v_max > v_min)) throw ConfigError("V_P range is empty");
  const int per = n_points / static_cast<int>(branches.size());
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<FunnelPoint> out;
  for (Branch b : branches)
    for (int i = 0; i < per; ++i) {
      const double v = per > 1 ? v_min + (v_max - v_min) * i / (per - 1) : v_min;
      const double f = branch_frequency(p, v, b);
      out.push_back({v, f + sigma_f * noise(gen), b});
    }
  return out;
}

inline constexpr std::array<const char*, 5> kFunnelParamNames{"t0", "alpha", "v_ac", "s", "f0"};

struct FunnelFit {
  FunnelParams params;
  std::array<double, 5> std_error{};  // same order as kFunnelParamNames
  Eigen::MatrixXd covariance;
  double rms = 0.0;  // MHz
  double condition = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::string status;
};

namespace detail {

inline Eigen::Matrix<double, 5, 1> pack(const FunnelParams& p) {
  Eigen::Matrix<double, 5, 1> x;
  x << p.t0, p.alpha, p.v_ac, p.s, p.f0;
  return x;
}

inline FunnelParams unpack(const Eigen::VectorXd& x, double delta_ez) {
  return {std::abs(x[0]), x[1], x[2], x[3], x[4], delta_ez};
}

}  // namespace detail

/// Data-driven starting point from paired (i)/(ii) points at equal V_P. The
/// pair mean is exactly f0 + delta_ez/2 + s V_P; the pair splitting fixes the
/// lowest block level a, whose secular equation is
///   (eps + a)(delta^2 - a^2) + 2 t^2 a = 0,  delta = delta_ez h / 2.
inline FunnelParams guess_funnel(const std::vector<FunnelPoint>& data, double delta_ez) {
  std::vector<std::array<double, 3>> pairs;  // v, f_i, f_ii
  for (const auto& a : data) {
    if (a.branch != Branch::I) continue;
    for (const auto& b : data)
      if (b.branch == Branch::II && std::abs(b.v_p - a.v_p) <= 1e-12 * std::max(1.0, std::abs(a.v_p))) {
        pairs.push_back({a.v_p, a.f, b.f});
        break;
      }
  }
  if (pairs.size() < 5) throw InsufficientData("initial guess needs at least five paired (i)/(ii) points");
  const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a1(n, 2);
  Eigen::VectorXd y1(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    a1(r, 0) = 1.0;
    a1(r, 1) = pairs[static_cast<std::size_t>(r)][0];
    y1[r] = 0.5 * (pairs[static_cast<std::size_t>(r)][1] + pairs[static_cast<std::size_t>(r)][2]);
  }
  const Eigen::Vector2d line = a1.colPivHouseholderQr().solve(y1);
  FunnelParams g;
  g.delta_ez = delta_ez;
  g.s = line[1];
  g.f0 = line[0] - 0.5 * delta_ez;

  // For a trial t the secular equation gives eps at each row with a clear
  // exchange shift; a straight line through those eps fixes alpha and V_ac.
  // The trial whose model best reproduces the pair splittings wins.
  const double delta = 0.5 * std::abs(delta_ez);
  std::vector<double> excess(pairs.size());
  double max_excess = 0.0;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    excess[r] = 0.5 * (pairs[r][2] - pairs[r][1]) - delta;  // -a - delta
    max_excess = std::max(max_excess, excess[r]);
  }
  if (!(max_excess > 0.0)) throw DegenerateJacobian("pair splittings show no exchange shift");
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < pairs.size(); ++r)
    if (excess[r] > 0.05 * max_excess) rows.push_back(r);
  if (rows.size() < 3) throw InsufficientData("fewer than three points show an exchange shift");

  double best_cost = std::numeric_limits<double>::infinity();
  const double t_lo = 1e-3 * std::max(max_excess, 1e-6), t_hi = 1e3 * (max_excess + delta);
  const int steps = 240;
  for (int k = 0; k <= steps; ++k) {
    const double t = t_lo * std::pow(t_hi / t_lo, static_cast<double>(k) / steps);
    Eigen::MatrixXd a2(static_cast<Eigen::Index>(rows.size()), 2);
    Eigen::VectorXd y2(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double a = -(excess[rows[r]] + delta);
      const double q = a * a - delta * delta;
      // Rows weighted by 1 / |d eps / d a| so equal noise in a counts equally.
      const double w = 1.0 / (1.0 + 2.0 * t * t * (a * a + delta * delta) / (q * q));
      a2(static_cast<Eigen::Index>(r), 0) = w * pairs[rows[r]][0];
      a2(static_cast<Eigen::Index>(r), 1) = -w;
      y2[static_cast<Eigen::Index>(r)] = w * (-a + 2.0 * t * t * a / q);
    }
    const Eigen::Vector2d sol = a2.colPivHouseholderQr().solve(y2);
    if (!(sol[0] != 0.0) || !std::isfinite(sol[0]) || !std::isfinite(sol[1])) continue;
    FunnelParams trial = g;
    trial.t0 = t;
    trial.alpha = units::mhz_to_ueV(sol[0]);
    trial.v_ac = sol[1] / sol[0];
    double cost = 0.0;
    for (const auto& p : pairs) {
      const auto set = all_branches(trial, p[0]);
      const double d = (set.f[1] - set.f[0]) - (p[2] - p[1]);
      cost += d * d;
    }
    if (cost < best_cost) best_cost = cost, g = trial;
  }
  if (!std::isfinite(best_cost)) throw DegenerateJacobian("no trial tunnel coupling reproduces the pair splittings");
  return g;
}

/// Nonlinear least squares over {t0, alpha, V_ac, s, f0}; delta_ez is held
/// at its initial value.
inline FunnelFit fit_funnel(const std::vector<FunnelPoint>& data, const FunnelParams& init,
                            const fit::LeastSquaresOptions& options = {}) {
  init.validate();
  if (data.size() < 10) throw InsufficientData("funnel fit needs at least 10 points");
  int below = 0, above = 0;
  for (const auto& d : data) (d.v_p < init.v_ac ? below : above) += 1;
  if (below == 0 || above == 0)
    throw DegenerateJacobian("all points lie on one side of the anticrossing; t0 and alpha are not separable");
  const Eigen::Index m = static_cast<Eigen::Index>(data.size());
  const fit::ResidualFn residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    const FunnelParams p = detail::unpack(x, init.delta_ez);
    r.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& d = data[static_cast<std::size_t>(i)];
      r[i] = branch_frequency(p, d.v_p, d.branch) - d.f;
    }
  };
  fit::LeastSquaresOptions opt = options;
  if (opt.typical.empty()) {
    double vspan = 0.0;
    for (const auto& d : data) vspan = std::max(vspan, std::abs(d.v_p));
    opt.typical = {1.0, 1.0, std::max(vspan, 1e-3) * 1e-3, 1.0, 1.0};
  }
  const auto res = fit::least_squares(residual, detail::pack(init), m, opt);
  if (!(res.condition < 1e10))
    throw DegenerateJacobian("funnel Jacobian is rank deficient (condition " + std::to_string(res.condition) + ")");
  FunnelFit out;
  out.params = detail::unpack(res.x, init.delta_ez);
  for (int k = 0; k < 5; ++k) out.std_error[static_cast<std::size_t>(k)] = res.std_error[k];
  out.covariance = res.covariance;
  out.rms = std::sqrt(res.cost / static_cast<double>(m));
  out.condition = res.condition;
  out.iterations = res.iterations;
  out.evaluations = res.evaluations;
  out.status = res.status;
  return out;
}

// ------------------------------------------------------------------ Ramsey

/// P_up(tau) = 0.5 + a exp(-tau/T2*) sin(omega tau + b).
struct RamseyParams {
  double a = 0.4;
  double b = 0.0;      // rad
  double omega = 0.5;  // rad/us
  double t2 = 100.0;   // us

  double operator()(double tau) const { return 0.5 + a * std::exp(-tau / t2) * std::sin(omega * tau + b); }
};

struct RamseyTrace {
  std::vector<double> tau;  // us
  std::vector<double> p_up;
};

inline RamseyTrace ramsey_signal(const RamseyParams& p, const std::vector<double>& tau) {
  RamseyTrace tr{tau, {}};
  tr.p_up.reserve(tau.size());
  for (double t : tau) tr.p_up.push_back(p(t));
  return tr;
}

/// Uniform delays on (0, span] with Gaussian noise of standard deviation sigma.
inline RamseyTrace synth_ramsey(const RamseyParams& p, double span, int n, double sigma, std::uint64_t seed) {
  if (n < 2 || !(span > 0.0)) throw ConfigError("Ramsey synthesis needs n >= 2 and a positive span");
  std::vector<double> tau(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) tau[static_cast<std::size_t>(i)] = span * (i + 1) / n;
  auto tr = ramsey_signal(p, tau);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (auto& v : tr.p_up) v += sigma * noise(gen);
  return tr;
}

struct RamseyFit {
  RamseyParams params;
  RamseyParams std_error;
  double rms = 0.0;
  int iterations = 0;
  std::string status;
  std::vector<std::string> warnings;  // AliasWarning, UnidentifiableFrequency, AmplitudeOutOfRange
  bool has_warning(const std::string& w) const { return std::find(warnings.begin(), warnings.end(), w) != warnings.end(); }
};

namespace detail {

// Best (A, B) for y = exp(-tau/T)(A sin(w tau) + B cos(w tau)) and its residual.
inline std::pair<Eigen::Vector2d, double> linear_ramsey(const std::vector<double>& tau, const Eigen::VectorXd& y,
                                                        double w, double t2) {
  const Eigen::Index n = y.size();
  Eigen::MatrixXd a(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double env = std::exp(-tau[static_cast<std::size_t>(i)] / t2);
    a(i, 0) = env * std::sin(w * tau[static_cast<std::size_t>(i)]);
    a(i, 1) = env * std::cos(w * tau[static_cast<std::size_t>(i)]);
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(y);
  return {c, (a * c - y).squaredNorm()};
}

}  // namespace detail

inline RamseyFit fit_ramsey(const RamseyTrace& trace, const fit::LeastSquaresOptions& options = {}) {
  const std::size_t n = trace.tau.size();
  if (n != trace.p_up.size()) throw ConfigError("Ramsey trace columns differ in length");
  if (n < 20) throw InsufficientData("Ramsey fit needs at least 20 points");
  for (std::size_t i = 0; i < n; ++i)
    if (!(trace.tau[i] > 0.0) || (i > 0 && !(trace.tau[i] > trace.tau[i - 1])))
      throw ConfigError("Ramsey delays must be positive and strictly ascending");
  const double span = trace.tau.back() - trace.tau.front();
  std::vector<double> gaps;
  for (std::size_t i = 1; i < n; ++i) gaps.push_back(trace.tau[i] - trace.tau[i - 1]);
  const double search_limit = std::numbers::pi / *std::min_element(gaps.begin(), gaps.end());
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
  const double nyquist = std::numbers::pi / gaps[gaps.size() / 2];
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = trace.p_up[i] - 0.5;

  RamseyFit out;
  if (y.cwiseAbs().maxCoeff() == 0.0) {
    out.params = {0.0, 0.0, 0.0, span};
    out.status = "flat trace";
    out.warnings.push_back("UnidentifiableFrequency");
    return out;
  }
  // Periodogram peak, four-fold oversampled up to the Nyquist frequency of
  // the finest delay gap. Fits above the median-gap Nyquist are flagged.
  const double dw = 2.0 * std::numbers::pi / (4.0 * span);
  double best_w = dw, best_power = -1.0, total_power = 0.0;
  int count = 0;
  for (double w = dw; w <= search_limit; w += dw) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += y[static_cast<Eigen::Index>(i)] * std::polar(1.0, -w * trace.tau[i]);
    const double power = std::norm(acc);
    total_power += power;
    ++count;
    if (power > best_power) best_power = power, best_w = w;
  }
  // Starting envelope: the candidate with the smallest linear residual.
  double best_t2 = span, best_res = std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_c = Eigen::Vector2d::Zero();
  for (double frac : {0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0}) {
    const auto [c, r] = detail::linear_ramsey(trace.tau, y, best_w, frac * span);
    if (r < best_res) best_res = r, best_t2 = frac * span, best_c = c;
  }
  Eigen::VectorXd x0(4);
  x0 << std::hypot(best_c[0], best_c[1]), std::atan2(best_c[1], best_c[0]), best_w, best_t2;

  const fit::ResidualFn residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    const RamseyParams p{x[0], x[1], x[2], x[3]};
    r.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) r[static_cast<Eigen::Index>(i)] = p(trace.tau[i]) - trace.p_up[i];
  };
  fit::LeastSquaresOptions opt = options;
  if (opt.typical.empty()) opt.typical = {0.1, 1.0, best_w, span};
  const auto res = fit::least_squares(residual, x0, static_cast<Eigen::Index>(n), opt);
  RamseyParams p{res.x[0], res.x[1], res.x[2], res.x[3]};
  // Canonical form: a >= 0, b in (-pi, pi].
  if (p.a < 0.0) p.a = -p.a, p.b += std::numbers::pi;
  p.b = std::remainder(p.b, 2.0 * std::numbers::pi);
  out.params = p;
  out.std_error = {res.std_error[0], res.std_error[1], res.std_error[2], res.std_error[3]};
  out.rms = std::sqrt(res.cost / static_cast<double>(n));
  out.iterations = res.iterations;
  out.status = res.status;
  if (!(p.t2 > 0.0)) throw NoConvergence("Ramsey fit produced a non-positive T2*", res.iterations, out.rms);
  if (std::abs(p.omega) > nyquist) out.warnings.push_back("AliasWarning");
  const double mean_power = count > 0 ? total_power / count : 0.0;
  if (!(p.a > 3.0 * res.std_error[0]) || best_power < 5.0 * mean_power)
    out.warnings.push_back("UnidentifiableFrequency");
  if (p.a > 0.5) out.warnings.push_back("AmplitudeOutOfRange");
  return out;
}

}  // namespace dotlab::esr
