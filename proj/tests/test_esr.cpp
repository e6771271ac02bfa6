#include "dotlab/esr.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace dotlab;
using namespace dotlab::esr;

namespace {

// Product basis |uu>, |ud>, |du>, |dd>, |S(0,2)> with the Zeeman terms kept
// exactly; returns sorted eigenvalues in ueV.
Eigen::VectorXd product_basis_levels(double t0_mhz, double eps_ueV, double ez1, double ez2) {
  const double t = units::mhz_to_ueV(t0_mhz);
  Eigen::Matrix<double, 5, 5> h = Eigen::Matrix<double, 5, 5>::Zero();
  h(0, 0) = 0.5 * (ez1 + ez2);
  h(1, 1) = 0.5 * (ez1 - ez2);
  h(2, 2) = -0.5 * (ez1 - ez2);
  h(3, 3) = -0.5 * (ez1 + ez2);
  h(4, 4) = -eps_ueV;
  // <S02|H|S11> = sqrt(2) t with S11 = (|ud> - |du>) / sqrt(2).
  h(1, 4) = h(4, 1) = t;
  h(2, 4) = h(4, 2) = -t;
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>>(h).eigenvalues();
}

// Distinct line positions after merging lines closer than `resolution`.
std::vector<double> resolved_lines(std::vector<Transition> lines, double resolution) {
  std::sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return a.f < b.f; });
  std::vector<double> out;
  for (const auto& t : lines)
    if (out.empty() || t.f - out.back() > resolution) out.push_back(t.f);
  return out;
}

double funnel_shift(const FunnelParams& p, double v) {
  const auto set = all_branches(p, v);
  return pair_exchange(set.f[0], set.f[1], p.delta_ez);
}

FunnelParams fig2a() { return FunnelParams{}; }

FunnelParams fig2c() {
  FunnelParams p;
  p.t0 = 6.5;
  p.alpha = 2.0;
  p.f0 = 39070.0;
  p.delta_ez = 118.9;
  return p;
}

double rms_distance(const FunnelParams& p, const std::vector<FunnelPoint>& data) {
  double sum = 0.0;
  for (const auto& d : data) {
    const double r = d.f - branch_frequency(p, d.v_p, d.branch);
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(data.size()));
}

}  // namespace

TEST(Zeeman, DefaultLarmorFrequency) {
  const ZeemanConfig z;
  EXPECT_NEAR(z.default_f0(), 39190.0, 0.005 * 39190.0);
  EXPECT_NEAR(z.qubit_f0(3), z.default_f0(), 0.0);
  EXPECT_FALSE(z.g_factor_warning());
}

TEST(Zeeman, GFactorWarning) {
  ZeemanConfig z;
  z.f0 = {39140.0, 39180.0};
  EXPECT_FALSE(z.g_factor_warning());
  EXPECT_NEAR(z.implied_g(39140.0), 2.0, 0.01);
  z.f0.push_back(45000.0);
  EXPECT_TRUE(z.g_factor_warning());
}

TEST(Branches, ProductBasisOracleAtAnticrossing) {
  const auto p = fig2a();
  const double ez1 = units::mhz_to_ueV(p.f0), ez2 = units::mhz_to_ueV(p.f0 + p.delta_ez);
  const auto e = product_basis_levels(p.t0, 0.0, ez1, ez2);
  const auto set = all_branches(p, 0.0);
  EXPECT_NEAR(set.f[0], units::ueV_to_mhz(e[1] - e[0]), 1e-6);
  EXPECT_NEAR(set.f[1], units::ueV_to_mhz(e[4] - e[1]), 1e-6);
  // Frozen from the oracle above.
  EXPECT_NEAR(set.f[0], 37887.050668722, 1e-6);
  EXPECT_NEAR(set.f[1], 40432.949331278, 1e-6);
}

TEST(Branches, ProductBasisOracleAcrossDetuning) {
  const auto p = fig2a();
  const double ez1 = units::mhz_to_ueV(p.f0), ez2 = units::mhz_to_ueV(p.f0 + p.delta_ez);
  for (double v : {-1.0, -0.3, -0.05, 0.02, 0.2}) {
    const auto e = product_basis_levels(p.t0, p.epsilon(v), ez1, ez2);
    const auto set = all_branches(p, v);
    const double stark = p.s * v;
    // T+ and T- are exact eigenstates; the other three levels form the singlet-T0 block.
    const double t_minus = -0.5 * (ez1 + ez2), t_plus = -t_minus;
    std::vector<double> block;
    for (int k = 0; k < 5; ++k)
      if (std::abs(e[k] - t_minus) > 1e-9 && std::abs(e[k] - t_plus) > 1e-9) block.push_back(e[k]);
    ASSERT_EQ(block.size(), 3u) << "v = " << v;
    EXPECT_NEAR(set.f[0], units::ueV_to_mhz(block[0] - t_minus) + stark, 1e-6) << "v = " << v;
    EXPECT_NEAR(set.f[1], units::ueV_to_mhz(t_plus - block[0]) + stark, 1e-6) << "v = " << v;
    EXPECT_NEAR(set.f[2], units::ueV_to_mhz(block[1] - t_minus) + stark, 1e-6) << "v = " << v;
    EXPECT_NEAR(set.f[3], units::ueV_to_mhz(t_plus - block[1]) + stark, 1e-6) << "v = " << v;
  }
}

TEST(Branches, MirrorAboutCentreLine) {
  const auto p = fig2a();
  for (double v = -1.0; v <= 0.25; v += 0.01) {
    const auto set = all_branches(p, v);
    const double centre = p.f0 + 0.5 * p.delta_ez + p.s * v;
    EXPECT_NEAR(0.5 * (set.f[0] + set.f[1]), centre, 1e-6);
    EXPECT_NEAR(0.5 * (set.f[2] + set.f[3]), centre, 1e-6);
    EXPECT_LE(set.f[0], std::min(set.f[2], set.f[3]));
    EXPECT_GE(set.f[1], std::max(set.f[2], set.f[3]));
  }
}

TEST(Branches, ContinuousOnFineGrid) {
  const auto p = fig2a();
  const int n = 2001;
  auto prev = all_branches(p, -1.0);
  for (int i = 1; i < n; ++i) {
    const double v = -1.0 + 1.25 * i / (n - 1);
    const auto cur = all_branches(p, v);
    for (int k = 0; k < 4; ++k) ASSERT_LT(std::abs(cur.f[k] - prev.f[k]), 100.0) << "branch " << k << " v = " << v;
    prev = cur;
  }
}

TEST(Branches, LabelRoundTrip) {
  for (auto b : {Branch::I, Branch::II, Branch::III, Branch::IV}) EXPECT_EQ(parse_branch(label(b)), b);
  EXPECT_THROW(parse_branch("v"), ConfigError);
}

TEST(Transitions, TwoLinesWhenExchangeVanishes) {
  auto p = fig2a();
  const double v = -2000.0;  // |eps| ~ 2.4e8 MHz, J ~ 7e-3 MHz
  const double j = hubbard::exchange_closed_form(p.t0, p.epsilon(v));
  ASSERT_LT(j, 0.01);
  const auto lines = transition_frequencies(p, v);
  double total = 0.0;
  for (const auto& t : lines) total += t.weight;
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto distinct = resolved_lines(lines, 0.01);
  ASSERT_EQ(distinct.size(), 2u);
  EXPECT_NEAR(distinct[1] - distinct[0], p.delta_ez, 0.01);
  EXPECT_NEAR(distinct[0], p.f0 + p.s * v, 0.01);
}

TEST(Transitions, WeightsNormalizedAndFiltered) {
  const auto p = fig2a();
  for (double v : {-1.0, 0.0, 0.25}) {
    const auto lines = transition_frequencies(p, v);
    ASSERT_FALSE(lines.empty());
    double total = 0.0;
    for (const auto& t : lines) total += t.weight;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  // Deep in (0,2) the lower block state is the charge singlet: its branches vanish.
  const auto set = all_branches(p, 5.0);
  EXPECT_LT(set.weight[0], 1e-3);
  const auto lines = transition_frequencies(p, 5.0);
  for (const auto& t : lines) EXPECT_NE(t.branch, Branch::I);
}

TEST(Transitions, InvalidParameters) {
  auto p = fig2a();
  p.t0 = 0.0;
  EXPECT_THROW(transition_frequencies(p, 0.0), ConfigError);
}

TEST(Funnel, AsymptoticShiftMatchesExchange) {
  for (double t0 : {900.0, 6.5}) {
    for (double dez : {0.0, 40.0}) {
      FunnelParams p;
      p.t0 = t0;
      p.delta_ez = dez;
      p.alpha = units::mhz_to_ueV(1.0);  // eps in MHz equals V_P
      // The Zeeman gradient shifts the pair by about dEz / (2 |eps|) relative,
      // so far detuned also means |eps| >= 100 dEz.
      for (double k : {40.0, 100.0, 1000.0}) {
        const double v = -std::max(k * t0, 2.5 * k * dez);
        const double expected = 2.0 * t0 * t0 / std::abs(v);
        EXPECT_NEAR(funnel_shift(p, v), expected, 0.01 * expected) << "t0 " << t0 << " dEz " << dez << " k " << k;
      }
    }
  }
}

TEST(Funnel, ShiftScalesWithTunnelCouplingSquared) {
  FunnelParams a, b;
  a.t0 = 900.0;
  b.t0 = 6.5;
  a.alpha = b.alpha = units::mhz_to_ueV(1.0);
  for (double v : {-40.0 * 900.0, -1e5, -1e6}) {
    const double ratio = funnel_shift(a, v) / funnel_shift(b, v);
    EXPECT_NEAR(ratio, std::pow(900.0 / 6.5, 2), 0.01 * std::pow(900.0 / 6.5, 2)) << "v = " << v;
  }
}

TEST(Funnel, AnticrossingShiftAtZeroDetuning) {
  // J(0) = sqrt(2) t0 is much larger than dEz here, so branch (i) sits about J
  // below the bare line; the J/2 rule only holds once J << dEz.
  const auto p = fig2a();
  const double j = hubbard::exchange_closed_form(p.t0, 0.0);
  EXPECT_NEAR(j, 1272.79, 0.01);
  const double shift = p.f0 - branch_frequency(p, 0.0, Branch::I);
  EXPECT_GT(shift, 0.9 * j);
  EXPECT_LT(shift, 1.1 * j);
  const double v = -200.0;
  const double j_far = hubbard::exchange_closed_form(p.t0, p.epsilon(v));
  ASSERT_LT(j_far, 0.05 * p.delta_ez);
  EXPECT_NEAR(p.f0 + p.s * v - branch_frequency(p, v, Branch::I), 0.5 * j_far, 0.05 * j_far);
}

TEST(Funnel, VanishingTunnellingGivesStraightLines) {
  auto p = fig2a();
  p.t0 = 1e-9;
  for (double v : {-1.0, -0.1, 0.0, 0.1, 0.25}) {
    const auto set = all_branches(p, v);
    const std::array<double, 2> bare{p.f0 + p.s * v, p.f0 + p.delta_ez + p.s * v};
    double lo = std::min({set.f[0], set.f[1], set.f[2], set.f[3]});
    double hi = std::max({set.f[0], set.f[1], set.f[2], set.f[3]});
    if (v < 0.0) {
      EXPECT_NEAR(lo, bare[0], 1e-6);
      EXPECT_NEAR(hi, bare[1], 1e-6);
    }
  }
}

TEST(FunnelMap, PeaksOnLines) {
  const auto p = fig2a();
  std::vector<double> vg, fg;
  for (int i = 0; i < 11; ++i) vg.push_back(-1.0 + 0.1 * i);
  for (int i = 0; i < 801; ++i) fg.push_back(39000.0 + 0.25 * i);
  const auto map = funnel_map(p, vg, fg, 1.0);
  for (std::size_t iv = 0; iv < vg.size(); ++iv) {
    Eigen::Index best;
    map.values.col(static_cast<Eigen::Index>(iv)).maxCoeff(&best);
    const auto lines = transition_frequencies(p, vg[iv]);
    double nearest = 1e9;
    for (const auto& t : lines) nearest = std::min(nearest, std::abs(t.f - fg[static_cast<std::size_t>(best)]));
    EXPECT_LE(nearest, 0.5) << "v = " << vg[iv];  // two grid steps
  }
  EXPECT_LE(map.values.maxCoeff(), 1.0);
  EXPECT_GE(map.values.minCoeff(), 0.0);
  EXPECT_THROW(funnel_map(p, {0.0, -1.0}, fg, 1.0), ConfigError);
  EXPECT_THROW(funnel_map(p, vg, fg, 0.0), ConfigError);
}

TEST(Synth, DeterministicAndOnCurveWithoutNoise) {
  const auto p = fig2a();
  const auto a = synth_funnel(p, -1.0, 0.25, 200, 0.05, 7), b = synth_funnel(p, -1.0, 0.25, 200, 0.05, 7);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].v_p, b[i].v_p);
    EXPECT_EQ(a[i].f, b[i].f);
  }
  for (const auto& d : synth_funnel(p, -1.0, 0.25, 50, 0.0, 3))
    EXPECT_EQ(d.f, branch_frequency(p, d.v_p, d.branch));
}

TEST(Synth, NoiseLevelMatchesSigma) {
  const auto p = fig2a();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const double r = rms_distance(p, synth_funnel(p, -1.0, 0.25, 200, 0.05, seed));
    EXPECT_GE(r, 0.04) << "seed " << seed;
    EXPECT_LE(r, 0.06) << "seed " << seed;
  }
}

TEST(FitFunnel, RecoversFig2a) {
  const auto truth = fig2a();
  const auto data = synth_funnel(truth, -1.0, 0.25, 200, 0.05, 7);
  const auto fit = fit_funnel(data, guess_funnel(data, truth.delta_ez));
  EXPECT_NEAR(fit.params.t0, truth.t0, 0.02 * truth.t0);
  EXPECT_NEAR(fit.params.s, truth.s, 0.02 * truth.s);
  EXPECT_LT(fit.rms, 0.06);
}

TEST(FitFunnel, RecoversFig2c) {
  const auto truth = fig2c();
  const auto data = synth_funnel(truth, -0.5, 0.5, 200, 0.05, 7);
  const auto fit = fit_funnel(data, guess_funnel(data, truth.delta_ez));
  EXPECT_NEAR(fit.params.t0, truth.t0, 0.05 * truth.t0);
}

TEST(FitFunnel, ExactRecoveryWithoutNoise) {
  const auto truth = fig2a();
  const auto data = synth_funnel(truth, -1.0, 0.25, 200, 0.0, 7);
  const auto fit = fit_funnel(data, guess_funnel(data, truth.delta_ez));
  EXPECT_NEAR(fit.params.t0, truth.t0, 1e-6 * truth.t0);
  EXPECT_NEAR(fit.params.alpha, truth.alpha, 1e-6 * truth.alpha);
  EXPECT_NEAR(fit.params.v_ac, truth.v_ac, 1e-6);
  EXPECT_NEAR(fit.params.s, truth.s, 1e-6 * truth.s);
  EXPECT_NEAR(fit.params.f0, truth.f0, 1e-6 * truth.f0);
}

TEST(FitFunnel, StarkSlopeSeparatesFromExchange) {
  const auto truth = fig2a();
  auto data = synth_funnel(truth, -1.0, 0.25, 200, 0.0, 7);
  for (auto& d : data) d.f += 5.0 * d.v_p;
  const auto fit = fit_funnel(data, guess_funnel(data, truth.delta_ez));
  EXPECT_NEAR(fit.params.s, truth.s + 5.0, 1e-6 * truth.s);
  EXPECT_NEAR(fit.params.t0, truth.t0, 1e-6 * truth.t0);
}

TEST(FitFunnel, OneSidedDataIsDegenerate) {
  const auto truth = fig2a();
  const auto data = synth_funnel(truth, -1.0, -0.5, 100, 0.05, 7);
  EXPECT_THROW(fit_funnel(data, truth), DegenerateJacobian);
}

TEST(FitFunnel, InsufficientData) {
  const auto truth = fig2a();
  const auto data = synth_funnel(truth, -1.0, 0.25, 8, 0.05, 7, {Branch::I});
  EXPECT_THROW(fit_funnel(data, truth), InsufficientData);
}

TEST(Ramsey, RecoversDephasingTimes) {
  for (double t2 : {120.0, 70.0, 61.0, 55.0, 30.0}) {
    const double span = 3.3 * t2;
    const RamseyParams truth{0.4, 0.3, 2.0 * std::numbers::pi * 8.0 / span, t2};
    const auto fit = fit_ramsey(synth_ramsey(truth, span, 200, 0.01, 11));
    EXPECT_NEAR(fit.params.t2, t2, 0.05 * t2) << "T2* = " << t2;
    EXPECT_NEAR(fit.params.omega, truth.omega, 0.01 * truth.omega);
    EXPECT_TRUE(fit.warnings.empty()) << "T2* = " << t2;
  }
}

TEST(Ramsey, ExactRecoveryWithoutNoise) {
  const RamseyParams truth{0.35, -1.1, 0.2, 45.0};
  const auto fit = fit_ramsey(synth_ramsey(truth, 150.0, 120, 0.0, 1));
  EXPECT_NEAR(fit.params.a, truth.a, 1e-6);
  EXPECT_NEAR(fit.params.b, truth.b, 1e-6);
  EXPECT_NEAR(fit.params.omega, truth.omega, 1e-8);
  EXPECT_NEAR(fit.params.t2, truth.t2, 1e-5);
}

TEST(Ramsey, FlatTraceIsUnidentifiable) {
  const auto fit = fit_ramsey(synth_ramsey({0.0, 0.0, 0.3, 50.0}, 100.0, 100, 0.0, 1));
  EXPECT_TRUE(fit.has_warning("UnidentifiableFrequency"));
}

TEST(Ramsey, FrequencyAboveMedianNyquistIsFlagged) {
  // Pairs of closely spaced delays resolve a frequency the median gap aliases.
  const RamseyParams truth{0.4, 0.2, 2.5, 60.0};
  std::vector<double> tau;
  for (int k = 0; k < 90; ++k) {
    tau.push_back(1.0 + 2.0 * k);
    if (k % 3 == 0) tau.push_back(1.3 + 2.0 * k);
  }
  const auto fit = fit_ramsey(ramsey_signal(truth, tau));
  EXPECT_NEAR(fit.params.omega, truth.omega, 1e-6);
  EXPECT_TRUE(fit.has_warning("AliasWarning"));
}

TEST(Ramsey, AmplitudeOutOfRange) {
  const auto fit = fit_ramsey(synth_ramsey({0.7, 0.0, 0.3, 80.0}, 200.0, 150, 0.0, 1));
  EXPECT_TRUE(fit.has_warning("AmplitudeOutOfRange"));
}

TEST(Ramsey, InputValidation) {
  EXPECT_THROW(fit_ramsey(synth_ramsey({0.4, 0.0, 0.3, 50.0}, 100.0, 19, 0.0, 1)), InsufficientData);
  auto trace = synth_ramsey({0.4, 0.0, 0.3, 50.0}, 100.0, 40, 0.0, 1);
  std::swap(trace.tau[3], trace.tau[4]);
  EXPECT_THROW(fit_ramsey(trace), ConfigError);
}
