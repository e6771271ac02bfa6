#include "dotlab/hubbard.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace dotlab;
using namespace dotlab::hubbard;

namespace {

ThreeSiteModel reference_chain(double t12 = 5000.0, double t23 = 5000.0) {
  ThreeSiteModel m;
  m.t12 = t12;
  m.t23 = t23;
  m.onsite = {0.0, 500.0, 0.0};
  m.u = 1000.0;
  return m;
}

// Independent 5x5 two-site Hamiltonian in the product basis
// (up-up, up-down, down-up, down-down, S02) with equal Zeeman energies.
double product_basis_exchange(double t0_mhz, double eps_ueV) {
  const double t = units::mhz_to_ueV(t0_mhz);
  Eigen::Matrix<double, 5, 5> h = Eigen::Matrix<double, 5, 5>::Zero();
  h(4, 4) = -eps_ueV;
  h(1, 4) = h(4, 1) = t;
  h(2, 4) = h(4, 2) = -t;
  const Eigen::Matrix<double, 5, 1> e = Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>>(h).eigenvalues();
  // Triplets stay at zero; the singlet branch is the lowest level.
  return units::ueV_to_mhz(0.0 - e[0]);
}

}  // namespace

TEST(TwoSite, SymmetricPointClosedForm) {
  const double expected = std::sqrt(2.0) * 900.0;
  EXPECT_NEAR(exchange_closed_form(900.0, 0.0), expected, 1e-9 * expected);
  EXPECT_NEAR(two_site_spectrum({900.0, 0.0, 0.0, 0.0}).exchange(), expected, 1e-9 * expected);
  EXPECT_NEAR(expected, 1272.79, 0.005);
}

TEST(TwoSite, FarDetunedAsymptote) {
  const double eps = units::mhz_to_ueV(-100000.0);
  const double j = exchange_closed_form(900.0, eps);
  const double asymptote = 2.0 * 900.0 * 900.0 / 100000.0;
  EXPECT_NEAR(asymptote, 16.2, 1e-12);
  EXPECT_LT(std::abs(j - asymptote) / asymptote, 1e-3);
  EXPECT_NEAR(two_site_spectrum({900.0, eps, 0.0, 0.0}).exchange(), j, 1e-9 * j);
}

TEST(TwoSite, ClosedFormMatchesDirectDiagonalization) {
  for (double t0 : {6.5, 900.0, 3000.0})
    for (double eps_mhz : {-20000.0, -3000.0, -500.0, 0.0, 400.0, 2500.0}) {
      const double eps = units::mhz_to_ueV(eps_mhz);
      const double direct = product_basis_exchange(t0, eps);
      const double closed = exchange_closed_form(t0, eps);
      const double scale = std::abs(eps_mhz) + t0;
      EXPECT_NEAR(closed, direct, 1e-12 * scale) << t0 << " " << eps_mhz;
      EXPECT_NEAR(two_site_spectrum({t0, eps, 0.0, 0.0}).exchange(), direct, 1e-12 * scale) << t0 << " " << eps_mhz;
    }
}

TEST(TwoSite, DecoupledLimit) {
  const auto s = two_site_spectrum({0.0, -37.0, 0.0, 0.0});
  EXPECT_NEAR(s.block_values[0], 0.0, 1e-12);
  EXPECT_NEAR(s.block_values[1], 0.0, 1e-12);
  EXPECT_NEAR(s.block_values[2], 37.0, 1e-12);
  EXPECT_EQ(s.exchange(), 0.0);
}

TEST(TwoSite, ZeemanLevels) {
  const auto s = two_site_spectrum({900.0, 0.0, 160.0, 170.0});
  EXPECT_DOUBLE_EQ(s.t_plus, 165.0);
  EXPECT_DOUBLE_EQ(s.t_minus, -165.0);
}

TEST(ExchangeVsDetuning, PositiveIncreasingAndAsymptotic) {
  std::vector<double> grid;
  for (int k = -60; k <= 20; ++k) grid.push_back(100.0 * k);
  const auto rows = exchange_vs_detuning(900.0, grid);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_GT(rows[i].j, 0.0);
    if (i > 0) EXPECT_GT(rows[i].j, rows[i - 1].j);
  }
  const double eps = -1e7;
  const double j = exchange_vs_detuning(900.0, {eps})[0].j;
  EXPECT_NEAR(j * std::abs(units::ueV_to_mhz(eps)) / (2.0 * 900.0 * 900.0), 1.0, 1e-6);
  EXPECT_THROW(exchange_vs_detuning(0.0, grid), ConfigError);
}

TEST(EffectiveT, RoundTrip) {
  for (double t0 : {6.5, 900.0})
    for (double eps_mhz : {-50000.0, -1000.0, 0.0, 300.0}) {
      const double eps = units::mhz_to_ueV(eps_mhz);
      EXPECT_NEAR(effective_t_from_J(exchange_closed_form(t0, eps), eps), t0, 1e-6 * t0) << t0 << " " << eps_mhz;
    }
  EXPECT_NEAR(effective_t_from_J(std::sqrt(2.0) * 6.5, 0.0), 6.5, 1e-12);
}

TEST(EffectiveT, InconsistentInput) {
  EXPECT_THROW(effective_t_from_J(1.0, units::mhz_to_ueV(100.0)), InconsistentInput);
  EXPECT_THROW(effective_t_from_J(-1.0, 0.0), InconsistentInput);
}

TEST(ThreeSite, DecoupledSpinsAreDegenerate) {
  const auto spec = three_site_ed(reference_chain(0.0, 0.0));
  for (int i = 1; i < 8; ++i) EXPECT_EQ(spec.levels[i].energy, spec.levels[0].energy);
  const auto fit = heisenberg_fit(spec);
  EXPECT_EQ(fit.j12, 0.0);
  EXPECT_EQ(fit.j23, 0.0);
  EXPECT_EQ(fit.j13, 0.0);
}

TEST(ThreeSite, NoPathToThirdSite) {
  const auto fit = heisenberg_fit(three_site_ed(reference_chain(5000.0, 0.0)));
  EXPECT_GT(fit.j12, 0.0);
  EXPECT_EQ(fit.j23, 0.0);
  EXPECT_EQ(fit.j13, 0.0);
}

TEST(ThreeSite, QuartetAndDoublets) {
  const auto spec = three_site_ed(reference_chain());
  std::vector<double> e;
  for (int i = 0; i < 8; ++i) e.push_back(spec.levels[i].energy);
  // Antiferromagnetic chain: two doublets below a four-fold quartet.
  const double scale = std::abs(e[7]);
  for (int i = 5; i < 8; ++i) EXPECT_NEAR(e[i], e[4], 1e-9 * scale);
  EXPECT_NEAR(e[1], e[0], 1e-9 * scale);
  EXPECT_NEAR(e[3], e[2], 1e-9 * scale);
  EXPECT_GT(e[2] - e[1], 1e-6);
  EXPECT_GT(e[4] - e[3], 1e-6);
  EXPECT_EQ(spec.levels.size(), 20u);
  for (int i = 0; i < 8; ++i) EXPECT_GT(spec.levels[i].charge_weight, 0.9);
}

TEST(ThreeSite, MirrorSymmetry) {
  ThreeSiteModel a;
  a.t12 = 5000.0;
  a.t23 = 3000.0;
  a.onsite = {40.0, 500.0, -30.0};
  ThreeSiteModel b = a;
  std::swap(b.t12, b.t23);
  b.onsite = {-30.0, 500.0, 40.0};
  const auto sa = three_site_ed(a), sb = three_site_ed(b);
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(sa.levels[i].energy, sb.levels[i].energy, 1e-9);
  const auto fa = heisenberg_fit(sa), fb = heisenberg_fit(sb);
  EXPECT_NEAR(fa.j12, fb.j23, 1e-6 * fa.j12);
  EXPECT_NEAR(fa.j23, fb.j12, 1e-6 * fa.j23);
  EXPECT_NEAR(fa.j13, fb.j13, 1e-6 * std::abs(fa.j13));
}

TEST(ThreeSite, ChargeSectorLeak) {
  ThreeSiteModel m = reference_chain();
  m.onsite = {0.0, -3000.0, 0.0};
  EXPECT_THROW(three_site_ed(m), ChargeSectorLeak);
}

TEST(Heisenberg, RecoversSyntheticCouplings) {
  const auto b = FockBasis::three_electrons();
  const double j12 = units::mhz_to_ueV(700.0), j23 = units::mhz_to_ueV(310.0), j13 = units::mhz_to_ueV(-2.5);
  const Eigen::MatrixXd h = 12.0 * Eigen::MatrixXd::Identity(8, 8) + j12 * spin_exchange_operator(b, 0, 1) +
                            j23 * spin_exchange_operator(b, 1, 2) + j13 * spin_exchange_operator(b, 0, 2);
  const auto fit = fit_heisenberg_matrix(h, b);
  EXPECT_NEAR(fit.j12, 700.0, 1e-8 * 700.0);
  EXPECT_NEAR(fit.j23, 310.0, 1e-8 * 310.0);
  EXPECT_NEAR(fit.j13, -2.5, 1e-8 * 2.5);
  EXPECT_NEAR(fit.constant, 12.0, 1e-9);
  EXPECT_LT(fit.residual, 1e-6);
}

TEST(Heisenberg, PoorFitDetected) {
  const auto b = FockBasis::three_electrons();
  Eigen::MatrixXd h = units::mhz_to_ueV(100.0) * spin_exchange_operator(b, 0, 1);
  h(0, 0) += 1.0;  // not of Heisenberg form
  EXPECT_THROW(fit_heisenberg_matrix(h, b), PoorFit);
}

TEST(Superexchange, ReferenceGolden) {
  // Exact diagonalization values frozen at the first verified run.
  const auto ed = heisenberg_fit(three_site_ed(reference_chain()));
  EXPECT_NEAR(ed.j12, 548.932797317, 1e-8 * 548.9);
  EXPECT_NEAR(ed.j23, 548.932797317, 1e-8 * 548.9);
  EXPECT_NEAR(ed.j13, 0.800887393655, 1e-7 * 0.8);
  EXPECT_LT(ed.j13 / ed.j12, 0.1);
}

TEST(Superexchange, SecondOrderHasNoRemoteCoupling) {
  const auto pt2 = superexchange_perturbative(reference_chain(), 2);
  EXPECT_EQ(pt2.couplings.j13, 0.0);
  EXPECT_GT(pt2.couplings.j12, 0.0);
}

TEST(Superexchange, FourthOrderMatchesExactDiagonalization) {
  const auto ed = heisenberg_fit(three_site_ed(reference_chain()));
  const auto pt4 = superexchange_perturbative(reference_chain(), 4);
  EXPECT_LT(std::abs(pt4.couplings.j13 - ed.j13) / ed.j13, 0.10);
  EXPECT_LT(std::abs(pt4.couplings.j12 - ed.j12) / ed.j12, 0.10);
}

TEST(Superexchange, HigherOrderIsCloserOnInRegimeInstances) {
  for (double t12 : {2000.0, 5000.0})
    for (double t23 : {3000.0, 5000.0})
      for (double e2 : {300.0, 500.0}) {
        ThreeSiteModel m = reference_chain(t12, t23);
        m.onsite[1] = e2;
        const auto ed = heisenberg_fit(three_site_ed(m));
        const auto p2 = superexchange_perturbative(m, 2).couplings;
        const auto p4 = superexchange_perturbative(m, 4).couplings;
        EXPECT_LT(std::abs(p4.j13 - ed.j13), std::abs(p2.j13 - ed.j13)) << t12 << " " << t23 << " " << e2;
        EXPECT_LT(std::abs(p4.j12 - ed.j12), std::abs(p2.j12 - ed.j12)) << t12 << " " << t23 << " " << e2;
      }
}

TEST(Superexchange, QuartersWhenHoppingHalves) {
  const auto full = reference_chain(5000.0, 5000.0), half = reference_chain(2500.0, 5000.0);
  const double ed_ratio = heisenberg_fit(three_site_ed(half)).j13 / heisenberg_fit(three_site_ed(full)).j13;
  const double pt_ratio =
      superexchange_perturbative(half, 4).couplings.j13 / superexchange_perturbative(full, 4).couplings.j13;
  EXPECT_NEAR(ed_ratio, 0.25, 0.05 * 0.25);
  EXPECT_NEAR(pt_ratio, 0.25, 0.05 * 0.25);
}

TEST(Superexchange, RegimeViolation) {
  EXPECT_THROW(superexchange_perturbative(reference_chain(20000.0, 20000.0), 4), RegimeViolation);
  EXPECT_THROW(superexchange_perturbative(reference_chain(), 0), ConfigError);
}

TEST(Superexchange, RemoteToDirectRatioOfExperimentalOrder) {
  // Within a decade of the 6.5 MHz / 900 MHz scale.
  const auto ed = heisenberg_fit(three_site_ed(reference_chain()));
  const double ratio = ed.j13 / ed.j12, target = 6.5 / 900.0;
  EXPECT_GT(ratio, 0.1 * target);
  EXPECT_LT(ratio, 10.0 * target);
}
