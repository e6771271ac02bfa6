#include "dotlab/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dotlab;
using namespace dotlab::pipeline;

TEST(Axis, NamesRoundTrip) {
  for (auto a : {SweepAxis::TSiO2, SweepAxis::TAl2O3, SweepAxis::D}) EXPECT_EQ(parse_axis(axis_name(a)), a);
  EXPECT_THROW(parse_axis("x"), ConfigError);
}

TEST(DotRegion, DepthIsRescaled) {
  const ExchangeSetup setup;
  const auto pot = dot_region_potential(setup, setup.array);
  EXPECT_GE(pot.values.minCoeff(), -setup.dot_depth - 1e-9);
  EXPECT_LT(pot.values.minCoeff(), -0.9 * setup.dot_depth);
  // Two gates, two wells mirrored about x = 0.
  const auto& g = pot.grid;
  double worst = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) worst = std::max(worst, std::abs(pot(i, j) - pot(g.nx - 1 - i, j)));
  EXPECT_LT(worst, 1e-6 * setup.dot_depth);
}

TEST(DotRegion, NoWellIsAnError) {
  ExchangeSetup setup;
  setup.array.voltages = {0.0, 0.0};
  EXPECT_THROW(dot_region_potential(setup, setup.array), ConfigError);
}

TEST(Sweep, SinglePointMatchesDirectChain) {
  const ExchangeSetup setup;
  const auto rows = barrier_sweep_t0(setup, SweepAxis::D, {18.0});
  ASSERT_EQ(rows.size(), 1u);
  ASSERT_TRUE(rows[0].ok()) << rows[0].message;
  const auto pot = dot_region_potential(setup, with_parameter(setup.array, SweepAxis::D, 18.0));
  const auto basis = orbitals::lowest_states(orbitals::assemble_sp_hamiltonian(pot, setup.mass), 4);
  const auto pair = orbitals::localize_double_dot(basis, setup.doublet_guard);
  EXPECT_DOUBLE_EQ(rows[0].t0_mhz, pair.t0);
  EXPECT_DOUBLE_EQ(rows[0].eps_left, pair.eps_left);
  EXPECT_DOUBLE_EQ(rows[0].eps_right, pair.eps_right);
  EXPECT_TRUE(std::isnan(rows[0].j_mhz));
}

TEST(Sweep, InvalidPointBecomesErrorRow) {
  const ExchangeSetup setup;
  // A gap wider than the pitch makes the gates overlap.
  const auto rows = barrier_sweep_t0(setup, SweepAxis::D, {40.0, 20.0, -1.0});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_FALSE(rows[0].ok());
  EXPECT_FALSE(rows[0].message.empty());
  EXPECT_TRUE(rows[1].ok()) << rows[1].message;
  EXPECT_FALSE(rows[2].ok());
  EXPECT_EQ(rows[2].param, -1.0);
}

TEST(Sweep, TunnellingFallsWithGap) {
  const ExchangeSetup setup;
  const auto rows = barrier_sweep_t0(setup, SweepAxis::D, {10.0, 16.0, 22.0});
  for (const auto& r : rows) ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_GT(rows[0].t0_mhz, rows[1].t0_mhz);
  EXPECT_GT(rows[1].t0_mhz, rows[2].t0_mhz);
  // Symmetric gates keep the dots degenerate.
  for (const auto& r : rows) EXPECT_NEAR(r.eps_left, r.eps_right, 1e-6 * setup.dot_depth);
}

TEST(Sweep, ThreadCountDoesNotChangeRows) {
  const ExchangeSetup setup;
  const std::vector<double> values{12.0, 18.0, 24.0};
  const auto a = barrier_sweep_t0(setup, SweepAxis::D, values, 1);
  const auto b = barrier_sweep_t0(setup, SweepAxis::D, values, 3);
  for (std::size_t i = 0; i < values.size(); ++i) {
    EXPECT_EQ(a[i].param, values[i]);
    EXPECT_EQ(a[i].t0_mhz, b[i].t0_mhz);
    EXPECT_EQ(a[i].eps_left, b[i].eps_left);
  }
}

TEST(Sweep, ExchangeFallsWithGap) {
  const ExchangeSetup setup;
  const auto rows = sweep_exchange(setup, SweepAxis::D, {12.0, 20.0});
  for (const auto& r : rows) ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_GT(rows[0].j_mhz, rows[1].j_mhz);
  EXPECT_GT(rows[1].j_mhz, 0.0);
  for (const auto& r : rows) EXPECT_GT(r.u_ueV, 0.0);
}

TEST(LogLinear, ExactExponential) {
  std::vector<double> x, y;
  for (int i = 0; i < 8; ++i) x.push_back(10.0 + 2.0 * i), y.push_back(3.0 * std::exp(-0.15 * x.back()));
  const auto fit = log_linear_fit(x, y);
  EXPECT_NEAR(fit.slope, -0.15, 1e-12);
  EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-10);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
}

TEST(LogLinear, SkipsNonPositiveAndNeedsTwoPoints) {
  const auto fit = log_linear_fit({1.0, 2.0, 3.0, 4.0}, {std::exp(1.0), -1.0, std::nan(""), std::exp(4.0)});
  EXPECT_NEAR(fit.slope, 1.0, 1e-12);
  EXPECT_THROW(log_linear_fit({1.0, 2.0}, {1.0, 0.0}), InsufficientData);
}
