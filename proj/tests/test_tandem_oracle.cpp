#include <numeric>

#include <gtest/gtest.h>

#include "dacl/tandem_oracle.hpp"

using namespace dacl;

TEST(TandemStep, SlotMap) {
  EXPECT_EQ(tandem_step({0}, 1), (TandemState{1}));
  EXPECT_EQ(tandem_step({1}, 0), (TandemState{0}));
  EXPECT_EQ(tandem_step({1}, 1), (TandemState{1}));
  // Both links serve downhill; the source arrival lands after service.
  EXPECT_EQ(tandem_step({1, 2}, 1), (TandemState{1, 2}));
  // Uphill grant from a lower node to an empty neighbour is never made.
  EXPECT_EQ(tandem_step({0, 0}, 0), (TandemState{0, 0}));
}

TEST(TandemChain, StateCounts) {
  EXPECT_EQ(enumerate_chain(2, 0.5).size(), 6u);
  EXPECT_EQ(enumerate_chain(3, 0.5).size(), 15u);
  const auto c = enumerate_chain(2, 0.3);
  EXPECT_EQ(c.states[0], (TandemState{0, 0}));
  for (const auto& row : c.rows) {
    double sum = 0.0;
    for (const auto& t : row) sum += t.probability;
    EXPECT_NEAR(sum, 1.0, 1e-15);
  }
}

TEST(TandemChain, InputChecks) {
  EXPECT_THROW(enumerate_chain(0, 0.5), std::invalid_argument);
  EXPECT_THROW(enumerate_chain(2, 1.0), std::invalid_argument);
  EXPECT_THROW(enumerate_chain(2, 0.0), std::invalid_argument);
  EXPECT_THROW(enumerate_chain(6, 0.5, 10), std::runtime_error);
}

TEST(TandemChain, StationaryLaw) {
  for (int n = 1; n <= 4; ++n) {
    auto c = enumerate_chain(n, 0.6);
    ASSERT_EQ(closed_classes(c).size(), 1u);
    solve_stationary(c);
    EXPECT_NEAR(std::accumulate(c.pi.begin(), c.pi.end(), 0.0), 1.0, 1e-12);
    EXPECT_LT(c.residual, 1e-12);
    for (double p : c.pi) EXPECT_GE(p, -1e-15);
  }
}

TEST(TandemMeans, OneHopEqualsRate) {
  for (double a : {0.1, 0.3, 0.5, 0.7, 0.9}) EXPECT_NEAR(tandem_means(1, a)[0], a, 1e-10);
}

TEST(TandemMeans, StrictlyIncreasingTowardSource) {
  for (int n : {2, 3}) {
    for (double a : {0.05, 0.5, 0.95}) {
      const auto m = tandem_means(n, a);
      EXPECT_GT(m[0], 0.0);
      for (std::size_t i = 1; i < m.size(); ++i) EXPECT_GT(m[i], m[i - 1]) << n << " " << a;
    }
  }
}

TEST(TandemSim, AgreesWithOracle) {
  const auto oracle = tandem_means(2, 0.5);
  const auto sim = simulate_tandem(2, 0.5, 400000, 3);
  ASSERT_EQ(sim.mean.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(sim.mean[i], oracle[i], 4.0 * sim.std_error[i] + 1e-3);
  EXPECT_EQ(sim.envelope_violations, 0);
  EXPECT_LE(sim.max_gap, 3);
}

TEST(Monotone, LongTandemOnlyClaimsUpperHalf) {
  const std::vector<double> grid = {0.3, 0.7};
  MonotoneOptions opt;
  opt.sim_slots = 200000;
  const auto rep = verify_monotone(5, grid, opt);
  ASSERT_EQ(rep.points.size(), 2u);
  EXPECT_FALSE(rep.points[0].asserted);
  EXPECT_TRUE(rep.points[1].asserted);
  EXPECT_TRUE(rep.ok());
}
