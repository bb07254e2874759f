#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "dacl/da_scheduler.hpp"
#include "dacl/errors.hpp"

using namespace dacl;

namespace {

std::vector<Commodity> commodities(int count, NodeId dst0) {
  std::vector<Commodity> cs(static_cast<std::size_t>(count));
  for (int d = 0; d < count; ++d) {
    cs[static_cast<std::size_t>(d)].id = d;
    cs[static_cast<std::size_t>(d)].destination = dst0 + d;
  }
  return cs;
}

TokenRateTable uniform_rates(const NetworkGraph& g, int D, double per_arc, double delta) {
  TokenRateTable t;
  t.arcs = g.arc_count();
  t.commodities = D;
  t.delta = delta;
  t.S.assign(static_cast<std::size_t>(D * g.arc_count()), per_arc);
  return t;
}

// Random queue contents and token levels on a grid.
SchedulerState random_state(const NetworkGraph& g, int D, std::uint64_t seed) {
  SchedulerState s(g, D);
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> len(0, 4);
  PacketId next = 0;
  for (CommodityId d = 0; d < D; ++d) {
    for (ArcId a = 0; a < g.arc_count(); ++a) {
      for (int k = len(gen); k > 0; --k) s.queues.queue(a, d).push_back(next++);
      s.tokens.add(a, d, std::uniform_real_distribution<double>(0.0, 1.5)(gen));
    }
  }
  return s;
}

}  // namespace

TEST(TokenRates, DeltaBound) {
  EXPECT_DOUBLE_EQ(delta_bound(0.05, 5, 2), 0.005);
  EXPECT_TRUE(std::isinf(delta_bound(0.05, 0, 2)));
}

TEST(TokenRates, ValidateRejectsOverload) {
  const NetworkGraph g = build_tandem(2, 1.0);
  EXPECT_NO_THROW(uniform_rates(g, 2, 0.2, 0.01).validate(g));
  EXPECT_THROW(uniform_rates(g, 2, 0.25, 0.01).validate(g), ConfigError);  // sum hits capacity
  EXPECT_THROW(uniform_rates(g, 2, 0.1, 0.0).validate(g), ConfigError);
  auto neg = uniform_rates(g, 1, 0.1, 0.01);
  neg.S[1] = -0.1;
  EXPECT_THROW(neg.validate(g), ConfigError);
}

TEST(RouteTable, SharesAndPick) {
  const NetworkGraph g = build_grid(2, 1.0);  // 0-1 / 2-3 square
  const auto cs = commodities(1, 3);
  CommoditySubgraph sub;
  sub.nodes = 4;
  sub.edges = {{*g.find_arc(0, 1), 0, 1, 0.3}, {*g.find_arc(0, 2), 0, 2, 0.1},
               {*g.find_arc(1, 3), 1, 3, 0.3}, {*g.find_arc(2, 3), 2, 3, 0.1}};
  const std::vector<CommoditySubgraph> subs = {sub};
  const RouteTable rt(g, cs, subs);
  ASSERT_EQ(rt.row(0, 0).size(), 2u);
  double total = 0.0;
  for (const auto& s : rt.row(0, 0)) total += s.probability;
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_FALSE(rt.has_route(3, 0));
  EXPECT_THROW(rt.pick(3, 0, 0.5), RoutingHole);
  EXPECT_EQ(rt.pick(0, 0, 0.0), *g.find_arc(0, 1));
  EXPECT_EQ(rt.pick(0, 0, 0.99), *g.find_arc(0, 2));

  DeficitSplitter split(rt);
  std::map<ArcId, int> hits;
  for (int k = 0; k < 400; ++k) ++hits[split.pick(rt, 0, 0)];
  EXPECT_EQ(hits[*g.find_arc(0, 1)], 300);
  EXPECT_EQ(hits[*g.find_arc(0, 2)], 100);
}

TEST(Service, WinnerPaddedWithDummies) {
  const NetworkGraph g = build_tandem(1, 2.0);
  SchedulerState s(g, 2);
  const ArcId a = *g.find_arc(1, 0);
  s.queues.queue(a, 1).push_back(42);
  s.tokens.add(a, 0, 1.0);
  s.tokens.add(a, 1, 2.5);
  TokenRateTable rates = uniform_rates(g, 2, 0.0, 0.01);
  rates.S[static_cast<std::size_t>(1 * g.arc_count() + a)] = 0.5;
  std::vector<ServiceRecord> out(1);
  scheduler_slot(s, rates, g, out);
  ASSERT_TRUE(out[0].active());
  EXPECT_EQ(out[0].commodity, 1);
  EXPECT_EQ(out[0].arc, a);
  EXPECT_EQ(out[0].packets, std::vector<PacketId>{42});
  EXPECT_EQ(out[0].dummies, 1);
  EXPECT_DOUBLE_EQ(s.tokens.m(a, 1), 1.0);  // 2.5 + 0.5 - 2
  EXPECT_DOUBLE_EQ(s.tokens.m(a, 0), 1.0);
  EXPECT_LT(s.tokens.max_conservation_error(), 1e-12);
}

TEST(Service, HoldingBufferFillsDummies) {
  const NetworkGraph g = build_tandem(1, 3.0);
  SchedulerState s(g, 1);
  const ArcId a = *g.find_arc(1, 0);
  s.queues.queue(a, 0).push_back(1);
  s.queues.holding(1, 0).push_back(7);
  s.queues.holding(1, 0).push_back(8);
  s.queues.holding(1, 0).push_back(9);
  s.tokens.add(a, 0, 3.5);
  std::vector<ServiceRecord> out(1);
  scheduler_slot(s, uniform_rates(g, 1, 0.0, 0.01), g, out);
  EXPECT_EQ(out[0].packets, (std::vector<PacketId>{1, 7, 8}));
  EXPECT_EQ(out[0].dummies, 0);
  EXPECT_EQ(s.queues.held(), 1);
  EXPECT_EQ(s.queues.queued(), 0);
}

TEST(Service, IdleWhenNoTokenSurplus) {
  const NetworkGraph g = build_tandem(1, 1.0);
  SchedulerState s(g, 1);
  s.queues.queue(0, 0).push_back(1);
  s.tokens.add(0, 0, 0.5);
  std::vector<ServiceRecord> out(1);
  scheduler_slot(s, uniform_rates(g, 1, 0.2, 0.01), g, out);
  EXPECT_FALSE(out[0].active());
  EXPECT_EQ(s.queues.queued(), 1);
}

TEST(Service, ParallelMatchesSerial) {
  const NetworkGraph g = build_grid(8, 1.0);
  const int D = 3;
  const TokenRateTable rates = uniform_rates(g, D, 0.05, 0.01);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SchedulerState a = random_state(g, D, seed), b = random_state(g, D, seed);
    std::vector<ServiceRecord> ra(static_cast<std::size_t>(g.link_count())), rb(ra.size());
    for (int t = 0; t < 50; ++t) {
      scheduler_slot(a, rates, g, ra, KernelMode::Serial);
      scheduler_slot(b, rates, g, rb, KernelMode::Parallel);
      for (std::size_t l = 0; l < ra.size(); ++l) {
        ASSERT_EQ(ra[l].commodity, rb[l].commodity);
        ASSERT_EQ(ra[l].arc, rb[l].arc);
        ASSERT_EQ(ra[l].packets, rb[l].packets);
        ASSERT_EQ(ra[l].dummies, rb[l].dummies);
      }
    }
    for (CommodityId d = 0; d < D; ++d) {
      for (ArcId arc = 0; arc < g.arc_count(); ++arc) EXPECT_EQ(a.tokens.m(arc, d), b.tokens.m(arc, d));
    }
  }
}

TEST(TokenProcess, EntersRegionAndStays) {
  const std::vector<double> nu = {0.2, 0.3, 0.1};
  const std::vector<double> m0 = {40.0, 3.0, 25.0};
  const auto r = token_process_run(nu, 1.0, m0, 20000, true);
  ASSERT_GE(r.entry_slot, 0);
  // Integer drift ratio (64 / 0.4): the ceiling bound is one short, the
  // strict-inequality bound is not.
  EXPECT_EQ(r.entry_bound, 160.0);
  EXPECT_EQ(r.tight_bound, 161);
  EXPECT_LE(r.entry_slot, r.tight_bound);
  EXPECT_EQ(r.exits_after_entry, 0);
  ASSERT_EQ(r.sums.size(), 20001u);
  for (std::size_t t = static_cast<std::size_t>(r.entry_slot); t < r.sums.size(); ++t) EXPECT_LT(r.sums[t], 4.0);
}

TEST(TokenProcess, RejectsBadInput) {
  const std::vector<double> nu = {0.6, 0.5}, m0 = {0.0, 0.0};
  EXPECT_THROW(token_process_run(nu, 1.0, m0, 10), std::invalid_argument);
  const std::vector<double> ok = {0.1}, wrong = {0.0, 0.0};
  EXPECT_THROW(token_process_run(ok, 1.0, wrong, 10), std::invalid_argument);
}

TEST(ArrivalEstimator, RunningMean) {
  ArrivalEstimator est(2, 1);
  est.observe(std::vector<double>{1.0, 3.0});
  est.observe(std::vector<double>{0.0, 1.0});
  EXPECT_EQ(est.samples(), 2);
  EXPECT_DOUBLE_EQ(est.mean(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(est.mean(1, 0), 2.0);
}
