#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dacl/bp_engine.hpp"
#include "dacl/rng.hpp"

using namespace dacl;

namespace {

std::vector<Commodity> grid_commodities() {
  std::vector<Commodity> cs(3);
  const NodeId dst[] = {35, 30, 5};
  const NodeId src[] = {0, 5, 30};
  for (int d = 0; d < 3; ++d) {
    cs[static_cast<std::size_t>(d)].id = d;
    cs[static_cast<std::size_t>(d)].destination = dst[d];
    cs[static_cast<std::size_t>(d)].sources.push_back(Source{src[d], UtilitySpec{1.0}, std::nullopt});
  }
  return cs;
}

PriceTable random_prices(int nodes, int commodities, std::uint64_t seed, int levels) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> dist(0, levels);
  PriceTable p(nodes, commodities);
  for (NodeId n = 0; n < nodes; ++n) {
    for (CommodityId d = 0; d < commodities; ++d) p.at(n, d) = dist(gen);
  }
  return p;
}

}  // namespace

TEST(CounterRng, PureFunctionOfKey) {
  const CounterRng a(7), b(7), c(8);
  EXPECT_EQ(a.bits(Stream::Arrival, 3, 4), b.bits(Stream::Arrival, 3, 4));
  EXPECT_NE(a.bits(Stream::Arrival, 3, 4), c.bits(Stream::Arrival, 3, 4));
  EXPECT_NE(a.bits(Stream::Arrival, 3, 4), a.bits(Stream::TieBreak, 3, 4));
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform(Stream::Split, static_cast<std::uint64_t>(i), 1);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(a.below(5, Stream::TieBreak, static_cast<std::uint64_t>(i), 0), 5u);
  }
}

TEST(FlowControl, CappedInverseMarginal) {
  PolicyConfig cfg;
  cfg.K = 100.0;
  cfg.x_max = 2.0;
  const UtilitySpec u{1.0};
  EXPECT_DOUBLE_EQ(flow_control_mean(0.0, u, cfg), 2.0);
  EXPECT_DOUBLE_EQ(flow_control_mean(10.0, u, cfg), 2.0);
  EXPECT_DOUBLE_EQ(flow_control_mean(200.0, u, cfg), 0.5);
  EXPECT_DOUBLE_EQ(flow_control_mean(400.0, UtilitySpec{3.0}, cfg), 0.75);
}

TEST(Arrivals, FloorPlusBernoulli) {
  EXPECT_EQ(sample_arrival(2.3, 0.29), 3);
  EXPECT_EQ(sample_arrival(2.3, 0.31), 2);
  EXPECT_EQ(sample_arrival(0.0, 0.0), 0);
  EXPECT_EQ(sample_arrival(4.0, 0.999), 4);
  EXPECT_THROW(sample_arrival(-1.0, 0.5), std::invalid_argument);
  std::mt19937_64 gen(3);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(sample_arrival(1.25, gen));
  EXPECT_NEAR(sum / n, 1.25, 0.01);
}

TEST(DecideLinks, LargestWeightToLowerPrice) {
  const NetworkGraph g = build_tandem(1, 1.0);
  PriceTable p(2, 2);
  p.at(1, 0) = 5;
  p.at(0, 1) = 9;
  PolicyConfig cfg;
  const auto dec = decide_links(p, g, cfg, 0);
  ASSERT_EQ(dec.size(), 1u);
  EXPECT_EQ(dec[0].commodity, 1);
  EXPECT_EQ(g.arc(dec[0].arc).from, 0);
  EXPECT_DOUBLE_EQ(dec[0].rate, 1.0);
}

TEST(DecideLinks, MinResourceOffsetIdlesSmallDifferentials) {
  const NetworkGraph g = build_tandem(1, 1.0);
  PriceTable p(2, 1);
  p.at(1, 0) = 3;
  PolicyConfig cfg;
  cfg.variant = BpVariant::MinResource;
  cfg.M = 3.0;
  EXPECT_FALSE(decide_links(p, g, cfg, 0)[0].active());
  p.at(1, 0) = 4;
  EXPECT_TRUE(decide_links(p, g, cfg, 0)[0].active());
}

TEST(DecideLinks, ParallelMatchesSerial) {
  const NetworkGraph g = build_grid(8, 1.0);
  for (BpVariant v : {BpVariant::Dtbp, BpVariant::MinResource}) {
    PolicyConfig cfg;
    cfg.variant = v;
    cfg.M = 2.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      // Few levels so ties are frequent.
      const PriceTable p = random_prices(g.node_count(), 4, s, 3);
      const auto serial = decide_links(p, g, cfg, static_cast<std::int64_t>(s), KernelMode::Serial);
      const auto parallel = decide_links(p, g, cfg, static_cast<std::int64_t>(s), KernelMode::Parallel);
      EXPECT_EQ(serial, parallel);
    }
  }
}

TEST(PriceStep, ServiceArrivalAndDestinationReset) {
  const NetworkGraph g = build_tandem(2, 1.0);
  Commodity c;
  c.destination = 0;
  c.sources.push_back(Source{2, UtilitySpec{}, std::nullopt});
  const std::vector<Commodity> cs = {c};
  PriceTable p(3, 1);
  p.at(2, 0) = 0.5;
  p.at(1, 0) = 2;
  std::vector<LinkDecision> dec(2);
  for (LinkId l = 0; l < 2; ++l) dec[static_cast<std::size_t>(l)].link = l;
  dec[0] = {0, 0, *g.find_arc(1, 0), 1.0};
  dec[1] = {1, 0, *g.find_arc(2, 1), 1.0};
  ArrivalRecord arr{{3}, {3.0}};
  const PriceTable next = price_step(p, dec, arr, g, cs);
  EXPECT_DOUBLE_EQ(next.at(2, 0), 3.0);  // (0.5 - 1)^+ + 3
  EXPECT_DOUBLE_EQ(next.at(1, 0), 2.0);  // (2 - 1) + 1
  EXPECT_DOUBLE_EQ(next.at(0, 0), 0.0);
}

TEST(BpEngine, ParallelRunIsIdentical) {
  const NetworkGraph g = build_grid(6, 1.0);
  PolicyConfig cfg;
  cfg.K = 50.0;
  cfg.x_max = 2.0;
  cfg.seed = 9;
  BpEngine a(g, grid_commodities(), cfg, KernelMode::Serial);
  BpEngine b(g, grid_commodities(), cfg, KernelMode::Parallel);
  for (int t = 0; t < 3000; ++t) {
    const SlotTrace& ta = a.step();
    const SlotTrace& tb = b.step();
    ASSERT_EQ(ta.decisions, tb.decisions) << "slot " << t;
    ASSERT_EQ(ta.arrivals.count, tb.arrivals.count);
  }
  EXPECT_EQ(a.state().prices, b.state().prices);
}

TEST(BpEngine, OneHopMeanEqualsArrivalRate) {
  Commodity c;
  c.destination = 0;
  c.sources.push_back(Source{1, UtilitySpec{}, 0.4});
  BpEngine e(build_tandem(1, 1.0), {c}, PolicyConfig{});
  PriceAverager avg(2, 1);
  for (int t = 0; t < 200000; ++t) {
    e.step();
    avg.add(e.state().prices);
  }
  EXPECT_NEAR(avg.mean().at(1, 0), 0.4, 0.01);
  EXPECT_EQ(avg.samples(), 200000);
}

TEST(PolicyConfig, Validation) {
  PolicyConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.K = 0.0;
  EXPECT_ANY_THROW(cfg.validate());
  cfg = PolicyConfig{};
  cfg.x_max = -1.0;
  EXPECT_ANY_THROW(cfg.validate());
}
