#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "dacl/da_routing.hpp"

using namespace dacl;

namespace {

CommoditySubgraph make_sub(int nodes, std::vector<std::pair<NodeId, NodeId>> edges) {
  CommoditySubgraph s;
  s.nodes = nodes;
  for (auto [a, b] : edges) s.edges.push_back({0, a, b, 1.0});
  return s;
}

std::vector<Commodity> tandem_commodity(int hops) {
  Commodity c;
  c.destination = 0;
  c.sources.push_back(Source{hops, UtilitySpec{}, std::nullopt});
  return {c};
}

SlotTrace trace_with(const NetworkGraph& g, std::int64_t slot, std::int64_t admitted,
                     std::vector<std::pair<ArcId, double>> grants) {
  SlotTrace t;
  t.slot = slot;
  t.decisions.resize(static_cast<std::size_t>(g.link_count()));
  for (LinkId l = 0; l < g.link_count(); ++l) t.decisions[static_cast<std::size_t>(l)].link = l;
  for (auto [arc, rate] : grants) {
    t.decisions[static_cast<std::size_t>(NetworkGraph::link_of(arc))] = {NetworkGraph::link_of(arc), 0, arc, rate};
  }
  t.arrivals.count = {admitted};
  t.arrivals.mean = {static_cast<double>(admitted)};
  return t;
}

}  // namespace

TEST(NetRateMapping, OneSidedDifference) {
  const NetworkGraph g = build_tandem(1, 1.0);
  RatePoint p = RatePoint::zeros(g, 1);
  p.exo(0, 1) = 0.4;
  p.rate(0, *g.find_arc(1, 0)) = 0.7;
  p.rate(0, *g.find_arc(0, 1)) = 0.3;
  const RatePoint m = map_rate_point(p);
  EXPECT_DOUBLE_EQ(m.rate(0, *g.find_arc(1, 0)), 0.4);
  EXPECT_DOUBLE_EQ(m.rate(0, *g.find_arc(0, 1)), 0.0);
  EXPECT_EQ(m.x, p.x);
}

TEST(LoopCheck, EmptyAndSingleEdge) {
  const auto empty = check_loop_free(make_sub(3, {}));
  EXPECT_TRUE(empty.acyclic);
  EXPECT_EQ(empty.longest_path, 0);
  const auto one = check_loop_free(make_sub(3, {{1, 2}}));
  EXPECT_TRUE(one.acyclic);
  EXPECT_EQ(one.longest_path, 1);
}

TEST(LoopCheck, OrderAndLongestPath) {
  const auto c = check_loop_free(make_sub(5, {{0, 1}, {1, 2}, {0, 2}, {2, 3}, {3, 4}, {0, 4}}));
  ASSERT_TRUE(c.acyclic);
  EXPECT_EQ(c.longest_path, 4);
  std::vector<int> pos(5);
  for (std::size_t i = 0; i < c.order.size(); ++i) pos[static_cast<std::size_t>(c.order[i])] = static_cast<int>(i);
  EXPECT_LT(pos[0], pos[1]);
  EXPECT_LT(pos[1], pos[2]);
  EXPECT_LT(pos[3], pos[4]);
}

TEST(LoopCheck, CycleWitness) {
  const auto c = check_loop_free(make_sub(4, {{0, 1}, {1, 2}, {2, 3}, {3, 1}}));
  ASSERT_FALSE(c.acyclic);
  ASSERT_GE(c.cycle.size(), 3u);
  EXPECT_EQ(c.cycle.front(), c.cycle.back());
  const std::set<std::pair<NodeId, NodeId>> edges = {{0, 1}, {1, 2}, {2, 3}, {3, 1}};
  for (std::size_t i = 0; i + 1 < c.cycle.size(); ++i) {
    EXPECT_TRUE(edges.count({c.cycle[i], c.cycle[i + 1]}));
  }
}

TEST(Subgraph, ThresholdFilters) {
  const NetworkGraph g = build_tandem(3, 1.0);
  RatePoint p = RatePoint::zeros(g, 1);
  p.rate(0, *g.find_arc(3, 2)) = 0.5;
  p.rate(0, *g.find_arc(2, 1)) = 5e-4;
  p.rate(0, *g.find_arc(1, 0)) = 0.5;
  const NetRateSnapshot s = snapshot_from_rates(p);
  const CommoditySubgraph sub = build_subgraph(s, g, 0, 1e-3);
  ASSERT_EQ(sub.edges.size(), 2u);
  EXPECT_EQ(build_subgraph(s, g, 0, 0.0).edges.size(), 3u);
}

TEST(Accumulator, WindowAndSnapshotTiming) {
  const NetworkGraph g = build_tandem(2, 1.0);
  const auto cs = tandem_commodity(2);
  NetRateAccumulator acc(g, cs, 4, 4);
  const ArcId fwd = *g.find_arc(2, 1), back = *g.find_arc(1, 2);
  for (int t = 0; t < 8; ++t) {
    EXPECT_FALSE(acc.snapshot_due());
    // Slots 0..3 send forward; slots 4..7 alternate.
    const ArcId a = t < 4 || t % 2 == 0 ? fwd : back;
    acc.accumulate(trace_with(g, t, 1, {{a, 1.0}}));
    if (t == 3) {
      EXPECT_TRUE(acc.snapshot_due());
      const NetRateSnapshot s = snapshot_net_rates(acc, SnapshotMode::MovingWindow);
      EXPECT_DOUBLE_EQ(s.at(0, fwd), 1.0);
      EXPECT_DOUBLE_EQ(s.admitted_rate(0, 2), 1.0);
      acc.accumulate(trace_with(g, ++t, 1, {{back, 1.0}}));  // slot 4 sends back
      EXPECT_FALSE(acc.snapshot_due());
    }
  }
  ASSERT_TRUE(acc.snapshot_due());
  EXPECT_DOUBLE_EQ(acc.window_sum(fwd, 0), 1.0);   // slot 6
  EXPECT_DOUBLE_EQ(acc.window_sum(back, 0), 3.0);  // slots 4, 5, 7
  EXPECT_DOUBLE_EQ(acc.cumulative_sum(fwd, 0), 5.0);
  const auto exact = acc.exact_window_sums();
  EXPECT_DOUBLE_EQ(exact[static_cast<std::size_t>(back)], 3.0);
  const NetRateSnapshot win = snapshot_net_rates(acc, SnapshotMode::MovingWindow);
  EXPECT_DOUBLE_EQ(win.at(0, back), 0.5);
  EXPECT_DOUBLE_EQ(win.at(0, fwd), 0.0);
  const NetRateSnapshot full = snapshot_net_rates(acc, SnapshotMode::FullHistory);
  EXPECT_DOUBLE_EQ(full.at(0, fwd), 2.0 / 8.0);
}

TEST(PriceDescent, FlagsUphillFlow) {
  const NetworkGraph g = build_tandem(2, 1.0);
  RatePoint p = RatePoint::zeros(g, 1);
  p.rate(0, *g.find_arc(2, 1)) = 0.5;
  p.rate(0, *g.find_arc(1, 0)) = 0.5;
  const NetRateSnapshot s = snapshot_from_rates(p);
  PriceTable mean(3, 1);
  mean.at(2, 0) = 4;
  mean.at(1, 0) = 2;
  EXPECT_TRUE(check_price_descent(s, g, mean).empty());
  mean.at(1, 0) = 5;
  const auto v = check_price_descent(s, g, mean);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].from, 2);
  EXPECT_EQ(v[0].to, 1);
}

TEST(NetRatesCsv, PositiveRowsOnly) {
  const NetworkGraph g = build_tandem(2, 1.0);
  RatePoint p = RatePoint::zeros(g, 1);
  p.rate(0, *g.find_arc(2, 1)) = 0.25;
  std::ostringstream os;
  write_netrates_csv(os, snapshot_from_rates(p), g);
  const std::string s = os.str();
  EXPECT_NE(s.find("0,2,1,0.25"), std::string::npos);
  EXPECT_EQ(s.find("0,1,0,"), std::string::npos);
}
