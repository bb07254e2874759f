#include <gtest/gtest.h>

#include "dacl/crosslayer.hpp"
#include "dacl/errors.hpp"
#include "dacl/harness.hpp"

using namespace dacl;

namespace {

ScenarioConfig small_grid() {
  ScenarioConfig cfg;
  cfg.name = "small";
  cfg.topology.kind = "grid";
  cfg.topology.side = 4;
  cfg.commodities = {FlowSpec{0, 15, 1.0, std::nullopt}, FlowSpec{3, 12, 1.0, std::nullopt}};
  cfg.policy.kind = PolicyKind::CrossLayer;
  cfg.policy.K = 100.0;
  cfg.policy.x_max = 2.0;
  cfg.policy.window = 2000;
  cfg.policy.period = 2000;
  cfg.slots = 8000;
  cfg.warmup = 4000;
  return cfg;
}

CrossLayerEngine engine_for(const ScenarioConfig& cfg, KernelMode mode) {
  return CrossLayerEngine(build_network(cfg), build_commodities(cfg), crosslayer_config(cfg), mode);
}

}  // namespace

TEST(CrossLayer, ValidateRejectsLargeEpsilon) {
  CrossLayerConfig c;
  c.epsilon = 1.0;
  EXPECT_THROW(c.validate(build_grid(3, 1.0)), ConfigError);
  c.epsilon = 0.05;
  c.window = 0;
  EXPECT_THROW(c.validate(build_grid(3, 1.0)), ConfigError);
}

TEST(CrossLayer, NoRoutesBeforeFirstSnapshot) {
  auto e = engine_for(small_grid(), KernelMode::Serial);
  for (int t = 0; t < 1999; ++t) e.step();
  EXPECT_FALSE(e.snapshot().has_value());
  EXPECT_EQ(e.delivered_total(), 0);
  EXPECT_GT(e.held(), 0);
}

TEST(CrossLayer, SnapshotsAreAcyclicAndDeltaWithinBound) {
  const ScenarioConfig cfg = small_grid();
  auto e = engine_for(cfg, KernelMode::Serial);
  for (std::int64_t t = 0; t < cfg.slots; ++t) e.step();
  ASSERT_TRUE(e.snapshot().has_value());
  for (const auto& c : e.certificates()) EXPECT_TRUE(c.acyclic);
  EXPECT_GT(e.h_max(), 0);
  EXPECT_LT(e.delta(), delta_bound(cfg.policy.epsilon, e.h_max(), 2));
  EXPECT_NO_THROW(e.rates().validate(e.graph()));
  EXPECT_LT(e.scheduler().tokens.max_conservation_error(), 1e-9);
  EXPECT_GT(e.delivered_total(), 0);
  // Early snapshots may be rejected while admissions settle; the last one applies.
  ASSERT_FALSE(e.events().empty());
  EXPECT_EQ(e.events().back().outcome, SnapshotEvent::Outcome::Applied);
  for (const auto& ev : e.events()) {
    if (ev.outcome == SnapshotEvent::Outcome::Rejected) EXPECT_FALSE(ev.message.empty());
    EXPECT_NE(ev.outcome, SnapshotEvent::Outcome::Cycle);
  }
}

TEST(CrossLayer, ParallelRunIsIdentical) {
  const ScenarioConfig cfg = small_grid();
  auto a = engine_for(cfg, KernelMode::Serial);
  auto b = engine_for(cfg, KernelMode::Parallel);
  for (std::int64_t t = 0; t < cfg.slots; ++t) {
    a.step();
    b.step();
    ASSERT_EQ(a.last_delivered(), b.last_delivered()) << "slot " << t;
  }
  EXPECT_EQ(a.layer1().prices, b.layer1().prices);
  EXPECT_EQ(a.layer3_injected(), b.layer3_injected());
}

TEST(CrossLayer, LayerThreeInjectsLayerOneAdmissions) {
  const ScenarioConfig cfg = small_grid();
  auto e = engine_for(cfg, KernelMode::Serial);
  for (std::int64_t t = 0; t < cfg.slots; ++t) e.step();
  EXPECT_EQ(e.layer1_admitted(), e.layer3_injected());
  EXPECT_EQ(e.packets().size(), e.layer3_injected()[0] + e.layer3_injected()[1]);
}

TEST(CrossLayer, TriangleSubgraphIsChain) {
  ScenarioConfig cfg;
  cfg.topology.kind = "custom";
  cfg.topology.nodes = 6;
  cfg.topology.links = {{1, 2}, {2, 3}, {2, 4}, {2, 5}, {4, 5}};
  cfg.commodities = {FlowSpec{1, 3, 1.0, std::nullopt}};
  cfg.policy.kind = PolicyKind::CrossLayer;
  cfg.slots = 30000;
  cfg.warmup = 10000;
  auto e = engine_for(cfg, KernelMode::Serial);
  for (std::int64_t t = 0; t < cfg.slots; ++t) e.step();
  ASSERT_EQ(e.subgraphs().size(), 1u);
  std::set<std::pair<NodeId, NodeId>> edges;
  for (const auto& s : e.subgraphs()[0].edges) edges.insert({s.from, s.to});
  EXPECT_EQ(edges, (std::set<std::pair<NodeId, NodeId>>{{1, 2}, {2, 3}}));
}
