#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "dacl/errors.hpp"
#include "dacl/harness.hpp"

using namespace dacl;
namespace fs = std::filesystem;

namespace {

ScenarioConfig tiny(PolicyKind kind) {
  ScenarioConfig cfg;
  cfg.name = "tiny";
  cfg.topology.kind = "grid";
  cfg.topology.side = 3;
  cfg.commodities = {FlowSpec{0, 8, 1.0, std::nullopt}};
  cfg.policy.kind = kind;
  cfg.policy.K = 50.0;
  cfg.policy.x_max = 1.0;
  cfg.policy.window = 1000;
  cfg.policy.period = 1000;
  cfg.slots = 4000;
  cfg.warmup = 2000;
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dacl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Policy, Parsing) {
  EXPECT_EQ(parse_policy("dtbp"), PolicyKind::Dtbp);
  EXPECT_EQ(parse_policy("Min_Resource"), PolicyKind::MinResource);
  EXPECT_EQ(parse_policy("cross-layer"), PolicyKind::CrossLayer);
  EXPECT_EQ(parse_policy(to_string(PolicyKind::CrossLayer)), PolicyKind::CrossLayer);
  EXPECT_ANY_THROW(parse_policy("greedy"));
  EXPECT_EQ(parse_split("random"), SplitMode::Random);
  EXPECT_EQ(parse_estimate(to_string(ArrivalEstimate::Observed)), ArrivalEstimate::Observed);
  EXPECT_EQ(parse_format("json"), ExportFormat::Json);
}

TEST(Scenario, JsonRoundTrip) {
  ScenarioConfig cfg = tiny(PolicyKind::CrossLayer);
  cfg.policy.delta = 0.002;
  cfg.policy.split = SplitMode::Random;
  cfg.commodities.push_back(FlowSpec{2, 8, 2.0, 0.3});
  const ScenarioConfig back = scenario_from_json(scenario_to_json(cfg));
  EXPECT_EQ(scenario_to_json(back), scenario_to_json(cfg));
  EXPECT_EQ(back.commodities[1].rate, 0.3);
  EXPECT_EQ(back.policy.delta, 0.002);
}

TEST(Scenario, ValidationNamesField) {
  auto expect_error = [](ScenarioConfig cfg, const std::string& field) {
    try {
      cfg.validate();
      ADD_FAILURE() << "no error for " << field;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  ScenarioConfig c = tiny(PolicyKind::Dtbp);
  c.warmup = 5000;
  expect_error(c, "warmup");
  c = tiny(PolicyKind::Dtbp);
  c.policy.K = -1;
  expect_error(c, "policy.K");
  c = tiny(PolicyKind::CrossLayer);
  c.policy.epsilon = 1.5;
  expect_error(c, "policy.epsilon");
  c = tiny(PolicyKind::Dtbp);
  c.commodities[0].dst = 0;
  expect_error(c, "src == dst");
  c = tiny(PolicyKind::Dtbp);
  c.topology.kind = "ring";
  expect_error(c, "topology.kind");
}

TEST(Scenario, JsonErrors) {
  EXPECT_THROW(scenario_from_json(nlohmann::json::array()), ConfigError);
  nlohmann::json j = scenario_to_json(tiny(PolicyKind::Dtbp));
  j["policy"]["K"] = "big";
  EXPECT_THROW(scenario_from_json(j), ConfigError);
  j = scenario_to_json(tiny(PolicyKind::Dtbp));
  j["policy"]["split"] = "zigzag";
  EXPECT_THROW(scenario_from_json(j), ConfigError);
  j = scenario_to_json(tiny(PolicyKind::Dtbp));
  j.erase("topology");
  EXPECT_THROW(scenario_from_json(j), ConfigError);
}

TEST(Scenario, CommoditiesMergeByDestination) {
  ScenarioConfig cfg = tiny(PolicyKind::Dtbp);
  cfg.commodities = {FlowSpec{0, 8, 1.0, std::nullopt}, FlowSpec{2, 6, 1.0, std::nullopt},
                     FlowSpec{1, 8, 3.0, std::nullopt}};
  const auto cs = build_commodities(cfg);
  ASSERT_EQ(cs.size(), 2u);
  EXPECT_EQ(cs[0].destination, 8);
  EXPECT_EQ(cs[0].sources.size(), 2u);
  EXPECT_DOUBLE_EQ(cs[0].sources[1].utility.weight, 3.0);
  EXPECT_EQ(cs[1].destination, 6);
}

TEST(Stability, Verdicts) {
  std::vector<double> flat(10000, 5.0);
  EXPECT_TRUE(stability_check(flat, 1000, 0.05).stable);
  std::vector<double> grow(10000);
  for (std::size_t i = 0; i < grow.size(); ++i) grow[i] = 0.01 * static_cast<double>(i);
  const auto v = stability_check(grow, 1000, 0.05);
  EXPECT_FALSE(v.stable);
  EXPECT_EQ(v.window_means.size(), 10u);
  EXPECT_DOUBLE_EQ(v.max_window_mean, v.window_means.back());
  // Transient peak early, settled tail.
  EXPECT_TRUE(stability_from_means({2, 9, 4, 3, 3, 3}, 0.05).stable);
  EXPECT_FALSE(stability_from_means({2, 3, 3, 3, 3, 8}, 0.05).stable);
  EXPECT_THROW(stability_check(flat, 6000, 0.05), NotReady);
  EXPECT_THROW(stability_from_means({1.0}, 0.05), NotReady);
}

TEST(Run, SerialAndParallelRecordsMatch) {
  for (PolicyKind k : {PolicyKind::Dtbp, PolicyKind::MinResource, PolicyKind::CrossLayer}) {
    const ScenarioConfig cfg = tiny(k);
    EXPECT_EQ(run_scenario(cfg, KernelMode::Serial), run_scenario(cfg, KernelMode::Parallel)) << to_string(k);
  }
}

TEST(Run, RecordContents) {
  const RunRecord r = run_scenario(tiny(PolicyKind::Dtbp));
  EXPECT_EQ(r.policy, "dtbp");
  EXPECT_GT(r.delivered(), 0);
  EXPECT_LE(r.delivered(), r.admitted());
  EXPECT_GE(r.mean_delay(), 4.0);  // at least one slot per hop on a 4-hop path
  EXPECT_GE(r.fraction_hops_above(3), 0.0);
  EXPECT_DOUBLE_EQ(r.fraction_hops_above(0), 1.0);
  EXPECT_FALSE(r.queues.empty());
  std::int64_t hist = 0;
  for (const auto& h : r.delays) hist += h.count;
  EXPECT_EQ(hist, r.delivered());
}

TEST(Export, CsvAndJsonRoundTrip) {
  const RunRecord r = run_scenario(tiny(PolicyKind::CrossLayer));
  for (ExportFormat f : {ExportFormat::Csv, ExportFormat::Json}) {
    const fs::path dir = scratch(f == ExportFormat::Csv ? "csv" : "json");
    export_record(r, dir, f);
    EXPECT_EQ(import_record(dir, f), r);
  }
  const fs::path dir = scratch("csv_headers");
  export_record(r, dir, ExportFormat::Csv);
  std::ifstream in(dir / "delays.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "commodity,delay_slots,count");
  EXPECT_TRUE(fs::exists(dir / "netrates.csv"));
}

TEST(KSweep, RowsAndErrors) {
  ScenarioConfig cfg = tiny(PolicyKind::Dtbp);
  const std::vector<double> ks = {20, 80};
  const auto rows = sweep_k(cfg, ks);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& row : rows) EXPECT_TRUE(std::isfinite(row.mean_delay));
  const std::vector<double> one = {20};
  EXPECT_ANY_THROW(sweep_k(cfg, one));
  const fs::path dir = scratch("ksweep");
  write_ksweep_csv(dir / "ksweep.csv", rows);
  std::ifstream in(dir / "ksweep.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "policy,K,mean_delay");
}
