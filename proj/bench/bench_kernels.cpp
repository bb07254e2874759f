// Serial reference against OpenMP kernels. Grid side is the argument.

#include <random>

#include <benchmark/benchmark.h>

#include "dacl/bp_engine.hpp"
#include "dacl/da_scheduler.hpp"
#include "dacl/harness.hpp"

using namespace dacl;

namespace {

constexpr int kCommodities = 8;

PriceTable prices_for(const NetworkGraph& g) {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<int> dist(0, 200);
  PriceTable p(g.node_count(), kCommodities);
  for (NodeId n = 0; n < g.node_count(); ++n) {
    for (CommodityId d = 0; d < kCommodities; ++d) p.at(n, d) = dist(gen);
  }
  return p;
}

template <KernelMode Mode>
void BM_DecideLinks(benchmark::State& state) {
  const NetworkGraph g = build_grid(static_cast<int>(state.range(0)), 1.0);
  const PriceTable p = prices_for(g);
  PolicyConfig cfg;
  std::vector<LinkDecision> out(static_cast<std::size_t>(g.link_count()));
  std::int64_t slot = 0;
  for (auto _ : state) {
    if constexpr (Mode == KernelMode::Parallel) {
      decide_links_parallel(p, g, cfg, slot++, out);
    } else {
      decide_links_serial(p, g, cfg, slot++, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * g.link_count());
}

template <KernelMode Mode>
void BM_ServiceLinks(benchmark::State& state) {
  const NetworkGraph g = build_grid(static_cast<int>(state.range(0)), 1.0);
  TokenRateTable rates;
  rates.arcs = g.arc_count();
  rates.commodities = kCommodities;
  rates.delta = 0.001;
  rates.S.assign(static_cast<std::size_t>(kCommodities * g.arc_count()), 0.9 / (2.0 * kCommodities));
  SchedulerState s(g, kCommodities);
  std::vector<ServiceRecord> out(static_cast<std::size_t>(g.link_count()));
  for (auto _ : state) {
    if constexpr (Mode == KernelMode::Parallel) {
      service_links_parallel(s, rates, g, out);
    } else {
      service_links_serial(s, rates, g, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * g.link_count());
}

// Whole runs fanned out over threads against the same runs one by one.
ScenarioConfig sweep_base() {
  ScenarioConfig cfg;
  cfg.topology.kind = "grid";
  cfg.topology.side = 6;
  cfg.commodities = {FlowSpec{0, 30, 1.0, std::nullopt}, FlowSpec{5, 35, 1.0, std::nullopt}};
  cfg.policy.kind = PolicyKind::Dtbp;
  cfg.policy.x_max = 3.0;
  cfg.slots = 5000;
  cfg.warmup = 1000;
  return cfg;
}

void BM_SweepSerial(benchmark::State& state) {
  const ScenarioConfig base = sweep_base();
  for (auto _ : state) {
    for (double K : {50.0, 100.0, 200.0, 400.0}) {
      ScenarioConfig cfg = base;
      cfg.policy.K = K;
      benchmark::DoNotOptimize(run_scenario(cfg).mean_delay());
    }
  }
}

void BM_SweepParallel(benchmark::State& state) {
  const ScenarioConfig base = sweep_base();
  const std::vector<double> ks = {50.0, 100.0, 200.0, 400.0};
  for (auto _ : state) {
    // sweep_k also runs the cross-layer policy, so compare per run.
    std::vector<ScenarioConfig> cfgs;
    for (double K : ks) {
      ScenarioConfig cfg = base;
      cfg.policy.K = K;
      cfgs.push_back(cfg);
    }
    std::vector<double> out(cfgs.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < cfgs.size(); ++i) out[i] = run_scenario(cfgs[i]).mean_delay();
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_DecideLinks<KernelMode::Serial>)->Arg(6)->Arg(32)->Arg(128)->UseRealTime();
BENCHMARK(BM_DecideLinks<KernelMode::Parallel>)->Arg(6)->Arg(32)->Arg(128)->UseRealTime();
BENCHMARK(BM_ServiceLinks<KernelMode::Serial>)->Arg(6)->Arg(32)->Arg(128)->UseRealTime();
BENCHMARK(BM_ServiceLinks<KernelMode::Parallel>)->Arg(6)->Arg(32)->Arg(128)->UseRealTime();
BENCHMARK(BM_SweepSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
