// dacl: run scenarios, K sweeps, tandem oracle tables and invariant suites.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dacl/errors.hpp"
#include "dacl/harness.hpp"
#include "dacl/tandem_oracle.hpp"
#include "dacl/verify.hpp"

using namespace dacl;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string policy;
  std::optional<std::int64_t> slots;
  std::optional<std::uint64_t> seed;
};

ScenarioConfig load_with(const std::string& file, const Overrides& o) {
  ScenarioConfig cfg = load_scenario(file);
  if (!o.policy.empty()) cfg.policy.kind = parse_policy(o.policy);
  if (o.slots) cfg.slots = *o.slots;
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

void print_summary(const RunRecord& r) {
  std::printf("policy %s seed %llu slots %lld\n", r.policy.c_str(), static_cast<unsigned long long>(r.seed),
              static_cast<long long>(r.slots));
  std::printf("  admitted %lld delivered %lld in flight %lld\n", static_cast<long long>(r.admitted()),
              static_cast<long long>(r.delivered()), static_cast<long long>(r.diagnostics.in_flight));
  std::printf("  mean delay %.3f variance %.3f max hops %lld\n", r.mean_delay(), r.delay_variance(),
              static_cast<long long>(r.diagnostics.max_hops));
  for (const SourceRate& s : r.rates) {
    std::printf("  commodity %d source %d rate %.4f\n", s.commodity, s.source, s.rate);
  }
  std::printf("  stable %s (max window mean %.2f)\n", r.stable ? "yes" : "no", r.max_window_mean);
  if (r.policy == to_string(PolicyKind::CrossLayer)) {
    const RunDiagnostics& d = r.diagnostics;
    std::printf("  snapshots %lld applied, %lld cyclic, %lld rejected; H_max %d delta %.3g\n",
                static_cast<long long>(d.snapshots_applied), static_cast<long long>(d.snapshot_cycles),
                static_cast<long long>(d.snapshot_rejected), d.h_max, d.delta);
  }
}

int cmd_run(const std::string& scenario, const Overrides& o, const std::string& out, const std::string& format,
            bool parallel) {
  const ScenarioConfig cfg = load_with(scenario, o);
  const RunRecord r = run_scenario(cfg, parallel ? KernelMode::Parallel : KernelMode::Serial);
  print_summary(r);
  if (!out.empty()) {
    fs::create_directories(out);
    export_record(r, out, parse_format(format));
    std::printf("wrote %s\n", out.c_str());
  }
  return 0;
}

int cmd_sweep(const std::string& scenario, const Overrides& o, std::vector<double> ks, const std::string& out) {
  const ScenarioConfig cfg = load_with(scenario, o);
  const auto rows = sweep_k(cfg, ks);
  std::map<std::string, std::vector<const KSweepRow*>> by_policy;
  for (const KSweepRow& row : rows) {
    std::printf("%-12s K %-8g mean delay %.3f\n", row.policy.c_str(), row.K, row.mean_delay);
    by_policy[row.policy].push_back(&row);
  }
  for (const auto& [policy, series] : by_policy) {
    std::printf("%-12s max/min %.3f\n", policy.c_str(), series.back()->mean_delay / series.front()->mean_delay);
  }
  if (!out.empty()) {
    fs::create_directories(out);
    write_ksweep_csv(fs::path(out) / "ksweep.csv", rows);
    std::printf("wrote %s\n", (fs::path(out) / "ksweep.csv").c_str());
  }
  return 0;
}

int cmd_oracle(int hops, int grid_points, std::int64_t sim_slots, std::uint64_t seed, const std::string& out) {
  const auto grid = open_grid(0.0, 1.0, grid_points);
  MonotoneOptions opt;
  opt.sim_slots = sim_slots;
  opt.seed = seed;
  const MonotoneReport rep = verify_monotone(hops, grid, opt);
  std::vector<std::vector<double>> means;
  for (const MonotonePoint& p : rep.points) {
    means.push_back(p.mean);
    std::printf("a %.4f %-10s", p.a, to_string(p.method).c_str());
    for (double m : p.mean) std::printf(" %.5f", m);
    std::printf("%s\n", !p.asserted ? "  (no claim)" : p.strict ? "" : "  NOT ORDERED");
  }
  std::printf("ordering %s\n", rep.ok() ? "holds" : "violated");
  if (!out.empty()) {
    const fs::path file(out);
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    write_tandem_csv(file, hops, grid, means);
    std::printf("wrote %s\n", out.c_str());
  }
  return rep.ok() ? 0 : 1;
}

int cmd_verify(std::vector<std::string> suites, const std::string& triangle, std::int64_t slots,
               std::uint64_t seed) {
  const std::vector<std::string> all = {"oracle", "tandem", "tokens", "netrate", "triangle"};
  if (suites.empty() || (suites.size() == 1 && suites[0] == "all")) suites = all;
  std::vector<CheckResult> results;
  for (const std::string& s : suites) {
    if (s == "oracle") {
      const std::vector<double> as = {0.1, 0.3, 0.5, 0.7, 0.9};
      const std::vector<int> hops = {2, 3};
      results.push_back(check_oracle_single_hop(as));
      results.push_back(check_oracle_monotone(hops, open_grid(0.0, 1.0, 19)));
    } else if (s == "tandem") {
      const std::vector<int> hops = {1, 2, 3};
      const std::vector<double> as = {0.3, 0.6, 0.9};
      results.push_back(check_oracle_agreement(hops, as, slots, 20, 3.0, seed));
      const std::vector<int> long_hops = {4, 6, 8};
      results.push_back(check_tandem_envelope(long_hops, as, slots, seed));
    } else if (s == "tokens") {
      TokenInstanceSpec spec;
      spec.seed = seed;
      results.push_back(check_token_region(spec));
    } else if (s == "netrate") {
      results.push_back(check_netrate_mapping(build_grid(4, 1.0), 1000, seed));
    } else if (s == "triangle") {
      if (triangle.empty()) throw ConfigError("suite triangle needs --scenario");
      const std::vector<std::pair<NodeId, NodeId>> chain = {{1, 2}, {2, 3}};
      results.push_back(check_final_subgraph(load_scenario(triangle), chain));
    } else {
      throw ConfigError("unknown suite '" + s + "'");
    }
  }
  int failed = 0;
  for (const CheckResult& r : results) {
    std::printf("%-5s %-28s %s (%.2f s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
    if (!r.passed) ++failed;
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delay-aware cross-layer network control simulator"};
  app.require_subcommand(1);

  std::string scenario, out, format = "csv";
  Overrides o;
  std::int64_t slots_in = 0;
  std::uint64_t seed_in = 0;
  bool parallel = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--policy", o.policy, "dtbp | min-resource | cross-layer");
    sub->add_option("--slots", slots_in, "override slot count");
    sub->add_option("--seed", seed_in, "override seed");
    sub->add_option("--out", out, "output directory");
  };

  auto* run = app.add_subcommand("run", "simulate one scenario");
  common(run);
  run->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  run->add_flag("--parallel", parallel, "OpenMP slot kernels");

  std::vector<double> ks = {50, 100, 200, 400};
  auto* sweep = app.add_subcommand("sweep-k", "mean delay against K for DTBP and cross-layer");
  common(sweep);
  sweep->add_option("--K", ks, "K values");

  int hops = 3, grid = 19;
  std::int64_t sim_slots = 1'000'000;
  std::string csv;
  auto* oracle = app.add_subcommand("oracle", "tandem mean queue lengths over an arrival grid");
  oracle->add_option("--hops", hops, "tandem length")->check(CLI::PositiveNumber);
  oracle->add_option("--grid", grid, "interior grid points in (0, 1)")->check(CLI::PositiveNumber);
  oracle->add_option("--sim-slots", sim_slots, "slots per simulated point");
  oracle->add_option("--seed", seed_in, "simulation seed");
  oracle->add_option("--out", csv, "CSV file");

  std::vector<std::string> suites;
  std::int64_t verify_slots = 1'000'000;
  auto* verify = app.add_subcommand("verify", "invariant suites");
  verify->add_option("--suite", suites, "oracle tandem tokens netrate triangle, or all");
  verify->add_option("--scenario", scenario, "triangle scenario JSON");
  verify->add_option("--slots", verify_slots, "slots per tandem simulation");
  verify->add_option("--seed", seed_in, "seed");

  CLI11_PARSE(app, argc, argv);
  if (slots_in > 0) o.slots = slots_in;
  if (seed_in > 0) o.seed = seed_in;

  try {
    if (*run) return cmd_run(scenario, o, out, format, parallel);
    if (*sweep) return cmd_sweep(scenario, o, ks, out);
    if (*oracle) return cmd_oracle(hops, grid, sim_slots, seed_in > 0 ? seed_in : 1, csv);
    if (*verify) return cmd_verify(suites, scenario, verify_slots, seed_in > 0 ? seed_in : 1);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
