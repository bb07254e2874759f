// Acceptance suite: one PASS/FAIL line per criterion.
//
// Criteria listed with --expect-fail still print FAIL but do not fail the
// process; an unexpected pass prints XPASS.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dacl/harness.hpp"
#include "dacl/verify.hpp"

using namespace dacl;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string id;
  double limit_seconds;  // 0: no runtime bound
  std::function<CheckResult()> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ScenarioConfig with(ScenarioConfig cfg, PolicyKind kind, std::uint64_t seed) {
  cfg.policy.kind = kind;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string dir = DACL_SCENARIO_DIR;
  std::vector<std::string> expect_fail, only;
  app.add_option("--scenarios", dir, "scenario directory");
  app.add_option("--expect-fail", expect_fail, "criteria allowed to fail");
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);

  const ScenarioConfig s1 = load_scenario(fs::path(dir) / "scenario1.json");
  const ScenarioConfig s2 = load_scenario(fs::path(dir) / "scenario2.json");
  const ScenarioConfig tri = load_scenario(fs::path(dir) / "triangle.json");

  // Shared scenario runs, computed on first use.
  std::vector<std::vector<RunRecord>> s1_by_seed, s2_by_seed;
  double s1_seconds = 0.0, s2_seconds = 0.0;
  auto scenario1 = [&]() -> const std::vector<std::vector<RunRecord>>& {
    if (s1_by_seed.empty()) {
      std::vector<ScenarioConfig> cfgs;
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (PolicyKind k : {PolicyKind::CrossLayer, PolicyKind::MinResource, PolicyKind::Dtbp}) {
          cfgs.push_back(with(s1, k, seed));
        }
      }
      const auto t0 = std::chrono::steady_clock::now();
      const auto runs = run_batch(cfgs);
      s1_seconds = seconds_since(t0);
      for (std::size_t i = 0; i < runs.size(); i += 3) s1_by_seed.push_back({runs[i], runs[i + 1], runs[i + 2]});
    }
    return s1_by_seed;
  };
  auto scenario2 = [&]() -> const std::vector<std::vector<RunRecord>>& {
    if (s2_by_seed.empty()) {
      std::vector<ScenarioConfig> cfgs;
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (PolicyKind k : {PolicyKind::CrossLayer, PolicyKind::Dtbp}) cfgs.push_back(with(s2, k, seed));
      }
      const auto t0 = std::chrono::steady_clock::now();
      const auto runs = run_batch(cfgs);
      s2_seconds = seconds_since(t0);
      for (std::size_t i = 0; i < runs.size(); i += 2) s2_by_seed.push_back({runs[i], runs[i + 1]});
    }
    return s2_by_seed;
  };

  const std::vector<double> five = {0.1, 0.3, 0.5, 0.7, 0.9};
  const std::vector<double> three = {0.3, 0.6, 0.9};
  const std::vector<double> upper = {0.55, 0.75, 0.95};

  std::vector<Criterion> criteria = {
      {"oracle-single-hop", 1.0, [&] { return check_oracle_single_hop(five, 1e-10); }},
      {"oracle-ordering", 10.0,
       [&] {
         const std::vector<int> hops = {2, 3};
         return check_oracle_monotone(hops, open_grid(0.0, 1.0, 19));
       }},
      {"oracle-simulation-agreement", 60.0,
       [&] {
         const std::vector<int> hops = {1, 2, 3};
         return check_oracle_agreement(hops, three, 1'000'000, 20, 3.0);
       }},
      {"tandem-envelope", 0.0,
       [&] {
         const std::vector<int> hops = {1, 2, 3, 4, 5, 6, 7, 8};
         const std::vector<double> as = {0.05, 0.25, 0.5, 0.75, 0.95};
         return check_tandem_envelope(hops, as, 1'000'000);
       }},
      {"tandem-ordering-simulated", 0.0,
       [&] {
         const std::vector<int> hops = {5, 8};
         return check_tandem_ordering(hops, upper, 1'000'000, 3.0);
       }},
      {"token-region", 60.0, [&] { return check_token_region(TokenInstanceSpec{}); }},
      {"netrate-mapping", 30.0,
       [&] {
         const auto a = check_netrate_mapping(build_grid(4, 1.0), 1000, 11);
         const auto b = check_netrate_mapping(build_tandem(5, 1.0), 1000, 12);
         CheckResult r{"net-rate mapping", a.passed && b.passed, a.detail + "; " + b.detail, a.seconds + b.seconds};
         return r;
       }},
      {"loop-freedom", 120.0,
       [&] {
         const std::vector<std::pair<NodeId, NodeId>> chain = {{1, 2}, {2, 3}};
         const auto t = check_final_subgraph(tri, chain);
         std::vector<RunRecord> cl;
         for (const auto& runs : scenario1()) cl.push_back(runs[0]);
         const auto g = check_loop_free_runs(cl, 35);
         return CheckResult{"loop freedom", t.passed && g.passed, "triangle " + t.detail + "; grid " + g.detail,
                            t.seconds + s1_seconds};
       }},
      {"backpressure-looping", 0.0,
       [&] {
         auto r = check_looping(scenario1().front()[2], 35);
         r.seconds = s1_seconds;
         return r;
       }},
      {"delay-ordering", 0.0,
       [&] {
         const auto a = check_delay_ranking(scenario1(), false);
         const auto b = check_delay_ranking(scenario2(), true);
         return CheckResult{"delay ordering", a.passed && b.passed, "scenario 1 " + a.detail + " || scenario 2 " + b.detail,
                            s1_seconds + s2_seconds};
       }},
      {"k-sensitivity", 600.0,
       [&] {
         const auto t0 = std::chrono::steady_clock::now();
         const std::vector<double> ks = {50, 100, 200, 400};
         auto r = check_k_sensitivity(sweep_k(s1, ks));
         r.seconds = seconds_since(t0);
         return r;
       }},
      {"stability", 0.0,
       [&] {
         std::vector<RunRecord> cl;
         for (std::size_t i = 0; i < 3; ++i) cl.push_back(scenario2()[i][0]);
         auto r = check_stability(cl);
         r.seconds = s2_seconds;
         return r;
       }},
      {"token-accounting", 0.0,
       [&] {
         std::vector<RunRecord> cl;
         for (const auto& runs : scenario1()) cl.push_back(runs[0]);
         for (const auto& runs : scenario2()) cl.push_back(runs[0]);
         auto r = check_token_accounting(cl, 1e-9);
         r.seconds = s1_seconds + s2_seconds;
         return r;
       }},
  };

  const std::set<std::string> allowed(expect_fail.begin(), expect_fail.end());
  const std::set<std::string> selected(only.begin(), only.end());
  int unexpected = 0, passed = 0, total = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    ++total;
    CheckResult r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    bool ok = r.passed;
    std::string note;
    if (ok && c.limit_seconds > 0.0 && r.seconds > c.limit_seconds) {
      ok = false;
      note = " [over the " + std::to_string(static_cast<int>(c.limit_seconds)) + " s limit]";
    }
    const bool expected_failure = allowed.count(c.id) > 0;
    const char* tag = ok ? (expected_failure ? "XPASS" : "PASS") : "FAIL";
    std::printf("%-5s %-28s %s (%.2f s)%s%s\n", tag, c.id.c_str(), r.detail.c_str(), r.seconds, note.c_str(),
                !ok && expected_failure ? " [expected]" : "");
    std::fflush(stdout);
    if (ok) ++passed;
    if (!ok && !expected_failure) ++unexpected;
  }
  std::printf("%d/%d criteria passed, %d unexpected failures\n", passed, total, unexpected);
  return unexpected == 0 ? 0 : 1;
}
