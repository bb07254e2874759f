#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dacl/harness.hpp"

namespace dacl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Evenly spaced interior grid: k points strictly inside (lo, hi).
std::vector<double> open_grid(double lo, double hi, int k);

// Tandem suites. Simulations fan out over OpenMP threads.

/// |P_1 - a| <= tol for the one-hop chain.
CheckResult check_oracle_single_hop(std::span<const double> as, double tol = 1e-10);
/// Oracle means strictly increasing toward the source at every grid point.
CheckResult check_oracle_monotone(std::span<const int> hops, std::span<const double> grid);
/// Simulated means within `sigmas` standard errors of the oracle.
CheckResult check_oracle_agreement(std::span<const int> hops, std::span<const double> as, std::int64_t slots,
                                   int batches = 20, double sigmas = 3.0, std::uint64_t seed = 1);
/// Zero slots with |P_i - P_{i-1}| > 3 in every run.
CheckResult check_tandem_envelope(std::span<const int> hops, std::span<const double> as, std::int64_t slots,
                                  std::uint64_t seed = 1);
/// Simulated means strictly decreasing toward the destination with
/// disjoint sigma-bands.
CheckResult check_tandem_ordering(std::span<const int> hops, std::span<const double> as, std::int64_t slots,
                                  double sigmas = 3.0, std::uint64_t seed = 1);

// Token process.

struct TokenInstanceSpec {
  int instances = 1000;
  int max_counters = 8;
  double c_th = 1.0;
  double max_start = 100.0;  // components of M[0] drawn up to max_start * c_th
  std::int64_t horizon = 100'000;
  std::uint64_t seed = 1;
};
/// Entry into sum M < (n+1) c_th within the drift bound, and no exit.
CheckResult check_token_region(const TokenInstanceSpec& spec);

// Net-rate mapping.

/// Feasible point built by pushing flow along random walks to the
/// destinations, each walk scaled to fit residual capacity.
RatePoint random_feasible_point(const NetworkGraph& graph, std::span<const Commodity> commodities,
                                std::uint64_t seed, int walks = 12);
/// Random commodities with one or two sources each.
std::vector<Commodity> random_commodities(const NetworkGraph& graph, std::uint64_t seed, int max_commodities = 3);
/// Mapped points stay feasible, keep the objective, have one-sided rates
/// and preserve r_ij - r_ji exactly.
CheckResult check_netrate_mapping(const NetworkGraph& graph, int instances, std::uint64_t seed,
                                  double tol = kDefaultFeasibilityTolerance);

// Scenario suites.

/// Runs every config, in parallel across threads.
std::vector<RunRecord> run_batch(std::span<const ScenarioConfig> configs);

/// Cross-layer run of `cfg`; the final subgraph of every commodity must be
/// acyclic and consist of exactly `expected` (from, to) edges.
CheckResult check_final_subgraph(const ScenarioConfig& cfg, std::span<const std::pair<NodeId, NodeId>> expected);
/// No cyclic snapshot after warm-up and no delivered packet above max_hops.
CheckResult check_loop_free_runs(std::span<const RunRecord> runs, std::int64_t max_hops);
/// Some delivered packet travelled more than `hops` hops.
CheckResult check_looping(const RunRecord& run, std::int64_t hops);

/// Per seed, mean delay of runs[k] strictly below runs[k+1] (and variance
/// too when `variance` is set). `by_seed[s]` lists the runs in the order
/// they must rank.
CheckResult check_delay_ranking(std::span<const std::vector<RunRecord>> by_seed, bool variance);

struct KSensitivityLimits {
  double crosslayer_max_ratio = 1.5;
  double dtbp_min_ratio = 2.0;
};
CheckResult check_k_sensitivity(std::span<const KSweepRow> rows, const KSensitivityLimits& limits = {});

/// Every regulator queue of every run passes the stability verdict.
CheckResult check_stability(std::span<const RunRecord> runs);

/// Token conservation error within tol and no region violation after
/// warm-up in any run.
CheckResult check_token_accounting(std::span<const RunRecord> runs, double tol = 1e-9);

}  // namespace dacl
