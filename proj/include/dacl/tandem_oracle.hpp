#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dacl {

/// Price vector (P_1, ..., P_n) of a unit-capacity tandem; node 0 is the
/// destination and node n the source.
using TandemState = std::vector<std::int32_t>;

/// One slot of DTBP on the tandem, written independently of bp_slot:
/// grants from start-of-slot prices, then P' = (P - out)^+ + in + X.
TandemState tandem_step(const TandemState& p, int arrival);

struct TandemTransition {
  std::int64_t to = 0;
  double probability = 0.0;
};

struct TandemChain {
  int hops = 0;
  double a = 0.0;
  std::vector<TandemState> states;  // states[0] is the zero state
  // Row i lists the successors of state i; probabilities sum to 1.
  std::vector<std::vector<TandemTransition>> rows;
  std::vector<std::int64_t> recurrent;  // members of the closed class
  std::vector<double> pi;               // stationary law over `states`
  double residual = 0.0;                // max |pi A - pi|

  std::size_t size() const { return states.size(); }
};

inline constexpr std::size_t kTandemStateLimit = 1'000'000;

/// Breadth-first enumeration from the zero state. Throws invalid_argument
/// for hops < 1 or a outside (0, 1), and runtime_error past `limit` states.
TandemChain enumerate_chain(int hops, double a, std::size_t limit = kTandemStateLimit);

/// Strongly connected components with no edge leaving them.
std::vector<std::vector<std::int64_t>> closed_classes(const TandemChain& chain);

/// Fills pi and residual by a sparse LU solve on the unique closed class.
/// A reducible chain throws runtime_error listing the class sizes.
void solve_stationary(TandemChain& chain);

/// Stationary mean P_i for i = 1..n (index i-1).
std::vector<double> queue_means(const TandemChain& chain);

/// enumerate + solve + means.
std::vector<double> tandem_means(int hops, double a);

struct TandemSimResult {
  int hops = 0;
  double a = 0.0;
  std::int64_t slots = 0;
  std::vector<double> mean;       // per node 1..n
  std::vector<double> std_error;  // batch-means standard error
  std::int64_t envelope_violations = 0;  // slots with |P_i - P_{i-1}| > 3
  int max_gap = 0;
};

/// Long DTBP run of the tandem through the back-pressure engine with a
/// fixed Bernoulli(a) source. Batch means over `batches` equal batches.
TandemSimResult simulate_tandem(int hops, double a, std::int64_t slots, std::uint64_t seed, int batches = 20);

enum class MonotoneMethod { Oracle, Simulation };
std::string to_string(MonotoneMethod method);

struct MonotonePoint {
  double a = 0.0;
  MonotoneMethod method = MonotoneMethod::Oracle;
  bool asserted = true;  // false where no ordering is claimed
  bool strict = false;
  std::vector<double> mean;
  std::vector<double> std_error;  // empty for oracle points
};

struct MonotoneReport {
  int hops = 0;
  std::vector<MonotonePoint> points;
  bool ok() const;
};

struct MonotoneOptions {
  std::int64_t sim_slots = 1'000'000;
  std::uint64_t seed = 1;
  double sigmas = 3.0;
  std::size_t oracle_limit = 200'000;  // fall back to simulation above this
};

/// hops <= 3: oracle at every grid point. hops >= 4: only a in (1/2, 1) is
/// asserted, via the oracle when the chain fits under oracle_limit and by
/// simulation otherwise, where consecutive sigma-bands must not overlap.
MonotoneReport verify_monotone(int hops, std::span<const double> grid, const MonotoneOptions& options = {});

/// Header a,P1,...,Pn; one row per grid point.
void write_tandem_csv(const std::filesystem::path& file, int hops, std::span<const double> grid,
                      std::span<const std::vector<double>> means);

}  // namespace dacl
