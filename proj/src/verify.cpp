#include "dacl/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dacl/crosslayer.hpp"
#include "dacl/da_routing.hpp"
#include "dacl/da_scheduler.hpp"
#include "dacl/tandem_oracle.hpp"

namespace dacl {

namespace {

template <class F>
CheckResult timed(std::string name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r = body();
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// Parallel map with exceptions carried back to the caller.
template <class T, class F>
std::vector<T> parallel_map(int n, F&& f) {
  std::vector<T> out(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = f(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

struct TandemCase {
  int hops;
  double a;
};

std::vector<TandemCase> cases(std::span<const int> hops, std::span<const double> as) {
  std::vector<TandemCase> c;
  for (int n : hops) {
    for (double a : as) c.push_back({n, a});
  }
  return c;
}

std::vector<TandemSimResult> simulate_all(const std::vector<TandemCase>& cs, std::int64_t slots, int batches,
                                          std::uint64_t seed) {
  return parallel_map<TandemSimResult>(static_cast<int>(cs.size()), [&](int i) {
    const TandemCase& c = cs[static_cast<std::size_t>(i)];
    return simulate_tandem(c.hops, c.a, slots, seed + static_cast<std::uint64_t>(i), batches);
  });
}

}  // namespace

std::vector<double> open_grid(double lo, double hi, int k) {
  if (k < 1 || !(hi > lo)) throw std::invalid_argument("grid needs k >= 1 and hi > lo");
  std::vector<double> g;
  const double step = (hi - lo) / (k + 1);
  for (int i = 1; i <= k; ++i) g.push_back(lo + step * i);
  return g;
}

// ---------------------------------------------------------------------------
// Tandem

CheckResult check_oracle_single_hop(std::span<const double> as, double tol) {
  return timed("tandem oracle, one hop", [&] {
    CheckResult r;
    double worst = 0.0;
    for (double a : as) worst = std::max(worst, std::abs(tandem_means(1, a).front() - a));
    r.passed = worst <= tol;
    r.detail = "max |P1 - a| = " + fmt(worst, 3) + " over " + std::to_string(as.size()) + " rates";
    return r;
  });
}

CheckResult check_oracle_monotone(std::span<const int> hops, std::span<const double> grid) {
  return timed("tandem oracle, strict ordering", [&] {
    CheckResult r;
    r.passed = true;
    std::size_t points = 0;
    std::string failures;
    for (int n : hops) {
      const MonotoneReport rep = verify_monotone(n, grid);
      for (const MonotonePoint& p : rep.points) {
        ++points;
        if (p.asserted && !p.strict) {
          r.passed = false;
          failures += " n=" + std::to_string(n) + ",a=" + fmt(p.a);
        }
      }
    }
    r.detail = std::to_string(points) + " grid points" + (failures.empty() ? ", all strict" : "; not strict:" + failures);
    return r;
  });
}

CheckResult check_oracle_agreement(std::span<const int> hops, std::span<const double> as, std::int64_t slots,
                                   int batches, double sigmas, std::uint64_t seed) {
  return timed("oracle vs simulation", [&] {
    CheckResult r;
    const auto cs = cases(hops, as);
    const auto sims = simulate_all(cs, slots, batches, seed);
    double worst = 0.0;
    std::string where;
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const auto oracle = tandem_means(cs[k].hops, cs[k].a);
      for (std::size_t i = 0; i < oracle.size(); ++i) {
        const double z = std::abs(sims[k].mean[i] - oracle[i]) / sims[k].std_error[i];
        if (z > worst) {
          worst = z;
          where = "n=" + std::to_string(cs[k].hops) + ",a=" + fmt(cs[k].a) + ",P" + std::to_string(i + 1);
        }
      }
    }
    r.passed = worst <= sigmas;
    r.detail = std::to_string(cs.size()) + " runs of " + std::to_string(slots) + " slots; largest gap " + fmt(worst, 3) +
               " SE at " + where;
    return r;
  });
}

CheckResult check_tandem_envelope(std::span<const int> hops, std::span<const double> as, std::int64_t slots,
                                  std::uint64_t seed) {
  return timed("tandem neighbor envelope", [&] {
    CheckResult r;
    const auto cs = cases(hops, as);
    const auto sims = simulate_all(cs, slots, 20, seed);
    std::int64_t bad = 0;
    int gap = 0;
    for (const auto& s : sims) {
      bad += s.envelope_violations;
      gap = std::max(gap, s.max_gap);
    }
    r.passed = bad == 0;
    r.detail = std::to_string(cs.size()) + " runs of " + std::to_string(slots) + " slots; violations " +
               std::to_string(bad) + ", largest neighbor gap " + std::to_string(gap);
    return r;
  });
}

CheckResult check_tandem_ordering(std::span<const int> hops, std::span<const double> as, std::int64_t slots,
                                  double sigmas, std::uint64_t seed) {
  return timed("tandem queue ordering", [&] {
    CheckResult r;
    const auto cs = cases(hops, as);
    const auto sims = simulate_all(cs, slots, 20, seed);
    r.passed = true;
    double tightest = std::numeric_limits<double>::infinity();
    std::string failures;
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const auto& s = sims[k];
      double lower = 0.0;  // P_0 = 0 exactly
      for (std::size_t i = 0; i < s.mean.size(); ++i) {
        const double lo = s.mean[i] - sigmas * s.std_error[i];
        tightest = std::min(tightest, lo - lower);
        if (!(lo > lower)) {
          r.passed = false;
          failures += " n=" + std::to_string(cs[k].hops) + ",a=" + fmt(cs[k].a) + ",P" + std::to_string(i + 1);
        }
        lower = s.mean[i] + sigmas * s.std_error[i];
      }
    }
    r.detail = std::to_string(cs.size()) + " runs; smallest band separation " + fmt(tightest, 3) +
               (failures.empty() ? "" : "; overlaps:" + failures);
    return r;
  });
}

// ---------------------------------------------------------------------------
// Token process

CheckResult check_token_region(const TokenInstanceSpec& spec) {
  return timed("token invariant region", [&] {
    struct Outcome {
      bool ok = true;
      std::int64_t entry = 0;
      double bound = 0.0;
    };
    const auto out = parallel_map<Outcome>(spec.instances, [&](int i) {
      std::mt19937_64 gen(spec.seed * 1000003ULL + static_cast<std::uint64_t>(i));
      std::uniform_int_distribution<int> count(1, spec.max_counters);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const int n = count(gen);
      std::vector<double> nu(static_cast<std::size_t>(n)), m0(static_cast<std::size_t>(n));
      double raw = 0.0;
      for (double& v : nu) raw += (v = 0.01 + unit(gen));
      const double total = (0.02 + 0.97 * unit(gen)) * spec.c_th;
      for (double& v : nu) v *= total / raw;
      for (double& v : m0) v = unit(gen) * spec.max_start * spec.c_th;
      const TokenProcessResult res = token_process_run(nu, spec.c_th, m0, spec.horizon);
      Outcome o;
      o.entry = res.entry_slot;
      o.bound = res.entry_bound;
      o.ok = res.entry_slot >= 0 && static_cast<double>(res.entry_slot) <= res.entry_bound && res.exits_after_entry == 0;
      return o;
    });
    CheckResult r;
    const auto failures = std::count_if(out.begin(), out.end(), [](const Outcome& o) { return !o.ok; });
    std::int64_t latest = 0;
    for (const auto& o : out) latest = std::max(latest, o.entry);
    r.passed = failures == 0;
    r.detail = std::to_string(spec.instances) + " instances, horizon " + std::to_string(spec.horizon) + "; failures " +
               std::to_string(failures) + ", latest entry slot " + std::to_string(latest);
    return r;
  });
}

// ---------------------------------------------------------------------------
// Net-rate mapping

std::vector<Commodity> random_commodities(const NetworkGraph& graph, std::uint64_t seed, int max_commodities) {
  const int N = graph.node_count();
  if (N < 2) throw std::invalid_argument("need at least two nodes");
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> node(0, N - 1);
  const int D = std::uniform_int_distribution<int>(1, std::min(max_commodities, N - 1))(gen);
  std::set<NodeId> dests;
  while (static_cast<int>(dests.size()) < D) dests.insert(node(gen));
  std::vector<Commodity> cs;
  for (NodeId dst : dests) {
    Commodity c;
    c.id = static_cast<CommodityId>(cs.size());
    c.destination = dst;
    const int S = std::uniform_int_distribution<int>(1, std::min(2, N - 1))(gen);
    std::set<NodeId> srcs;
    while (static_cast<int>(srcs.size()) < S) {
      const NodeId s = node(gen);
      if (s != dst) srcs.insert(s);
    }
    for (NodeId s : srcs) c.sources.push_back(Source{s, UtilitySpec{}, std::nullopt});
    cs.push_back(std::move(c));
  }
  return cs;
}

RatePoint random_feasible_point(const NetworkGraph& graph, std::span<const Commodity> commodities,
                                std::uint64_t seed, int walks) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RatePoint p = RatePoint::zeros(graph, static_cast<int>(commodities.size()));
  std::vector<double> residual(static_cast<std::size_t>(graph.link_count()));
  for (LinkId l = 0; l < graph.link_count(); ++l) residual[static_cast<std::size_t>(l)] = graph.capacity(l);

  std::vector<std::pair<CommodityId, NodeId>> starts;
  for (const Commodity& c : commodities) {
    for (const Source& s : c.sources) starts.emplace_back(c.id, s.node);
  }
  const int first = static_cast<int>(starts.size());
  const int total = first + walks;
  for (int w = 0; w < total; ++w) {
    const auto [d, src] = w < first ? starts[static_cast<std::size_t>(w)]
                                    : starts[std::uniform_int_distribution<std::size_t>(0, starts.size() - 1)(gen)];
    const NodeId dst = commodities[static_cast<std::size_t>(d)].destination;
    // Random walk, loops allowed, capped in length.
    std::vector<ArcId> path;
    NodeId at = src;
    const int cap = 4 * graph.node_count();
    while (at != dst && static_cast<int>(path.size()) < cap) {
      const auto outs = graph.out_arcs(at);
      const ArcId a = outs[std::uniform_int_distribution<std::size_t>(0, outs.size() - 1)(gen)];
      path.push_back(a);
      at = graph.arc(a).to;
    }
    if (at != dst) {
      // Finish along a shortest path.
      std::vector<ArcId> via(static_cast<std::size_t>(graph.node_count()), -1);
      std::vector<NodeId> frontier = {at};
      std::vector<char> seen(static_cast<std::size_t>(graph.node_count()), 0);
      seen[static_cast<std::size_t>(at)] = 1;
      for (std::size_t k = 0; k < frontier.size(); ++k) {
        for (ArcId a : graph.out_arcs(frontier[k])) {
          const NodeId to = graph.arc(a).to;
          if (seen[static_cast<std::size_t>(to)]) continue;
          seen[static_cast<std::size_t>(to)] = 1;
          via[static_cast<std::size_t>(to)] = a;
          frontier.push_back(to);
        }
      }
      if (!seen[static_cast<std::size_t>(dst)]) continue;
      std::vector<ArcId> tail;
      for (NodeId v = dst; v != at; v = graph.arc(via[static_cast<std::size_t>(v)]).from) {
        tail.push_back(via[static_cast<std::size_t>(v)]);
      }
      path.insert(path.end(), tail.rbegin(), tail.rend());
    }
    std::map<LinkId, int> uses;
    for (ArcId a : path) ++uses[NetworkGraph::link_of(a)];
    double room = std::numeric_limits<double>::infinity();
    for (const auto& [l, k] : uses) room = std::min(room, residual[static_cast<std::size_t>(l)] / k);
    // Early walks take a small slice so every source keeps a positive rate.
    const double f = room * (w < first ? 0.5 / total : 0.1 + 0.8 * unit(gen));
    if (!(f > 0.0)) continue;
    for (ArcId a : path) p.rate(d, a) += f;
    for (const auto& [l, k] : uses) residual[static_cast<std::size_t>(l)] -= f * k;
    p.exo(d, src) += f;
  }
  return p;
}

CheckResult check_netrate_mapping(const NetworkGraph& graph, int instances, std::uint64_t seed, double tol) {
  return timed("net-rate mapping", [&] {
    struct Outcome {
      bool feasible = true, objective = true, one_sided = true, identity = true, input_ok = true;
    };
    const auto out = parallel_map<Outcome>(instances, [&](int i) {
      const std::uint64_t s = seed * 7919ULL + static_cast<std::uint64_t>(i);
      const auto cs = random_commodities(graph, s);
      const RatePoint p = random_feasible_point(graph, cs, s ^ 0x5bd1e995ULL);
      Outcome o;
      o.input_ok = check_feasible(graph, cs, p, tol).feasible;
      const RatePoint m = map_rate_point(p);
      o.feasible = check_feasible(graph, cs, m, tol).feasible;
      o.objective = objective_value(cs, m) == objective_value(cs, p);
      for (int d = 0; d < p.commodities; ++d) {
        for (ArcId a = 0; a < p.arcs; a += 2) {
          if (std::min(m.rate(d, a), m.rate(d, a + 1)) != 0.0) o.one_sided = false;
          if (m.rate(d, a) - m.rate(d, a + 1) != p.rate(d, a) - p.rate(d, a + 1)) o.identity = false;
        }
      }
      return o;
    });
    auto count = [&](bool Outcome::*field) {
      return std::count_if(out.begin(), out.end(), [&](const Outcome& o) { return !(o.*field); });
    };
    CheckResult r;
    const auto bad_in = count(&Outcome::input_ok), bad_f = count(&Outcome::feasible), bad_o = count(&Outcome::objective),
               bad_s = count(&Outcome::one_sided), bad_i = count(&Outcome::identity);
    r.passed = bad_in + bad_f + bad_o + bad_s + bad_i == 0;
    r.detail = std::to_string(instances) + " points on " + std::to_string(graph.node_count()) +
               " nodes; failures: input " + std::to_string(bad_in) + ", feasibility " + std::to_string(bad_f) +
               ", objective " + std::to_string(bad_o) + ", one-sided " + std::to_string(bad_s) + ", identity " +
               std::to_string(bad_i);
    return r;
  });
}

// ---------------------------------------------------------------------------
// Scenarios

std::vector<RunRecord> run_batch(std::span<const ScenarioConfig> configs) {
  return parallel_map<RunRecord>(static_cast<int>(configs.size()),
                                 [&](int i) { return run_scenario(configs[static_cast<std::size_t>(i)]); });
}

CheckResult check_final_subgraph(const ScenarioConfig& cfg, std::span<const std::pair<NodeId, NodeId>> expected) {
  return timed("final subgraph", [&] {
    CrossLayerEngine engine(build_network(cfg), build_commodities(cfg), crosslayer_config(cfg));
    for (std::int64_t t = 0; t < cfg.slots; ++t) engine.step();
    const std::set<std::pair<NodeId, NodeId>> want(expected.begin(), expected.end());
    CheckResult r;
    r.passed = !engine.subgraphs().empty();
    std::string edges;
    for (std::size_t d = 0; d < engine.subgraphs().size(); ++d) {
      std::set<std::pair<NodeId, NodeId>> got;
      for (const SubgraphEdge& e : engine.subgraphs()[d].edges) {
        got.emplace(e.from, e.to);
        edges += " " + std::to_string(e.from) + "->" + std::to_string(e.to);
      }
      r.passed = r.passed && engine.certificates()[d].acyclic && got == want;
    }
    r.detail = "edges:" + (edges.empty() ? std::string(" none") : edges);
    return r;
  });
}

CheckResult check_loop_free_runs(std::span<const RunRecord> runs, std::int64_t max_hops) {
  CheckResult r;
  r.name = "cross-layer loop freedom";
  std::int64_t cyclic = 0, hops = 0;
  for (const RunRecord& run : runs) {
    cyclic += run.diagnostics.cyclic_after_warmup;
    hops = std::max(hops, run.diagnostics.max_hops);
  }
  r.passed = !runs.empty() && cyclic == 0 && hops <= max_hops;
  r.detail = std::to_string(runs.size()) + " runs; cyclic snapshots after warm-up " + std::to_string(cyclic) +
             ", max hops " + std::to_string(hops);
  return r;
}

CheckResult check_looping(const RunRecord& run, std::int64_t hops) {
  CheckResult r;
  r.name = "back-pressure looping";
  const double f = run.fraction_hops_above(hops);
  r.passed = f > 0.0;
  r.detail = "fraction above " + std::to_string(hops) + " hops " + fmt(f) + ", max hops " +
             std::to_string(run.diagnostics.max_hops);
  return r;
}

CheckResult check_delay_ranking(std::span<const std::vector<RunRecord>> by_seed, bool variance) {
  CheckResult r;
  r.name = variance ? "delay mean and variance ranking" : "delay ranking";
  r.passed = !by_seed.empty();
  std::string detail;
  for (const auto& runs : by_seed) {
    if (runs.empty()) continue;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(runs.front().seed) + ":";
    for (std::size_t k = 0; k < runs.size(); ++k) {
      detail += " " + runs[k].policy + " " + fmt(runs[k].mean_delay());
      if (variance) detail += "/" + fmt(runs[k].delay_variance());
      if (k + 1 < runs.size()) {
        bool ok = runs[k].mean_delay() < runs[k + 1].mean_delay();
        if (variance) ok = ok && runs[k].delay_variance() < runs[k + 1].delay_variance();
        r.passed = r.passed && ok;
        detail += ok ? " <" : " !<";
      }
    }
  }
  r.detail = detail;
  return r;
}

CheckResult check_k_sensitivity(std::span<const KSweepRow> rows, const KSensitivityLimits& limits) {
  CheckResult r;
  r.name = "K sensitivity";
  std::map<std::string, std::vector<std::pair<double, double>>> by;
  for (const KSweepRow& row : rows) by[row.policy].emplace_back(row.K, row.mean_delay);
  auto ratio = [](const std::vector<std::pair<double, double>>& v) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& [k, m] : v) {
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    return hi / lo;
  };
  auto& bp = by[to_string(PolicyKind::Dtbp)];
  auto& cl = by[to_string(PolicyKind::CrossLayer)];
  std::sort(bp.begin(), bp.end());
  std::sort(cl.begin(), cl.end());
  bool increasing = bp.size() >= 2;
  for (std::size_t i = 1; i < bp.size(); ++i) increasing = increasing && bp[i].second > bp[i - 1].second;
  const double rb = bp.empty() ? 0.0 : ratio(bp), rc = cl.empty() ? 0.0 : ratio(cl);
  r.passed = increasing && !cl.empty() && rc < limits.crosslayer_max_ratio && rb > limits.dtbp_min_ratio;
  std::string series;
  for (const auto& [k, m] : bp) series += " " + fmt(k) + ":" + fmt(m);
  series += " |";
  for (const auto& [k, m] : cl) series += " " + fmt(k) + ":" + fmt(m);
  r.detail = std::string("dtbp ") + (increasing ? "increasing" : "not increasing") + ", ratio " + fmt(rb) +
             " (need > " + fmt(limits.dtbp_min_ratio) + "); cross-layer ratio " + fmt(rc) + " (need < " +
             fmt(limits.crosslayer_max_ratio) + ");" + series;
  return r;
}

CheckResult check_stability(std::span<const RunRecord> runs) {
  CheckResult r;
  r.name = "regulator queue stability";
  std::size_t queues = 0, unstable = 0;
  std::string worst;
  double worst_ratio = 0.0;
  for (const RunRecord& run : runs) {
    for (const QueueStat& q : run.queues) {
      if (q.window_means.empty()) continue;
      ++queues;
      if (!q.stable) {
        ++unstable;
        const double peak = *std::max_element(q.window_means.begin(), q.window_means.end());
        if (peak > worst_ratio) {
          worst_ratio = peak;
          worst = "seed " + std::to_string(run.seed) + " queue " + std::to_string(q.node) + "->" +
                  std::to_string(q.neighbor) + " d" + std::to_string(q.commodity) + " peak window " + fmt(peak) +
                  " final " + fmt(q.window_means.back());
        }
      }
    }
  }
  r.passed = !runs.empty() && unstable == 0;
  r.detail = std::to_string(runs.size()) + " runs, " + std::to_string(queues) + " queues; unstable " +
             std::to_string(unstable) + (worst.empty() ? "" : " (largest: " + worst + ")");
  return r;
}

CheckResult check_token_accounting(std::span<const RunRecord> runs, double tol) {
  CheckResult r;
  r.name = "token accounting";
  double err = 0.0;
  std::int64_t violations = 0;
  for (const RunRecord& run : runs) {
    err = std::max(err, run.diagnostics.max_token_error);
    violations += run.diagnostics.token_violations;
  }
  r.passed = !runs.empty() && err <= tol && violations == 0;
  r.detail = std::to_string(runs.size()) + " runs; max conservation error " + fmt(err, 3) +
             ", region violations after warm-up " + std::to_string(violations);
  return r;
}

}  // namespace dacl
