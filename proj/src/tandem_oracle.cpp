#include "dacl/tandem_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "dacl/bp_engine.hpp"

namespace dacl {

TandemState tandem_step(const TandemState& p, int arrival) {
  const int n = static_cast<int>(p.size());
  auto at = [&](int i) { return i == 0 ? 0 : p[static_cast<std::size_t>(i - 1)]; };
  std::vector<int> out(static_cast<std::size_t>(n + 1), 0), in(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    // Link (i, i-1), unit capacity, one commodity.
    if (at(i) > at(i - 1)) {
      ++out[static_cast<std::size_t>(i)];
      ++in[static_cast<std::size_t>(i - 1)];
    } else if (at(i - 1) > at(i)) {
      ++out[static_cast<std::size_t>(i - 1)];
      ++in[static_cast<std::size_t>(i)];
    }
  }
  TandemState next(p.size());
  for (int i = 1; i <= n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    next[k - 1] = std::max(at(i) - out[k], 0) + in[k] + (i == n ? arrival : 0);
  }
  return next;
}

namespace {

struct StateHash {
  std::size_t operator()(const TandemState& s) const {
    std::size_t h = 1469598103934665603ULL;
    for (auto v : s) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ULL;
    return h;
  }
};

}  // namespace

TandemChain enumerate_chain(int hops, double a, std::size_t limit) {
  if (hops < 1) throw std::invalid_argument("tandem needs at least one hop");
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("admission probability must lie in (0, 1)");
  TandemChain c;
  c.hops = hops;
  c.a = a;
  std::unordered_map<TandemState, std::int64_t, StateHash> index;
  auto intern = [&](TandemState s) {
    auto [it, fresh] = index.emplace(s, static_cast<std::int64_t>(c.states.size()));
    if (fresh) {
      if (c.states.size() >= limit) {
        throw std::runtime_error("tandem chain exceeds " + std::to_string(limit) + " states (hops " +
                                 std::to_string(hops) + ")");
      }
      c.states.push_back(std::move(s));
    }
    return it->second;
  };
  intern(TandemState(static_cast<std::size_t>(hops), 0));
  for (std::size_t i = 0; i < c.states.size(); ++i) {
    const TandemState cur = c.states[i];
    const std::int64_t j0 = intern(tandem_step(cur, 0));
    const std::int64_t j1 = intern(tandem_step(cur, 1));
    if (j0 == j1) {
      c.rows.push_back({{j0, 1.0}});
    } else {
      c.rows.push_back({{j0, 1.0 - a}, {j1, a}});
    }
  }
  return c;
}

std::vector<std::vector<std::int64_t>> closed_classes(const TandemChain& chain) {
  // Iterative Tarjan.
  const auto n = static_cast<std::int64_t>(chain.size());
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0),
      comp(static_cast<std::size_t>(n), -1);
  std::vector<char> on_stack(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> stack;
  std::vector<std::vector<std::int64_t>> comps;
  std::int64_t counter = 0;
  std::vector<std::pair<std::int64_t, std::size_t>> call;
  for (std::int64_t root = 0; root < n; ++root) {
    if (idx[static_cast<std::size_t>(root)] >= 0) continue;
    call.emplace_back(root, 0);
    while (!call.empty()) {
      auto& [v, edge] = call.back();
      const auto vs = static_cast<std::size_t>(v);
      if (edge == 0 && idx[vs] < 0) {
        idx[vs] = low[vs] = counter++;
        stack.push_back(v);
        on_stack[vs] = 1;
      }
      const auto& row = chain.rows[vs];
      if (edge < row.size()) {
        const std::int64_t w = row[edge++].to;
        const auto ws = static_cast<std::size_t>(w);
        if (idx[ws] < 0) {
          call.emplace_back(w, 0);
        } else if (on_stack[ws]) {
          low[vs] = std::min(low[vs], idx[ws]);
        }
        continue;
      }
      if (low[vs] == idx[vs]) {
        std::vector<std::int64_t> members;
        std::int64_t w = -1;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = 0;
          comp[static_cast<std::size_t>(w)] = static_cast<std::int64_t>(comps.size());
          members.push_back(w);
        } while (w != v);
        comps.push_back(std::move(members));
      }
      const std::int64_t done = v;
      call.pop_back();
      if (!call.empty()) {
        const auto ps = static_cast<std::size_t>(call.back().first);
        low[ps] = std::min(low[ps], low[static_cast<std::size_t>(done)]);
      }
    }
  }
  std::vector<std::vector<std::int64_t>> closed;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    bool leaves = false;
    for (std::int64_t v : comps[k]) {
      for (const auto& t : chain.rows[static_cast<std::size_t>(v)]) {
        if (t.probability > 0.0 && comp[static_cast<std::size_t>(t.to)] != static_cast<std::int64_t>(k)) leaves = true;
      }
    }
    if (!leaves) {
      std::sort(comps[k].begin(), comps[k].end());
      closed.push_back(std::move(comps[k]));
    }
  }
  return closed;
}

void solve_stationary(TandemChain& chain) {
  auto classes = closed_classes(chain);
  if (classes.size() != 1) {
    std::string msg = "tandem chain has " + std::to_string(classes.size()) + " closed classes of sizes";
    for (const auto& c : classes) msg += " " + std::to_string(c.size());
    throw std::runtime_error(msg);
  }
  chain.recurrent = std::move(classes.front());
  const auto m = static_cast<Eigen::Index>(chain.recurrent.size());
  std::unordered_map<std::int64_t, Eigen::Index> local;
  for (Eigen::Index k = 0; k < m; ++k) local.emplace(chain.recurrent[static_cast<std::size_t>(k)], k);

  // (A^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index k = 0; k < m; ++k) {
    if (k != m - 1) trip.emplace_back(k, k, -1.0);
    for (const auto& t : chain.rows[static_cast<std::size_t>(chain.recurrent[static_cast<std::size_t>(k)])]) {
      const Eigen::Index j = local.at(t.to);
      if (j != m - 1) trip.emplace_back(j, k, t.probability);
    }
    trip.emplace_back(m - 1, k, 1.0);
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw std::runtime_error("stationary solve: factorization failed");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(m - 1) = 1.0;
  const Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw std::runtime_error("stationary solve: back substitution failed");

  chain.pi.assign(chain.size(), 0.0);
  double total = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) total += std::max(x(k), 0.0);
  for (Eigen::Index k = 0; k < m; ++k) {
    chain.pi[static_cast<std::size_t>(chain.recurrent[static_cast<std::size_t>(k)])] = std::max(x(k), 0.0) / total;
  }

  std::vector<double> next(chain.size(), 0.0);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    for (const auto& t : chain.rows[i]) next[static_cast<std::size_t>(t.to)] += chain.pi[i] * t.probability;
  }
  chain.residual = 0.0;
  for (std::size_t i = 0; i < chain.size(); ++i) chain.residual = std::max(chain.residual, std::abs(next[i] - chain.pi[i]));
}

std::vector<double> queue_means(const TandemChain& chain) {
  if (chain.pi.size() != chain.size()) throw std::logic_error("stationary law not solved");
  std::vector<double> mean(static_cast<std::size_t>(chain.hops), 0.0);
  for (std::size_t s = 0; s < chain.size(); ++s) {
    if (chain.pi[s] == 0.0) continue;
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += chain.pi[s] * chain.states[s][i];
  }
  return mean;
}

std::vector<double> tandem_means(int hops, double a) {
  TandemChain c = enumerate_chain(hops, a);
  solve_stationary(c);
  return queue_means(c);
}

TandemSimResult simulate_tandem(int hops, double a, std::int64_t slots, std::uint64_t seed, int batches) {
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("admission probability must lie in (0, 1)");
  if (batches < 2) throw std::invalid_argument("need at least two batches");
  if (slots < batches) throw std::invalid_argument("fewer slots than batches");
  Commodity c;
  c.id = 0;
  c.destination = 0;
  c.sources.push_back(Source{hops, UtilitySpec{}, a});
  PolicyConfig cfg;
  cfg.seed = seed;
  BpEngine engine(build_tandem(hops, 1.0), {c}, cfg);

  TandemSimResult r;
  r.hops = hops;
  r.a = a;
  r.slots = slots;
  const auto n = static_cast<std::size_t>(hops);
  const std::int64_t per = slots / batches;
  std::vector<std::vector<double>> batch(static_cast<std::size_t>(batches), std::vector<double>(n, 0.0));
  std::vector<double> sum(n, 0.0);
  for (std::int64_t t = 0; t < per * batches; ++t) {
    engine.step();
    const PriceTable& p = engine.state().prices;
    auto& b = batch[static_cast<std::size_t>(t / per)];
    bool bad = false;
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = p.at(static_cast<NodeId>(i + 1), 0);
      b[i] += v;
      const int gap = static_cast<int>(std::abs(v - prev));
      r.max_gap = std::max(r.max_gap, gap);
      if (gap > 3) bad = true;
      prev = v;
    }
    if (bad) ++r.envelope_violations;
  }
  r.slots = per * batches;
  r.mean.assign(n, 0.0);
  r.std_error.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (auto& b : batch) m += b[i] / static_cast<double>(per);
    m /= batches;
    double ss = 0.0;
    for (auto& b : batch) {
      const double d = b[i] / static_cast<double>(per) - m;
      ss += d * d;
    }
    r.mean[i] = m;
    r.std_error[i] = std::sqrt(ss / (batches - 1) / batches);
  }
  return r;
}

std::string to_string(MonotoneMethod method) {
  return method == MonotoneMethod::Oracle ? "oracle" : "simulation";
}

bool MonotoneReport::ok() const {
  return std::all_of(points.begin(), points.end(), [](const MonotonePoint& p) { return !p.asserted || p.strict; });
}

MonotoneReport verify_monotone(int hops, std::span<const double> grid, const MonotoneOptions& options) {
  MonotoneReport rep;
  rep.hops = hops;
  for (double a : grid) {
    MonotonePoint pt;
    pt.a = a;
    pt.asserted = hops <= 3 || (a > 0.5 && a < 1.0);
    bool done = false;
    if (hops <= 3 || pt.asserted) {
      try {
        TandemChain c = enumerate_chain(hops, a, options.oracle_limit);
        solve_stationary(c);
        pt.mean = queue_means(c);
        pt.method = MonotoneMethod::Oracle;
        pt.strict = pt.mean.front() > 0.0;
        for (std::size_t i = 1; i < pt.mean.size(); ++i) pt.strict = pt.strict && pt.mean[i] > pt.mean[i - 1];
        done = true;
      } catch (const std::runtime_error&) {
        if (hops <= 3) throw;
      }
    }
    if (!done && pt.asserted) {
      const TandemSimResult s = simulate_tandem(hops, a, options.sim_slots, options.seed);
      pt.method = MonotoneMethod::Simulation;
      pt.mean = s.mean;
      pt.std_error = s.std_error;
      pt.strict = s.envelope_violations == 0 && pt.mean.front() - options.sigmas * pt.std_error.front() > 0.0;
      for (std::size_t i = 1; i < pt.mean.size(); ++i) {
        pt.strict = pt.strict && pt.mean[i] - options.sigmas * pt.std_error[i] >
                                     pt.mean[i - 1] + options.sigmas * pt.std_error[i - 1];
      }
    }
    rep.points.push_back(std::move(pt));
  }
  return rep;
}

void write_tandem_csv(const std::filesystem::path& file, int hops, std::span<const double> grid,
                      std::span<const std::vector<double>> means) {
  if (grid.size() != means.size()) throw std::invalid_argument("grid and means differ in length");
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(17);
  out << "a";
  for (int i = 1; i <= hops; ++i) out << ",P" << i;
  out << "\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (static_cast<int>(means[k].size()) != hops) throw std::invalid_argument("row width differs from hops");
    out << grid[k];
    for (double v : means[k]) out << "," << v;
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

}  // namespace dacl
