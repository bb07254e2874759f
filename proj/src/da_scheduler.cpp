#include "dacl/da_scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dacl/errors.hpp"

namespace dacl {

RegulatorQueueBank::RegulatorQueueBank(const NetworkGraph& graph, int commodities)
    : nodes_(graph.node_count()), arcs_(graph.arc_count()), commodities_(commodities) {
  q_.resize(static_cast<std::size_t>(arcs_ * commodities_));
  hold_.resize(static_cast<std::size_t>(nodes_ * commodities_));
}

std::int64_t RegulatorQueueBank::queued() const {
  std::int64_t n = 0;
  for (const auto& q : q_) n += static_cast<std::int64_t>(q.size());
  return n;
}

std::int64_t RegulatorQueueBank::held() const {
  std::int64_t n = 0;
  for (const auto& q : hold_) n += static_cast<std::int64_t>(q.size());
  return n;
}

TokenBank::TokenBank(int arcs, int commodities) : arcs_(arcs), commodities_(commodities) {
  const auto n = static_cast<std::size_t>(arcs * commodities);
  m_.assign(n, 0.0);
  m0_.assign(n, 0.0);
  in_sum_.assign(n, 0.0);
  in_comp_.assign(n, 0.0);
  served_.assign(n, 0.0);
  served_comp_.assign(n, 0.0);
}

double TokenBank::link_total(LinkId l) const {
  double s = 0.0;
  const ArcId f = NetworkGraph::forward_arc(l);
  for (CommodityId d = 0; d < commodities_; ++d) s += m_[idx(d, f)] + m_[idx(d, f + 1)];
  return s;
}

namespace {

// Neumaier compensated summation step.
void neumaier(double& sum, double& comp, double x) {
  const double t = sum + x;
  if (std::abs(sum) >= std::abs(x)) {
    comp += (sum - t) + x;
  } else {
    comp += (x - t) + sum;
  }
  sum = t;
}

}  // namespace

void TokenBank::add(ArcId arc, CommodityId d, double amount) {
  const std::size_t i = idx(d, arc);
  m_[i] += amount;
  neumaier(in_sum_[i], in_comp_[i], amount);
}

void TokenBank::take(ArcId arc, CommodityId d, double amount) {
  const std::size_t i = idx(d, arc);
  m_[i] -= amount;
  neumaier(served_[i], served_comp_[i], amount);
}

double TokenBank::conservation_error(ArcId arc, CommodityId d) const {
  const std::size_t i = idx(d, arc);
  return std::abs((served_[i] + served_comp_[i]) - ((in_sum_[i] + in_comp_[i]) + m0_[i] - m_[i]));
}

double TokenBank::max_conservation_error() const {
  double e = 0.0;
  for (CommodityId d = 0; d < commodities_; ++d) {
    for (ArcId a = 0; a < arcs_; ++a) e = std::max(e, conservation_error(a, d));
  }
  return e;
}

void TokenRateTable::validate(const NetworkGraph& graph) const {
  if (!(delta > 0.0)) throw ConfigError("token surplus delta must be positive, got " + std::to_string(delta));
  if (arcs != graph.arc_count()) throw ConfigError("token rate table does not match the graph");
  for (double s : S) {
    if (s < 0.0 || !std::isfinite(s)) throw ConfigError("token rates must be finite and nonnegative");
  }
  for (LinkId l = 0; l < graph.link_count(); ++l) {
    double sum = 0.0;
    for (CommodityId d = 0; d < commodities; ++d) sum += at(d, 2 * l) + at(d, 2 * l + 1);
    if (sum >= graph.capacity(l)) {
      const Link& link = graph.link(l);
      throw ConfigError("token rates on link (" + std::to_string(link.a) + "," + std::to_string(link.b) + ") sum to " +
                        std::to_string(sum) + ", capacity " + std::to_string(link.capacity));
    }
  }
}

double delta_bound(double epsilon, int h_max, int commodities) {
  if (h_max < 1 || commodities < 1) return std::numeric_limits<double>::infinity();
  return epsilon / (static_cast<double>(h_max) * static_cast<double>(commodities));
}

RouteTable::RouteTable(const NetworkGraph& graph, std::span<const Commodity> commodities,
                       std::span<const CommoditySubgraph> subgraphs)
    : nodes_(graph.node_count()), commodities_(static_cast<int>(commodities.size())) {
  if (subgraphs.size() != commodities.size()) throw std::invalid_argument("one subgraph per commodity required");
  offset_.assign(static_cast<std::size_t>(nodes_ * commodities_ + 1), 0);
  std::vector<std::vector<Share>> rows(static_cast<std::size_t>(nodes_ * commodities_));
  for (const Commodity& c : commodities) {
    const CommoditySubgraph& sub = subgraphs[static_cast<std::size_t>(c.id)];
    for (const SubgraphEdge& e : sub.edges) {
      if (e.from == c.destination) continue;
      rows[static_cast<std::size_t>(c.id * nodes_ + e.from)].push_back({e.arc, e.rate});
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto& row = rows[r];
    std::sort(row.begin(), row.end(), [](const Share& x, const Share& y) { return x.arc < y.arc; });
    double total = 0.0;
    for (const Share& s : row) total += s.probability;
    double acc = 0.0;
    for (Share s : row) {
      s.probability = s.probability / total;
      acc += s.probability;
      shares_.push_back(s);
      cumulative_.push_back(acc);
    }
    offset_[r + 1] = static_cast<int>(shares_.size());
  }
}

std::span<const RouteTable::Share> RouteTable::row(NodeId n, CommodityId d) const {
  const auto r = static_cast<std::size_t>(d * nodes_ + n);
  return std::span<const Share>(shares_).subspan(static_cast<std::size_t>(offset_[r]),
                                                 static_cast<std::size_t>(offset_[r + 1] - offset_[r]));
}

ArcId RouteTable::pick(NodeId n, CommodityId d, double u) const {
  const auto r = static_cast<std::size_t>(d * nodes_ + n);
  const int lo = offset_[r], hi = offset_[r + 1];
  if (lo == hi) {
    throw RoutingHole("node " + std::to_string(n) + " has no route for commodity " + std::to_string(d));
  }
  for (int k = lo; k < hi - 1; ++k) {
    if (u < cumulative_[static_cast<std::size_t>(k)]) return shares_[static_cast<std::size_t>(k)].arc;
  }
  return shares_[static_cast<std::size_t>(hi - 1)].arc;
}

std::vector<ArcId> split_arrival(std::span<const PacketId> packets, NodeId n, CommodityId d, const RouteTable& routes,
                                 const CounterRng& rng, std::int64_t slot) {
  std::vector<ArcId> out;
  out.reserve(packets.size());
  for (PacketId p : packets) {
    const double u = rng.uniform(Stream::Split, static_cast<std::uint64_t>(slot), static_cast<std::uint64_t>(p));
    out.push_back(routes.pick(n, d, u));
  }
  return out;
}

DeficitSplitter::DeficitSplitter(const RouteTable& routes) : nodes_(routes.nodes()) {
  const int rows = routes.nodes() * routes.commodities();
  offset_.assign(static_cast<std::size_t>(rows + 1), 0);
  for (int r = 0; r < rows; ++r) {
    const auto row = routes.row(r % routes.nodes(), r / routes.nodes());
    offset_[static_cast<std::size_t>(r + 1)] = offset_[static_cast<std::size_t>(r)] + static_cast<int>(row.size());
  }
  credit_.assign(static_cast<std::size_t>(offset_.back()), 0.0);
}

ArcId DeficitSplitter::pick(const RouteTable& routes, NodeId n, CommodityId d) {
  const auto row = routes.row(n, d);
  if (row.empty()) {
    throw RoutingHole("node " + std::to_string(n) + " has no route for commodity " + std::to_string(d));
  }
  double* credit = credit_.data() + offset_[static_cast<std::size_t>(d * nodes_ + n)];
  std::size_t best = 0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    credit[k] += row[k].probability;
    if (credit[k] > credit[best]) best = k;
  }
  credit[best] -= 1.0;
  return row[best].arc;
}

ArrivalEstimator::ArrivalEstimator(int nodes, int commodities)
    : nodes_(nodes), commodities_(commodities), sum_(static_cast<std::size_t>(nodes * commodities), 0.0) {}

void ArrivalEstimator::observe(std::span<const double> arrivals) {
  if (arrivals.size() != sum_.size()) throw std::invalid_argument("arrival vector has the wrong size");
  for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += arrivals[i];
  ++samples_;
}

double ArrivalEstimator::mean(NodeId n, CommodityId d) const {
  if (samples_ == 0) return 0.0;
  return sum_[static_cast<std::size_t>(d * nodes_ + n)] / static_cast<double>(samples_);
}

std::vector<double> ArrivalEstimator::means() const {
  std::vector<double> m(sum_.size(), 0.0);
  if (samples_ == 0) return m;
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = sum_[i] / static_cast<double>(samples_);
  return m;
}

TokenRateTable token_rates(std::span<const double> expected, const RouteTable& routes, const NetworkGraph& graph,
                           double delta) {
  if (!(delta > 0.0)) throw ConfigError("token surplus delta must be positive, got " + std::to_string(delta));
  const int N = routes.nodes();
  const int D = routes.commodities();
  if (expected.size() != static_cast<std::size_t>(N * D)) {
    throw std::invalid_argument("expected-arrival vector has the wrong size");
  }
  TokenRateTable t;
  t.arcs = graph.arc_count();
  t.commodities = D;
  t.delta = delta;
  t.S.assign(static_cast<std::size_t>(t.arcs * D), 0.0);
  for (CommodityId d = 0; d < D; ++d) {
    for (NodeId n = 0; n < N; ++n) {
      const double ea = expected[static_cast<std::size_t>(d * N + n)];
      for (const auto& s : routes.row(n, d)) t.S[static_cast<std::size_t>(d * t.arcs + s.arc)] = ea * s.probability + delta;
    }
  }
  t.validate(graph);
  return t;
}

TokenRateTable token_rates(const ArrivalEstimator& estimator, const RouteTable& routes, const NetworkGraph& graph,
                           double delta) {
  const std::vector<double> m = estimator.means();
  return token_rates(m, routes, graph, delta);
}

std::vector<double> expected_arrivals_from_solution(const NetRateSnapshot& snapshot, const RouteTable& routes,
                                                    std::span<const AcyclicityCertificate> certificates,
                                                    const NetworkGraph& graph, double delta) {
  const int N = routes.nodes();
  const int D = routes.commodities();
  if (certificates.size() != static_cast<std::size_t>(D)) {
    throw std::invalid_argument("one certificate per commodity required");
  }
  std::vector<double> ea(static_cast<std::size_t>(N * D), 0.0);
  for (CommodityId d = 0; d < D; ++d) {
    const AcyclicityCertificate& cert = certificates[static_cast<std::size_t>(d)];
    if (!cert.acyclic) {
      throw std::invalid_argument("commodity " + std::to_string(d) + " subgraph has a cycle");
    }
    double* row = ea.data() + static_cast<std::ptrdiff_t>(d) * N;
    for (NodeId n = 0; n < N; ++n) row[n] = snapshot.admitted_rate(d, n);
    for (NodeId n : cert.order) {
      for (const auto& s : routes.row(n, d)) row[graph.arc(s.arc).to] += row[n] * s.probability + delta;
    }
  }
  return ea;
}

namespace {

void service_one(SchedulerState& state, const TokenRateTable& rates, const NetworkGraph& graph, LinkId l,
                 ServiceRecord& rec) {
  rec.link = l;
  rec.commodity = -1;
  rec.arc = -1;
  rec.packets.clear();
  rec.dummies = 0;

  const ArcId f = NetworkGraph::forward_arc(l);
  const ArcId r = f + 1;
  const int D = rates.commodities;
  TokenBank& tokens = state.tokens;
  for (CommodityId d = 0; d < D; ++d) {
    const double sf = rates.at(d, f);
    const double sr = rates.at(d, r);
    if (sf > 0.0) tokens.add(f, d, sf);
    if (sr > 0.0) tokens.add(r, d, sr);
  }

  const double c = graph.capacity(l);
  CommodityId win = -1;
  double best = 0.0;
  for (CommodityId d = 0; d < D; ++d) {
    const double excess = tokens.link_tokens(f, d) - c;
    if (excess > best) {
      best = excess;
      win = d;
    }
  }
  if (win < 0) return;

  const ArcId active = tokens.m(f, win) >= tokens.m(r, win) ? f : r;
  const ArcId other = NetworkGraph::reverse_arc(active);
  const double from_active = std::min(c, std::max(tokens.m(active, win), 0.0));
  tokens.take(active, win, from_active);
  if (from_active < c) tokens.take(other, win, c - from_active);

  rec.commodity = win;
  rec.arc = active;
  const int slots = static_cast<int>(std::floor(c + 1e-9));
  auto& q = state.queues.queue(active, win);
  while (static_cast<int>(rec.packets.size()) < slots && !q.empty()) {
    rec.packets.push_back(q.front());
    q.pop_front();
  }
  rec.dummies = slots - static_cast<int>(rec.packets.size());
}

}  // namespace

void service_links_serial(SchedulerState& state, const TokenRateTable& rates, const NetworkGraph& graph,
                          std::span<ServiceRecord> out) {
  for (LinkId l = 0; l < graph.link_count(); ++l) service_one(state, rates, graph, l, out[l]);
}

void service_links_parallel(SchedulerState& state, const TokenRateTable& rates, const NetworkGraph& graph,
                            std::span<ServiceRecord> out) {
  const LinkId links = graph.link_count();
#pragma omp parallel for schedule(static)
  for (LinkId l = 0; l < links; ++l) service_one(state, rates, graph, l, out[l]);
}

void substitute_dummies(SchedulerState& state, const NetworkGraph& graph, std::span<ServiceRecord> services) {
  for (ServiceRecord& rec : services) {
    if (!rec.active() || rec.dummies == 0) continue;
    auto& hold = state.queues.holding(graph.arc(rec.arc).from, rec.commodity);
    while (rec.dummies > 0 && !hold.empty()) {
      rec.packets.push_back(hold.front());
      hold.pop_front();
      --rec.dummies;
    }
  }
}

void scheduler_slot(SchedulerState& state, const TokenRateTable& rates, const NetworkGraph& graph,
                    std::span<ServiceRecord> out, KernelMode mode) {
  if (out.size() != static_cast<std::size_t>(graph.link_count())) {
    throw std::invalid_argument("service buffer must hold one record per link");
  }
  if (mode == KernelMode::Parallel) {
    service_links_parallel(state, rates, graph, out);
  } else {
    service_links_serial(state, rates, graph, out);
  }
  substitute_dummies(state, graph, out);
}

TokenProcessResult token_process_run(std::span<const double> nu, double c_th, std::span<const double> m0,
                                     std::int64_t horizon, bool record) {
  const std::size_t n = nu.size();
  if (n == 0) throw std::invalid_argument("token process needs at least one counter");
  if (m0.size() != n) throw std::invalid_argument("initial token vector has the wrong size");
  if (!(c_th > 0.0)) throw std::invalid_argument("threshold must be positive");
  if (horizon < 0) throw std::invalid_argument("horizon must be nonnegative");
  for (double v : nu) {
    if (!(v > 0.0)) throw std::invalid_argument("token rates must be positive");
  }
  const double nu_sum = std::accumulate(nu.begin(), nu.end(), 0.0);
  if (nu_sum >= c_th) throw std::invalid_argument("token rates must sum below the threshold");

  const double region = static_cast<double>(n + 1) * c_th;
  const double sum0 = std::accumulate(m0.begin(), m0.end(), 0.0);
  const double ratio = (sum0 - region) / (c_th - nu_sum);

  TokenProcessResult res;
  res.entry_bound = std::max(0.0, std::ceil(ratio));
  res.tight_bound = sum0 < region ? 0 : static_cast<std::int64_t>(std::floor(ratio)) + 1;

  std::vector<double> M(m0.begin(), m0.end());
  for (std::int64_t t = 0;; ++t) {
    const double s = std::accumulate(M.begin(), M.end(), 0.0);
    if (record) res.sums.push_back(s);
    if (s < region) {
      if (res.entry_slot < 0) res.entry_slot = t;
    } else if (res.entry_slot >= 0) {
      ++res.exits_after_entry;
    }
    if (t == horizon) break;
    const auto top = std::max_element(M.begin(), M.end());
    if (*top > c_th) *top -= c_th;
    for (std::size_t i = 0; i < n; ++i) M[i] += nu[i];
  }
  res.final_tokens = std::move(M);
  return res;
}

}  // namespace dacl
