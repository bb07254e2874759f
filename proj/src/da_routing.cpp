#include "dacl/da_routing.hpp"

#include <ostream>
#include <stdexcept>
#include <string>

#include "dacl/errors.hpp"

namespace dacl {

NetRateAccumulator::NetRateAccumulator(const NetworkGraph& graph, std::span<const Commodity> commodities,
                                       int window, int period)
    : nodes_(graph.node_count()),
      links_(graph.link_count()),
      arcs_(graph.arc_count()),
      commodities_(static_cast<int>(commodities.size())),
      window_(window),
      period_(period) {
  if (window < 1) throw std::invalid_argument("window must be a positive number of slots");
  if (period < 1) throw std::invalid_argument("update period must be a positive number of slots");
  for (const Commodity& c : commodities) {
    for (const Source& s : c.sources) source_slot_.push_back(static_cast<std::size_t>(c.id * nodes_ + s.node));
  }
  cum_.assign(static_cast<std::size_t>(commodities_ * arcs_), 0.0);
  win_.assign(cum_.size(), 0.0);
  ring_.assign(static_cast<std::size_t>(window_) * static_cast<std::size_t>(links_), LinkDecision{});
  adm_ring_.assign(static_cast<std::size_t>(window_) * source_slot_.size(), 0);
  cum_adm_.assign(static_cast<std::size_t>(commodities_ * nodes_), 0.0);
}

void NetRateAccumulator::accumulate(const SlotTrace& trace) {
  if (trace.slot != slots_) {
    throw std::invalid_argument("trace for slot " + std::to_string(trace.slot) + " arrived, expected slot " +
                                std::to_string(slots_));
  }
  if (!trace.decisions.empty() && trace.decisions.size() != static_cast<std::size_t>(links_)) {
    throw std::invalid_argument("trace decisions do not cover every link");
  }
  if (!trace.arrivals.count.empty() && trace.arrivals.count.size() != source_slot_.size()) {
    throw std::invalid_argument("trace arrivals do not cover every source");
  }

  const std::size_t pos = static_cast<std::size_t>(slots_ % window_);
  const bool evict = slots_ >= window_;
  for (LinkId l = 0; l < links_; ++l) {
    LinkDecision& cell = ring_[pos * static_cast<std::size_t>(links_) + static_cast<std::size_t>(l)];
    if (evict && cell.active()) win_[index(cell.commodity, cell.arc)] -= cell.rate;
    cell = trace.decisions.empty() ? LinkDecision{l} : trace.decisions[static_cast<std::size_t>(l)];
    if (cell.active()) {
      win_[index(cell.commodity, cell.arc)] += cell.rate;
      cum_[index(cell.commodity, cell.arc)] += cell.rate;
    }
  }

  const std::size_t S = source_slot_.size();
  for (std::size_t k = 0; k < S; ++k) {
    const std::int64_t x = trace.arrivals.count.empty() ? 0 : trace.arrivals.count[k];
    adm_ring_[pos * S + k] = x;
    cum_adm_[source_slot_[k]] += static_cast<double>(x);
  }
  ++slots_;
}

std::vector<double> NetRateAccumulator::exact_window_sums() const {
  std::vector<double> sums(cum_.size(), 0.0);
  const std::int64_t n = slots_in_window();
  for (std::int64_t s = slots_ - n; s < slots_; ++s) {
    const std::size_t pos = static_cast<std::size_t>(s % window_);
    for (LinkId l = 0; l < links_; ++l) {
      const LinkDecision& cell = ring_[pos * static_cast<std::size_t>(links_) + static_cast<std::size_t>(l)];
      if (cell.active()) sums[index(cell.commodity, cell.arc)] += cell.rate;
    }
  }
  return sums;
}

std::vector<double> NetRateAccumulator::window_admissions() const {
  std::vector<double> sums(cum_adm_.size(), 0.0);
  const std::int64_t n = slots_in_window();
  const std::size_t S = source_slot_.size();
  for (std::int64_t s = slots_ - n; s < slots_; ++s) {
    const std::size_t pos = static_cast<std::size_t>(s % window_);
    for (std::size_t k = 0; k < S; ++k) sums[source_slot_[k]] += static_cast<double>(adm_ring_[pos * S + k]);
  }
  return sums;
}

namespace {

// (avg_ij - avg_ji)^+ per arc pair. Subtraction is antisymmetric in IEEE
// arithmetic, so r_hat_ij - r_hat_ji equals avg_ij - avg_ji exactly and one
// side is exactly zero.
void net_rates(std::span<const double> avg, int arcs, int commodities, std::span<double> out) {
  for (int d = 0; d < commodities; ++d) {
    for (ArcId a = 0; a < arcs; a += 2) {
      const std::size_t f = static_cast<std::size_t>(d * arcs + a);
      const std::size_t r = f + 1;
      out[f] = std::max(avg[f] - avg[r], 0.0);
      out[r] = std::max(avg[r] - avg[f], 0.0);
    }
  }
}

}  // namespace

NetRateSnapshot snapshot_net_rates(const NetRateAccumulator& acc, SnapshotMode mode) {
  NetRateSnapshot snap;
  snap.mode = mode;
  snap.slot = acc.slots();
  snap.nodes = acc.nodes();
  snap.arcs = acc.arcs();
  snap.commodities = acc.commodities();

  std::vector<double> avg;
  std::vector<double> adm;
  double horizon = 0.0;
  if (mode == SnapshotMode::MovingWindow) {
    if (acc.slots() < acc.window()) {
      throw NotReady("moving-window snapshot needs " + std::to_string(acc.window()) + " slots, have " +
                     std::to_string(acc.slots()));
    }
    avg = acc.exact_window_sums();
    adm = acc.window_admissions();
    horizon = static_cast<double>(acc.window());
  } else {
    if (acc.slots() < 1) throw NotReady("full-history snapshot needs at least one slot");
    avg.resize(static_cast<std::size_t>(snap.commodities * snap.arcs));
    for (CommodityId d = 0; d < snap.commodities; ++d) {
      for (ArcId a = 0; a < snap.arcs; ++a) avg[static_cast<std::size_t>(d * snap.arcs + a)] = acc.cumulative_sum(a, d);
    }
    adm = acc.cumulative_admissions();
    horizon = static_cast<double>(acc.slots());
  }
  for (double& v : avg) v /= horizon;
  for (double& v : adm) v /= horizon;

  snap.r_hat.assign(avg.size(), 0.0);
  net_rates(avg, snap.arcs, snap.commodities, snap.r_hat);
  snap.admitted = std::move(adm);
  return snap;
}

RatePoint map_rate_point(const RatePoint& point) {
  RatePoint mapped = point;
  net_rates(point.r, point.arcs, point.commodities, mapped.r);
  return mapped;
}

NetRateSnapshot snapshot_from_rates(const RatePoint& averages, std::int64_t slot) {
  NetRateSnapshot snap;
  snap.mode = SnapshotMode::FullHistory;
  snap.slot = slot;
  snap.nodes = averages.nodes;
  snap.arcs = averages.arcs;
  snap.commodities = averages.commodities;
  snap.r_hat.assign(averages.r.size(), 0.0);
  net_rates(averages.r, averages.arcs, averages.commodities, snap.r_hat);
  snap.admitted = averages.x;
  return snap;
}

CommoditySubgraph build_subgraph(const NetRateSnapshot& snapshot, const NetworkGraph& graph, CommodityId commodity,
                                 double threshold) {
  if (commodity < 0 || commodity >= snapshot.commodities) {
    throw std::invalid_argument("snapshot has no commodity " + std::to_string(commodity));
  }
  if (snapshot.arcs != graph.arc_count()) throw std::invalid_argument("snapshot does not match graph");
  CommoditySubgraph sub;
  sub.commodity = commodity;
  sub.nodes = graph.node_count();
  for (ArcId a = 0; a < snapshot.arcs; ++a) {
    const double r = snapshot.at(commodity, a);
    if (r > threshold) sub.edges.push_back({a, graph.arc(a).from, graph.arc(a).to, r});
  }
  return sub;
}

AcyclicityCertificate check_loop_free(const CommoditySubgraph& sub) {
  const int N = sub.nodes;
  std::vector<std::vector<int>> out(static_cast<std::size_t>(N)), in(static_cast<std::size_t>(N));
  std::vector<int> indeg(static_cast<std::size_t>(N), 0);
  for (std::size_t e = 0; e < sub.edges.size(); ++e) {
    out[sub.edges[e].from].push_back(static_cast<int>(e));
    in[sub.edges[e].to].push_back(static_cast<int>(e));
    ++indeg[sub.edges[e].to];
  }

  AcyclicityCertificate cert;
  std::vector<NodeId> queue;
  for (NodeId n = 0; n < N; ++n) {
    if (indeg[n] == 0) queue.push_back(n);
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const NodeId n = queue[head];
    cert.order.push_back(n);
    for (int e : out[n]) {
      if (--indeg[sub.edges[e].to] == 0) queue.push_back(sub.edges[e].to);
    }
  }

  if (static_cast<int>(cert.order.size()) == N) {
    std::vector<int> depth(static_cast<std::size_t>(N), 0);
    for (NodeId n : cert.order) {
      for (int e : out[n]) {
        depth[sub.edges[e].to] = std::max(depth[sub.edges[e].to], depth[n] + 1);
        cert.longest_path = std::max(cert.longest_path, depth[sub.edges[e].to]);
      }
    }
    return cert;
  }

  // Every node Kahn could not remove has an in-edge from another such node,
  // so walking predecessors inside that residue must revisit a node.
  cert.acyclic = false;
  cert.order.clear();
  NodeId start = 0;
  while (indeg[start] == 0) ++start;
  std::vector<int> visit_index(static_cast<std::size_t>(N), -1);
  std::vector<NodeId> walk;
  NodeId cur = start;
  while (visit_index[cur] < 0) {
    visit_index[cur] = static_cast<int>(walk.size());
    walk.push_back(cur);
    for (int e : in[cur]) {
      if (indeg[sub.edges[e].from] > 0) {
        cur = sub.edges[e].from;
        break;
      }
    }
  }
  // walk[visit_index[cur]..] is the cycle traversed against edge direction.
  std::vector<NodeId> cyc(walk.begin() + visit_index[cur], walk.end());
  std::reverse(cyc.begin(), cyc.end());
  std::rotate(cyc.begin(), std::min_element(cyc.begin(), cyc.end()), cyc.end());
  cyc.push_back(cyc.front());
  cert.cycle = std::move(cyc);
  return cert;
}

std::vector<PriceDescentViolation> check_price_descent(const NetRateSnapshot& snapshot, const NetworkGraph& graph,
                                                     const PriceTable& mean_prices, double rate_threshold,
                                                     double tolerance) {
  std::vector<PriceDescentViolation> out;
  for (CommodityId d = 0; d < snapshot.commodities; ++d) {
    for (ArcId a = 0; a < snapshot.arcs; ++a) {
      const double r = snapshot.at(d, a);
      if (!(r > rate_threshold)) continue;
      const Arc& arc = graph.arc(a);
      const double pf = mean_prices.at(arc.from, d);
      const double pt = mean_prices.at(arc.to, d);
      if (pf - pt <= -tolerance) out.push_back({d, a, arc.from, arc.to, r, pf, pt});
    }
  }
  return out;
}

void write_netrates_csv(std::ostream& os, const NetRateSnapshot& snapshot, const NetworkGraph& graph) {
  os << "commodity,from,to,r_hat\n";
  const auto prec = os.precision(17);
  for (CommodityId d = 0; d < snapshot.commodities; ++d) {
    for (ArcId a = 0; a < snapshot.arcs; ++a) {
      const double r = snapshot.at(d, a);
      if (r > 0.0) os << d << ',' << graph.arc(a).from << ',' << graph.arc(a).to << ',' << r << '\n';
    }
  }
  os.precision(prec);
}

}  // namespace dacl
