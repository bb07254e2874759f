#include "dacl/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace dacl {

NetworkGraph::NetworkGraph(int node_count, std::vector<Link> links)
    : node_count_(node_count), links_(std::move(links)) {
  if (node_count_ < 1) throw std::invalid_argument("graph needs at least one node");
  std::set<std::pair<NodeId, NodeId>> seen;
  for (auto& l : links_) {
    if (l.a < 0 || l.b < 0 || l.a >= node_count_ || l.b >= node_count_) {
      throw std::invalid_argument("link endpoint " + std::to_string(l.a) + "-" +
                                  std::to_string(l.b) + " is not a declared node");
    }
    if (l.a == l.b) throw std::invalid_argument("self-loop at node " + std::to_string(l.a));
    if (!(l.capacity > 0.0) || !std::isfinite(l.capacity)) {
      throw std::invalid_argument("link capacity must be positive and finite");
    }
    if (l.a > l.b) std::swap(l.a, l.b);
    if (!seen.emplace(l.a, l.b).second) {
      throw std::invalid_argument("duplicate link " + std::to_string(l.a) + "-" +
                                  std::to_string(l.b));
    }
  }

  arcs_.reserve(links_.size() * 2);
  for (LinkId l = 0; l < link_count(); ++l) {
    arcs_.push_back({links_[l].a, links_[l].b, l});
    arcs_.push_back({links_[l].b, links_[l].a, l});
  }

  // CSR adjacency, arcs listed in increasing id per node.
  std::vector<int> out_deg(node_count_, 0), in_deg(node_count_, 0);
  for (const Arc& a : arcs_) {
    ++out_deg[a.from];
    ++in_deg[a.to];
  }
  out_offset_.assign(node_count_ + 1, 0);
  in_offset_.assign(node_count_ + 1, 0);
  for (int n = 0; n < node_count_; ++n) {
    out_offset_[n + 1] = out_offset_[n] + out_deg[n];
    in_offset_[n + 1] = in_offset_[n] + in_deg[n];
  }
  out_index_.resize(arcs_.size());
  in_index_.resize(arcs_.size());
  std::vector<int> out_fill(out_offset_.begin(), out_offset_.end() - 1);
  std::vector<int> in_fill(in_offset_.begin(), in_offset_.end() - 1);
  for (ArcId a = 0; a < arc_count(); ++a) {
    out_index_[out_fill[arcs_[a].from]++] = a;
    in_index_[in_fill[arcs_[a].to]++] = a;
  }
}

std::span<const ArcId> NetworkGraph::out_arcs(NodeId n) const {
  return std::span<const ArcId>(out_index_).subspan(out_offset_[n], out_offset_[n + 1] - out_offset_[n]);
}

std::span<const ArcId> NetworkGraph::in_arcs(NodeId n) const {
  return std::span<const ArcId>(in_index_).subspan(in_offset_[n], in_offset_[n + 1] - in_offset_[n]);
}

std::optional<ArcId> NetworkGraph::find_arc(NodeId from, NodeId to) const {
  if (from < 0 || from >= node_count_) return std::nullopt;
  for (ArcId a : out_arcs(from)) {
    if (arcs_[a].to == to) return a;
  }
  return std::nullopt;
}

double NetworkGraph::min_capacity() const {
  double m = std::numeric_limits<double>::infinity();
  for (const Link& l : links_) m = std::min(m, l.capacity);
  return m;
}

NetworkGraph NetworkGraph::with_capacity_reduction(double epsilon) const {
  std::vector<Link> reduced = links_;
  for (Link& l : reduced) l.capacity -= epsilon;
  return NetworkGraph(node_count_, std::move(reduced));
}

NetworkGraph build_grid(int side, double capacity) {
  if (side < 2) throw std::invalid_argument("grid side must be at least 2");
  std::vector<Link> links;
  links.reserve(static_cast<std::size_t>(2 * side * (side - 1)));
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const NodeId n = r * side + c;
      if (c + 1 < side) links.push_back({n, n + 1, capacity});
      if (r + 1 < side) links.push_back({n, n + side, capacity});
    }
  }
  return NetworkGraph(side * side, std::move(links));
}

NetworkGraph build_tandem(int hops, double capacity) {
  if (hops < 1) throw std::invalid_argument("tandem needs at least one hop");
  std::vector<Link> links;
  for (NodeId i = 1; i <= hops; ++i) links.push_back({i - 1, i, capacity});
  return NetworkGraph(hops + 1, std::move(links));
}

double UtilitySpec::value(double x) const {
  if (!(x > 0.0)) throw std::domain_error("log utility undefined for rate " + std::to_string(x));
  return weight * std::log(x);
}

void validate_commodities(const NetworkGraph& graph, std::span<const Commodity> commodities) {
  std::set<NodeId> destinations;
  for (std::size_t k = 0; k < commodities.size(); ++k) {
    const Commodity& c = commodities[k];
    if (c.id != static_cast<CommodityId>(k)) {
      throw std::invalid_argument("commodity ids must be dense and ordered");
    }
    if (c.destination < 0 || c.destination >= graph.node_count()) {
      throw std::invalid_argument("commodity " + std::to_string(c.id) + " destination is not a node");
    }
    if (!destinations.insert(c.destination).second) {
      throw std::invalid_argument("two commodities share destination " + std::to_string(c.destination));
    }
    for (const Source& s : c.sources) {
      if (s.node < 0 || s.node >= graph.node_count()) {
        throw std::invalid_argument("source node " + std::to_string(s.node) + " is not a node");
      }
      if (s.node == c.destination) {
        throw std::invalid_argument("commodity " + std::to_string(c.id) + " has its destination as a source");
      }
      if (!(s.utility.weight > 0.0)) throw std::invalid_argument("utility weight must be positive");
      if (s.fixed_rate && !(*s.fixed_rate >= 0.0)) throw std::invalid_argument("fixed rate must be nonnegative");
    }
  }
}

int source_count(std::span<const Commodity> commodities) {
  int n = 0;
  for (const Commodity& c : commodities) n += static_cast<int>(c.sources.size());
  return n;
}

RatePoint RatePoint::zeros(const NetworkGraph& graph, int commodity_count) {
  RatePoint p;
  p.nodes = graph.node_count();
  p.arcs = graph.arc_count();
  p.commodities = commodity_count;
  p.x.assign(static_cast<std::size_t>(commodity_count * p.nodes), 0.0);
  p.r.assign(static_cast<std::size_t>(commodity_count * p.arcs), 0.0);
  return p;
}

std::string to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::NonnegX: return "nonneg-x";
    case ConstraintKind::NonnegR: return "nonneg-r";
    case ConstraintKind::Capacity: return "capacity";
    case ConstraintKind::Conservation: return "conservation";
  }
  return "unknown";
}

FeasibilityReport check_feasible(const NetworkGraph& graph, std::span<const Commodity> commodities,
                                 const RatePoint& point, double tolerance) {
  const int D = static_cast<int>(commodities.size());
  if (point.nodes != graph.node_count() || point.arcs != graph.arc_count() || point.commodities != D ||
      point.x.size() != static_cast<std::size_t>(D * point.nodes) ||
      point.r.size() != static_cast<std::size_t>(D * point.arcs)) {
    throw std::invalid_argument("rate point does not match graph/commodity dimensions");
  }
  if (tolerance < 0.0) throw std::invalid_argument("tolerance must be nonnegative");

  FeasibilityReport report;
  auto add = [&](ConstraintKind kind, CommodityId d, int index, std::string where, double mag) {
    report.violations.push_back({kind, d, index, std::move(where), mag});
  };

  for (CommodityId d = 0; d < D; ++d) {
    for (NodeId n = 0; n < point.nodes; ++n) {
      const double x = point.exo(d, n);
      if (x < -tolerance) add(ConstraintKind::NonnegX, d, n, "node " + std::to_string(n), -x);
    }
    for (ArcId a = 0; a < point.arcs; ++a) {
      const double r = point.rate(d, a);
      if (r < -tolerance) {
        const Arc& arc = graph.arc(a);
        add(ConstraintKind::NonnegR, d, a,
            "<" + std::to_string(arc.from) + "," + std::to_string(arc.to) + ">", -r);
      }
    }
  }

  for (LinkId l = 0; l < graph.link_count(); ++l) {
    double load = 0.0;
    for (CommodityId d = 0; d < D; ++d) {
      load += point.rate(d, NetworkGraph::forward_arc(l)) + point.rate(d, NetworkGraph::forward_arc(l) + 1);
    }
    const double excess = load - graph.capacity(l);
    if (excess > tolerance) {
      const Link& lk = graph.link(l);
      add(ConstraintKind::Capacity, -1, l, "(" + std::to_string(lk.a) + "," + std::to_string(lk.b) + ")",
          excess);
    }
  }

  // x_i + inflow <= outflow for every i other than the destination.
  for (CommodityId d = 0; d < D; ++d) {
    const NodeId dest = commodities[d].destination;
    for (NodeId n = 0; n < point.nodes; ++n) {
      if (n == dest) continue;
      double in = point.exo(d, n);
      double out = 0.0;
      for (ArcId a : graph.in_arcs(n)) in += point.rate(d, a);
      for (ArcId a : graph.out_arcs(n)) out += point.rate(d, a);
      const double deficit = in - out;
      if (deficit > tolerance) add(ConstraintKind::Conservation, d, n, "node " + std::to_string(n), deficit);
    }
  }

  report.feasible = report.violations.empty();
  return report;
}

double objective_value(std::span<const Commodity> commodities, const RatePoint& point) {
  double total = 0.0;
  for (const Commodity& c : commodities) {
    for (const Source& s : c.sources) total += s.utility.value(point.exo(c.id, s.node));
  }
  return total;
}

double gg1_delay_bound(double var_interarrival, double var_service, double mean_interarrival,
                       double utilization) {
  if (!(utilization < 1.0) || utilization < 0.0) {
    throw std::invalid_argument("utilization must lie in [0, 1)");
  }
  if (!(mean_interarrival > 0.0)) throw std::invalid_argument("mean interarrival must be positive");
  if (var_interarrival < 0.0 || var_service < 0.0) throw std::invalid_argument("variances must be nonnegative");
  return (var_interarrival + var_service) / (2.0 * mean_interarrival * (1.0 - utilization));
}

}  // namespace dacl
