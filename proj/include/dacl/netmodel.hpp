#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dacl {

using NodeId = std::int32_t;
using LinkId = std::int32_t;
using ArcId = std::int32_t;
using CommodityId = std::int32_t;

/// Bidirectional link. Endpoints are stored with a < b; both directions
/// share the one capacity record.
struct Link {
  NodeId a = 0;
  NodeId b = 0;
  double capacity = 1.0;
};

/// Directed view of a link. Arc 2*l runs a->b, arc 2*l+1 runs b->a.
struct Arc {
  NodeId from = 0;
  NodeId to = 0;
  LinkId link = 0;
};

/// Nodes, bidirectional capacitated links, and a directed adjacency index.
class NetworkGraph {
 public:
  NetworkGraph() = default;
  NetworkGraph(int node_count, std::vector<Link> links);

  int node_count() const { return node_count_; }
  int link_count() const { return static_cast<int>(links_.size()); }
  int arc_count() const { return 2 * link_count(); }

  const Link& link(LinkId l) const { return links_[static_cast<std::size_t>(l)]; }
  std::span<const Link> links() const { return links_; }
  const Arc& arc(ArcId a) const { return arcs_[static_cast<std::size_t>(a)]; }
  std::span<const Arc> arcs() const { return arcs_; }

  static ArcId forward_arc(LinkId l) { return 2 * l; }
  static ArcId reverse_arc(ArcId a) { return a ^ 1; }
  static LinkId link_of(ArcId a) { return a / 2; }

  double capacity(LinkId l) const { return link(l).capacity; }
  double arc_capacity(ArcId a) const { return capacity(link_of(a)); }

  std::span<const ArcId> out_arcs(NodeId n) const;
  std::span<const ArcId> in_arcs(NodeId n) const;
  int degree(NodeId n) const { return static_cast<int>(out_arcs(n).size()); }
  std::optional<ArcId> find_arc(NodeId from, NodeId to) const;

  double min_capacity() const;

  /// Same topology with every capacity lowered by `epsilon`.
  NetworkGraph with_capacity_reduction(double epsilon) const;

 private:
  int node_count_ = 0;
  std::vector<Link> links_;
  std::vector<Arc> arcs_;
  std::vector<int> out_offset_, in_offset_;
  std::vector<ArcId> out_index_, in_index_;
};

NetworkGraph build_grid(int side, double capacity);
NetworkGraph build_tandem(int hops, double capacity);

/// Weighted-log utility U(x) = w ln x.
struct UtilitySpec {
  double weight = 1.0;

  double value(double x) const;
  double marginal(double x) const { return weight / x; }
  /// Inverse of the marginal utility: U'^{-1}(y) = w / y.
  double marginal_inverse(double y) const { return weight / y; }
};

struct Source {
  NodeId node = 0;
  UtilitySpec utility;
  /// When set, arrivals ignore prices and use this mean (Bernoulli-style
  /// fixed-rate admission for tandem and stability studies).
  std::optional<double> fixed_rate;
};

/// Traffic class identified by its destination.
struct Commodity {
  CommodityId id = 0;
  NodeId destination = 0;
  std::vector<Source> sources;
};

void validate_commodities(const NetworkGraph& graph, std::span<const Commodity> commodities);

/// Total number of (source, commodity) pairs, used to flatten per-source arrays.
int source_count(std::span<const Commodity> commodities);

/// Exogenous rates x and link rates r, dense per commodity.
struct RatePoint {
  int nodes = 0;
  int arcs = 0;
  int commodities = 0;
  std::vector<double> x;  // [d * nodes + n]
  std::vector<double> r;  // [d * arcs + arc]

  static RatePoint zeros(const NetworkGraph& graph, int commodity_count);

  double& exo(CommodityId d, NodeId n) { return x[static_cast<std::size_t>(d * nodes + n)]; }
  double exo(CommodityId d, NodeId n) const { return x[static_cast<std::size_t>(d * nodes + n)]; }
  double& rate(CommodityId d, ArcId a) { return r[static_cast<std::size_t>(d * arcs + a)]; }
  double rate(CommodityId d, ArcId a) const { return r[static_cast<std::size_t>(d * arcs + a)]; }

  bool operator==(const RatePoint&) const = default;
};

enum class ConstraintKind { NonnegX, NonnegR, Capacity, Conservation };

std::string to_string(ConstraintKind kind);

struct Violation {
  ConstraintKind kind = ConstraintKind::Capacity;
  CommodityId commodity = -1;  // -1 for capacity rows
  int index = -1;              // node, arc, or link depending on kind
  std::string location;
  double magnitude = 0.0;
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<Violation> violations;
};

inline constexpr double kDefaultFeasibilityTolerance = 1e-9;

FeasibilityReport check_feasible(const NetworkGraph& graph, std::span<const Commodity> commodities,
                                 const RatePoint& point,
                                 double tolerance = kDefaultFeasibilityTolerance);

double objective_value(std::span<const Commodity> commodities, const RatePoint& point);

/// Kingman-style upper bound on mean G/G/1 waiting time.
double gg1_delay_bound(double var_interarrival, double var_service, double mean_interarrival,
                       double utilization);

}  // namespace dacl
