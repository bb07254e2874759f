#pragma once

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dacl/bp_engine.hpp"
#include "dacl/netmodel.hpp"

namespace dacl {

inline constexpr double kDefaultRetentionThreshold = 1e-3;

enum class SnapshotMode { FullHistory, MovingWindow };

/// Windowed and cumulative per-arc per-commodity grant sums, plus admitted
/// exogenous traffic over the same horizons.
///
/// The window is stored as one compact record per link per slot (a link
/// grants at most one commodity in one direction per slot), so memory is
/// window * links rather than window * arcs * commodities.
class NetRateAccumulator {
 public:
  NetRateAccumulator() = default;
  NetRateAccumulator(const NetworkGraph& graph, std::span<const Commodity> commodities, int window,
                     int period);

  /// Fold in one slot. Traces must arrive in slot order starting at 0.
  void accumulate(const SlotTrace& trace);

  std::int64_t slots() const { return slots_; }
  int window() const { return window_; }
  int period() const { return period_; }
  int nodes() const { return nodes_; }
  int arcs() const { return arcs_; }
  int commodities() const { return commodities_; }

  /// True at period boundaries once a full window is available.
  bool snapshot_due() const { return slots_ > 0 && slots_ % period_ == 0 && slots_ >= window_; }

  double window_sum(ArcId arc, CommodityId d) const { return win_[index(d, arc)]; }
  double cumulative_sum(ArcId arc, CommodityId d) const { return cum_[index(d, arc)]; }
  std::int64_t slots_in_window() const { return std::min<std::int64_t>(slots_, window_); }

  /// Exact window sums recomputed in slot order: [d * arcs + arc].
  std::vector<double> exact_window_sums() const;
  /// Admitted packets per [d * nodes + n] over the window / full history.
  std::vector<double> window_admissions() const;
  const std::vector<double>& cumulative_admissions() const { return cum_adm_; }

 private:
  std::size_t index(CommodityId d, ArcId a) const { return static_cast<std::size_t>(d * arcs_ + a); }

  int nodes_ = 0;
  int links_ = 0;
  int arcs_ = 0;
  int commodities_ = 0;
  int window_ = 1;
  int period_ = 1;
  std::int64_t slots_ = 0;
  std::vector<std::size_t> source_slot_;  // flattened source -> [d * nodes + n]
  std::vector<double> cum_;
  std::vector<double> win_;
  std::vector<LinkDecision> ring_;        // window_ * links_
  std::vector<std::int64_t> adm_ring_;    // window_ * sources
  std::vector<double> cum_adm_;
};

/// Net rates r_hat = (avg_ij - avg_ji)^+ frozen at a slot.
struct NetRateSnapshot {
  SnapshotMode mode = SnapshotMode::MovingWindow;
  std::int64_t slot = 0;
  int nodes = 0;
  int arcs = 0;
  int commodities = 0;
  std::vector<double> r_hat;     // [d * arcs + arc]
  std::vector<double> admitted;  // mean exogenous admissions per slot, [d * nodes + n]

  double at(CommodityId d, ArcId a) const { return r_hat[static_cast<std::size_t>(d * arcs + a)]; }
  double admitted_rate(CommodityId d, NodeId n) const {
    return admitted[static_cast<std::size_t>(d * nodes + n)];
  }
};

NetRateSnapshot snapshot_net_rates(const NetRateAccumulator& acc, SnapshotMode mode);

/// Applies the net-rate mapping to a static solution; x is untouched.
RatePoint map_rate_point(const RatePoint& point);

/// Snapshot view of an already-averaged rate point (mapping applied).
NetRateSnapshot snapshot_from_rates(const RatePoint& averages, std::int64_t slot = 0);

struct SubgraphEdge {
  ArcId arc = 0;
  NodeId from = 0;
  NodeId to = 0;
  double rate = 0.0;
};

/// Directed edges a commodity may use: those with r_hat above the threshold.
struct CommoditySubgraph {
  CommodityId commodity = 0;
  int nodes = 0;
  std::vector<SubgraphEdge> edges;
};

CommoditySubgraph build_subgraph(const NetRateSnapshot& snapshot, const NetworkGraph& graph,
                                 CommodityId commodity, double threshold = kDefaultRetentionThreshold);

struct AcyclicityCertificate {
  bool acyclic = true;
  std::vector<NodeId> order;  // topological order when acyclic
  std::vector<NodeId> cycle;  // closed walk, first == last, when cyclic
  int longest_path = 0;       // hops, acyclic only
};

AcyclicityCertificate check_loop_free(const CommoditySubgraph& sub);

struct PriceDescentViolation {
  CommodityId commodity = 0;
  ArcId arc = 0;
  NodeId from = 0;
  NodeId to = 0;
  double r_hat = 0.0;
  double mean_from = 0.0;
  double mean_to = 0.0;
};

/// Every arc with r_hat above `rate_threshold` whose upstream mean price is
/// not above the downstream one. A pair counts as a violation when
/// mean_from - mean_to <= -tolerance (with tolerance 0, ties count).
std::vector<PriceDescentViolation> check_price_descent(const NetRateSnapshot& snapshot, const NetworkGraph& graph,
                                                     const PriceTable& mean_prices, double rate_threshold = 0.0,
                                                     double tolerance = 0.0);

/// CSV rows "commodity,from,to,r_hat" for arcs with positive r_hat.
void write_netrates_csv(std::ostream& os, const NetRateSnapshot& snapshot, const NetworkGraph& graph);

}  // namespace dacl
