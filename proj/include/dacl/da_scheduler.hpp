#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "dacl/bp_engine.hpp"
#include "dacl/da_routing.hpp"
#include "dacl/netmodel.hpp"
#include "dacl/packet.hpp"
#include "dacl/rng.hpp"

namespace dacl {

/// Q_nj^d as FIFO queues of packet ids, indexed by (commodity, arc n->j),
/// plus one holding buffer per (commodity, node) for packets that arrived
/// while their node had no route.
class RegulatorQueueBank {
 public:
  RegulatorQueueBank() = default;
  RegulatorQueueBank(const NetworkGraph& graph, int commodities);

  std::deque<PacketId>& queue(ArcId arc, CommodityId d) { return q_[qi(d, arc)]; }
  const std::deque<PacketId>& queue(ArcId arc, CommodityId d) const { return q_[qi(d, arc)]; }
  std::deque<PacketId>& holding(NodeId n, CommodityId d) { return hold_[hi(d, n)]; }
  const std::deque<PacketId>& holding(NodeId n, CommodityId d) const { return hold_[hi(d, n)]; }

  int arcs() const { return arcs_; }
  int nodes() const { return nodes_; }
  int commodities() const { return commodities_; }

  std::int64_t queued() const;
  std::int64_t held() const;

 private:
  std::size_t qi(CommodityId d, ArcId a) const { return static_cast<std::size_t>(d * arcs_ + a); }
  std::size_t hi(CommodityId d, NodeId n) const { return static_cast<std::size_t>(d * nodes_ + n); }

  int nodes_ = 0;
  int arcs_ = 0;
  int commodities_ = 0;
  std::vector<std::deque<PacketId>> q_;
  std::vector<std::deque<PacketId>> hold_;
};

/// Token counters m_nj^d with cumulative inflow and service for the
/// conservation identity served = inflow + m[0] - m[t].
class TokenBank {
 public:
  TokenBank() = default;
  TokenBank(int arcs, int commodities);

  double m(ArcId arc, CommodityId d) const { return m_[idx(d, arc)]; }
  /// M_nj^d = m_nj^d + m_jn^d for the link of `arc`.
  double link_tokens(ArcId arc, CommodityId d) const {
    return m_[idx(d, arc)] + m_[idx(d, NetworkGraph::reverse_arc(arc))];
  }
  /// Sum over commodities of M on link l.
  double link_total(LinkId l) const;

  double inflow(ArcId arc, CommodityId d) const { return in_sum_[idx(d, arc)] + in_comp_[idx(d, arc)]; }
  double served(ArcId arc, CommodityId d) const { return served_[idx(d, arc)] + served_comp_[idx(d, arc)]; }
  double initial(ArcId arc, CommodityId d) const { return m0_[idx(d, arc)]; }

  /// |served - (inflow + m0 - m)| for one counter.
  double conservation_error(ArcId arc, CommodityId d) const;
  double max_conservation_error() const;

  int arcs() const { return arcs_; }
  int commodities() const { return commodities_; }

  void add(ArcId arc, CommodityId d, double amount);
  void take(ArcId arc, CommodityId d, double amount);

 private:
  std::size_t idx(CommodityId d, ArcId a) const { return static_cast<std::size_t>(d * arcs_ + a); }

  int arcs_ = 0;
  int commodities_ = 0;
  std::vector<double> m_, m0_;
  std::vector<double> in_sum_, in_comp_;  // Neumaier running sum
  std::vector<double> served_, served_comp_;
};

/// S_nj^d, the per-slot token generation rates, with the surplus delta.
struct TokenRateTable {
  int arcs = 0;
  int commodities = 0;
  double delta = 0.0;
  std::vector<double> S;  // [d * arcs + arc]

  double at(CommodityId d, ArcId a) const { return S[static_cast<std::size_t>(d * arcs + a)]; }

  /// delta <= 0, negative rates, or a link whose two-direction sum over all
  /// commodities reaches its capacity raise ConfigError.
  void validate(const NetworkGraph& graph) const;
};

/// Largest surplus keeping the stability margin: epsilon / (H_max * |D|).
double delta_bound(double epsilon, int h_max, int commodities);

/// Out-neighbour split per (node, commodity) from the retained subgraph edges.
class RouteTable {
 public:
  RouteTable() = default;
  /// subgraphs[d] belongs to commodity d; destinations get no row.
  RouteTable(const NetworkGraph& graph, std::span<const Commodity> commodities,
             std::span<const CommoditySubgraph> subgraphs);

  bool has_route(NodeId n, CommodityId d) const { return !row(n, d).empty(); }
  /// Arcs with their split probabilities r_hat_nj / sum_m r_hat_nm.
  struct Share {
    ArcId arc;
    double probability;
  };
  std::span<const Share> row(NodeId n, CommodityId d) const;

  /// Picks the next-hop arc for one packet from a uniform u in [0, 1).
  /// Throws RoutingHole when the row is empty.
  ArcId pick(NodeId n, CommodityId d, double u) const;

  int nodes() const { return nodes_; }
  int commodities() const { return commodities_; }

 private:
  int nodes_ = 0;
  int commodities_ = 0;
  std::vector<int> offset_;
  std::vector<Share> shares_;
  std::vector<double> cumulative_;
};

/// Next-hop arc for each of `packets` arriving at (n, d), drawn independently
/// per packet from the Split stream keyed by (slot, packet id).
std::vector<ArcId> split_arrival(std::span<const PacketId> packets, NodeId n, CommodityId d, const RouteTable& routes,
                                 const CounterRng& rng, std::int64_t slot);

/// Deterministic splitter: smooth weighted round robin over the route row.
/// Each packet adds every share to its arc's credit and goes to the arc with
/// the largest credit (lowest arc id on ties), which then pays 1.
class DeficitSplitter {
 public:
  DeficitSplitter() = default;
  explicit DeficitSplitter(const RouteTable& routes);

  /// `routes` must be the table the splitter was built from.
  ArcId pick(const RouteTable& routes, NodeId n, CommodityId d);

 private:
  int nodes_ = 0;
  std::vector<int> offset_;
  std::vector<double> credit_;
};

/// Running mean of total arrivals A_n^d (exogenous plus relayed) per slot.
class ArrivalEstimator {
 public:
  ArrivalEstimator() = default;
  ArrivalEstimator(int nodes, int commodities);

  void observe(std::span<const double> arrivals);  // [d * nodes + n]
  double mean(NodeId n, CommodityId d) const;
  std::vector<double> means() const;
  std::int64_t samples() const { return samples_; }
  int nodes() const { return nodes_; }

 private:
  int nodes_ = 0;
  int commodities_ = 0;
  std::int64_t samples_ = 0;
  std::vector<double> sum_;
};

/// S_nj^d = E[A_n^d] * share_nj^d + delta on every retained arc.
/// `expected` is [d * nodes + n].
TokenRateTable token_rates(std::span<const double> expected, const RouteTable& routes, const NetworkGraph& graph,
                           double delta);

TokenRateTable token_rates(const ArrivalEstimator& estimator, const RouteTable& routes, const NetworkGraph& graph,
                           double delta);

/// E[A_n^d] implied by the routing solution: exogenous admissions from the
/// snapshot plus the token rates of every retained in-arc, evaluated in
/// topological order so the surplus compounds along paths.
std::vector<double> expected_arrivals_from_solution(const NetRateSnapshot& snapshot, const RouteTable& routes,
                                                    std::span<const AcyclicityCertificate> certificates,
                                                    const NetworkGraph& graph, double delta);

/// Service outcome of one link in one slot.
struct ServiceRecord {
  LinkId link = 0;
  CommodityId commodity = -1;
  ArcId arc = -1;
  std::vector<PacketId> packets;  // real packets, FIFO order
  int dummies = 0;

  bool active() const { return commodity >= 0; }
};

struct SchedulerState {
  RegulatorQueueBank queues;
  TokenBank tokens;

  SchedulerState() = default;
  SchedulerState(const NetworkGraph& graph, int commodities)
      : queues(graph, commodities), tokens(graph.arc_count(), commodities) {}
};

/// Token generation and service for every link: m += S, winner is the
/// commodity maximising M - c when positive (lowest id on ties), up to
/// floor(c) head-of-line packets leave the active direction padded with
/// dummies, and the winner's tokens drop by c. `out` has one entry per link.
void service_links_serial(SchedulerState& state, const TokenRateTable& rates, const NetworkGraph& graph,
                          std::span<ServiceRecord> out);

/// OpenMP kernel; identical results to the serial reference.
void service_links_parallel(SchedulerState& state, const TokenRateTable& rates, const NetworkGraph& graph,
                            std::span<ServiceRecord> out);

/// Dummy slots on each granted arc are filled, in link order, with packets
/// from the sender's holding buffer for that commodity.
void substitute_dummies(SchedulerState& state, const NetworkGraph& graph, std::span<ServiceRecord> services);

void scheduler_slot(SchedulerState& state, const TokenRateTable& rates, const NetworkGraph& graph,
                    std::span<ServiceRecord> out, KernelMode mode = KernelMode::Serial);

/// Standalone token-count process: M[t+1] = M[t] - D[t] + nu, with
/// D[t] = c_th on the unique argmax of M[t] when it exceeds c_th.
struct TokenProcessResult {
  std::vector<double> final_tokens;
  std::int64_t entry_slot = -1;     // first t with sum M[t] < (n+1) c_th, -1 if never
  std::int64_t exits_after_entry = 0;
  double entry_bound = 0.0;         // max(0, ceil((sum M[0] - (n+1) c_th) / (c_th - sum nu)))
  std::int64_t tight_bound = 0;     // smallest t guaranteed by the drift argument
  std::vector<double> sums;         // sum M[t] per slot when recording
};

TokenProcessResult token_process_run(std::span<const double> nu, double c_th, std::span<const double> m0,
                                     std::int64_t horizon, bool record = false);

}  // namespace dacl
