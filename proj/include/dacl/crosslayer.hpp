#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dacl/bp_engine.hpp"
#include "dacl/da_routing.hpp"
#include "dacl/da_scheduler.hpp"
#include "dacl/netmodel.hpp"
#include "dacl/packet.hpp"

namespace dacl {

enum class ArrivalEstimate {
  Solution,  // E[A] propagated from the admitted rates through the routes
  Observed,  // running mean of observed layer-3 arrivals
};

enum class SplitMode {
  Random,   // independent per-packet draws
  Deficit,  // smooth weighted round robin
};

struct CrossLayerConfig {
  PolicyConfig policy;             // K, x_max, seed for the virtual layer
  double epsilon = 0.05;           // uniform capacity reduction
  std::optional<double> delta;     // default 0.5 * epsilon / (H_max * |D|)
  int window = 5000;
  int period = 5000;
  double threshold = kDefaultRetentionThreshold;
  ArrivalEstimate estimate = ArrivalEstimate::Solution;
  SplitMode split = SplitMode::Deficit;
  std::int64_t estimator_warmup = 5000;  // Observed mode only

  /// Throws ConfigError naming the offending field.
  void validate(const NetworkGraph& graph) const;
};

struct SnapshotEvent {
  enum class Outcome { Applied, Cycle, Rejected };
  std::int64_t slot = 0;
  Outcome outcome = Outcome::Applied;
  CommodityId commodity = -1;  // cycle owner
  std::vector<NodeId> cycle;
  int h_max = 0;
  double delta = 0.0;
  std::string message;
};

/// The three-layer policy: DTBP counters on c - epsilon, net-rate routes
/// from the moving window, and token-scheduled real packets on c.
class CrossLayerEngine {
 public:
  CrossLayerEngine(NetworkGraph graph, std::vector<Commodity> commodities, CrossLayerConfig config,
                   KernelMode mode = KernelMode::Serial);

  /// Advances all three layers by one slot.
  void step();

  std::int64_t slot() const { return layer1_.slot; }
  const NetworkGraph& graph() const { return graph_; }
  const NetworkGraph& reduced_graph() const { return reduced_; }
  std::span<const Commodity> commodities() const { return commodities_; }
  const CrossLayerConfig& config() const { return config_; }

  const BpState& layer1() const { return layer1_; }
  const SlotTrace& layer1_trace() const { return trace_; }
  const NetRateAccumulator& accumulator() const { return acc_; }
  const std::optional<NetRateSnapshot>& snapshot() const { return snapshot_; }
  const std::vector<CommoditySubgraph>& subgraphs() const { return subgraphs_; }
  const std::vector<AcyclicityCertificate>& certificates() const { return certs_; }
  const RouteTable& routes() const { return routes_; }
  const TokenRateTable& rates() const { return rates_; }
  const SchedulerState& scheduler() const { return sched_; }
  const PacketPool& packets() const { return pool_; }
  const ArrivalEstimator& estimator() const { return estimator_; }
  const std::vector<SnapshotEvent>& events() const { return events_; }
  int h_max() const { return h_max_; }
  double delta() const { return rates_.delta; }

  /// Packets that reached their destination during the last step.
  const std::vector<PacketId>& last_delivered() const { return delivered_now_; }
  const std::vector<ServiceRecord>& last_services() const { return services_; }

  std::int64_t delivered_total() const { return delivered_total_; }
  std::int64_t in_flight() const { return sched_.queues.queued(); }
  std::int64_t held() const { return sched_.queues.held(); }

  /// Cumulative admissions per flattened source, layer 1 and layer 3.
  const std::vector<std::int64_t>& layer1_admitted() const { return l1_admitted_; }
  const std::vector<std::int64_t>& layer3_injected() const { return l3_injected_; }

  /// Slots at which some link had sum_d M >= (|D|+1) c.
  std::int64_t token_region_violations() const { return token_violations_; }

 private:
  void refresh_routes();
  void route_packet(PacketId p, NodeId at);

  NetworkGraph graph_;
  NetworkGraph reduced_;
  std::vector<Commodity> commodities_;
  CrossLayerConfig config_;
  KernelMode mode_;
  CounterRng rng_;

  BpState layer1_;
  SlotTrace trace_;

  NetRateAccumulator acc_;
  std::optional<NetRateSnapshot> snapshot_;
  std::vector<CommoditySubgraph> subgraphs_;
  std::vector<AcyclicityCertificate> certs_;
  RouteTable routes_;
  DeficitSplitter splitter_;
  TokenRateTable rates_;
  int h_max_ = 0;

  SchedulerState sched_;
  PacketPool pool_;
  ArrivalEstimator estimator_;
  std::vector<double> arrivals_now_;
  std::vector<ServiceRecord> services_;
  std::vector<PacketId> delivered_now_;
  std::int64_t delivered_total_ = 0;
  std::vector<std::int64_t> l1_admitted_, l3_injected_;
  std::int64_t token_violations_ = 0;
  std::vector<SnapshotEvent> events_;
};

}  // namespace dacl
