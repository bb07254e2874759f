#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacl/bp_engine.hpp"
#include "dacl/crosslayer.hpp"
#include "dacl/netmodel.hpp"
#include "dacl/packet.hpp"

namespace dacl {

enum class PolicyKind { Dtbp, MinResource, CrossLayer };

std::string to_string(PolicyKind kind);
/// Accepts dtbp, min-resource, cross-layer (case-insensitive; _ and - interchangeable).
PolicyKind parse_policy(const std::string& name);

struct TopologySpec {
  std::string kind = "grid";  // grid | tandem | custom
  int side = 6;
  int hops = 1;
  double capacity = 1.0;
  int nodes = 0;                                   // custom only
  std::vector<std::pair<NodeId, NodeId>> links;   // custom only
};

struct FlowSpec {
  NodeId src = 0;
  NodeId dst = 0;
  double weight = 1.0;
  std::optional<double> rate;  // fixed admission mean, bypasses flow control
};

struct PolicyParams {
  PolicyKind kind = PolicyKind::Dtbp;
  double K = 200.0;
  double x_max = 1.0;
  double M = 3.0;
  double epsilon = 0.05;
  std::optional<double> delta;
  int window = 5000;
  int period = 5000;
  double threshold = kDefaultRetentionThreshold;
  SplitMode split = SplitMode::Deficit;
  ArrivalEstimate estimate = ArrivalEstimate::Solution;
};

std::string to_string(SplitMode mode);
SplitMode parse_split(const std::string& name);
std::string to_string(ArrivalEstimate estimate);
ArrivalEstimate parse_estimate(const std::string& name);

struct ScenarioConfig {
  std::string name;
  TopologySpec topology;
  std::vector<FlowSpec> commodities;
  PolicyParams policy;
  std::int64_t slots = 30000;
  std::int64_t warmup = 10000;
  std::uint64_t seed = 1;
  int stability_window = 1000;
  double stability_tolerance = 0.05;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_scenario(const std::filesystem::path& path);

NetworkGraph build_network(const ScenarioConfig& cfg);
/// Flows sharing a destination become one commodity, ids in first-seen order.
std::vector<Commodity> build_commodities(const ScenarioConfig& cfg);

/// Plain DTBP (or min-resource) with the price table realised as FIFO packet
/// queues per (node, commodity). Grants move head-of-line packets; the part
/// of a grant beyond the queue content moves nothing.
class BpPacketEngine {
 public:
  BpPacketEngine(NetworkGraph graph, std::vector<Commodity> commodities, PolicyConfig config,
                 KernelMode mode = KernelMode::Serial);

  void step();

  std::int64_t slot() const { return state_.slot; }
  const NetworkGraph& graph() const { return graph_; }
  std::span<const Commodity> commodities() const { return commodities_; }
  const BpState& state() const { return state_; }
  const SlotTrace& last_trace() const { return trace_; }
  const std::deque<PacketId>& queue(NodeId n, CommodityId d) const {
    return queues_[static_cast<std::size_t>(d * graph_.node_count() + n)];
  }
  const PacketPool& packets() const { return pool_; }
  const std::vector<PacketId>& last_delivered() const { return delivered_now_; }
  std::int64_t delivered_total() const { return delivered_total_; }
  std::int64_t in_flight() const;

 private:
  NetworkGraph graph_;
  std::vector<Commodity> commodities_;
  PolicyConfig config_;
  KernelMode mode_;
  BpState state_;
  SlotTrace trace_;
  std::vector<std::deque<PacketId>> queues_;
  PacketPool pool_;
  std::vector<PacketId> delivered_now_;
  std::vector<std::pair<PacketId, NodeId>> staged_;
  std::int64_t delivered_total_ = 0;
};

struct StabilityVerdict {
  std::vector<double> window_means;
  bool stable = true;
  double max_window_mean = 0.0;
};

/// Windowed means of a per-slot trace. With R the largest mean among the
/// first half of the windows, stable iff the final mean is at most
/// R * (1 + tolerance) + abs_slack. Needs at least two full windows.
StabilityVerdict stability_check(std::span<const double> trace, int window, double tolerance,
                                 double abs_slack = 1.0);
/// Same verdict from precomputed window means.
StabilityVerdict stability_from_means(std::vector<double> window_means, double tolerance, double abs_slack = 1.0);

struct HistogramRow {
  CommodityId commodity = 0;
  std::int64_t value = 0;
  std::int64_t count = 0;
  bool operator==(const HistogramRow&) const = default;
};

struct CommodityTotals {
  CommodityId commodity = 0;
  std::int64_t admitted = 0;   // packets born at or after warm-up
  std::int64_t delivered = 0;  // of those, delivered by the end of the run
  std::int64_t delay_sum = 0;
  bool operator==(const CommodityTotals&) const = default;
};

struct SourceRate {
  CommodityId commodity = 0;
  NodeId source = 0;
  std::int64_t admitted = 0;
  double rate = 0.0;
  bool operator==(const SourceRate&) const = default;
};

struct QueueStat {
  NodeId node = 0;
  NodeId neighbor = -1;  // -1 for per-node queues
  CommodityId commodity = 0;
  double mean_len = 0.0;
  std::vector<double> window_means;
  bool stable = true;
  bool operator==(const QueueStat&) const = default;
};

struct NetRateRow {
  CommodityId commodity = 0;
  NodeId from = 0;
  NodeId to = 0;
  double r_hat = 0.0;
  bool operator==(const NetRateRow&) const = default;
};

struct RunDiagnostics {
  std::int64_t max_hops = 0;
  std::int64_t in_flight = 0;
  std::int64_t held = 0;
  std::int64_t snapshots_applied = 0;
  std::int64_t snapshot_cycles = 0;
  std::int64_t snapshot_rejected = 0;
  std::int64_t cyclic_after_warmup = 0;  // applied-or-not snapshots with a cycle after warm-up
  std::int64_t token_violations = 0;  // slots after warm-up with some link at sum M >= (D+1) c
  double max_token_error = 0.0;
  std::int64_t conservation_failures = 0;
  int h_max = 0;
  double delta = 0.0;
  bool operator==(const RunDiagnostics&) const = default;
};

struct RunRecord {
  std::string policy;
  std::uint64_t seed = 0;
  std::int64_t slots = 0;
  std::int64_t warmup = 0;
  std::vector<HistogramRow> delays;
  std::vector<HistogramRow> hops;
  std::vector<CommodityTotals> totals;
  std::vector<SourceRate> rates;
  std::vector<QueueStat> queues;
  bool stable = true;
  double max_window_mean = 0.0;
  std::vector<NetRateRow> netrates;
  RunDiagnostics diagnostics;
  nlohmann::json config;

  std::int64_t delivered() const;
  std::int64_t admitted() const;
  /// Over all commodities when `d` is empty. NaN if nothing was delivered.
  double mean_delay(std::optional<CommodityId> d = std::nullopt) const;
  double delay_variance(std::optional<CommodityId> d = std::nullopt) const;
  /// Fraction of delivered packets with more than `h` hops.
  double fraction_hops_above(std::int64_t h) const;

  bool operator==(const RunRecord&) const = default;
};

PolicyConfig policy_config(const ScenarioConfig& cfg);
CrossLayerConfig crosslayer_config(const ScenarioConfig& cfg);

RunRecord run_scenario(const ScenarioConfig& cfg, KernelMode mode = KernelMode::Serial);

struct KSweepRow {
  std::string policy;
  double K = 0.0;
  double mean_delay = 0.0;
  bool operator==(const KSweepRow&) const = default;
};

/// Runs DTBP and CrossLayer for every K under the base config's seed.
/// Runs fan out over OpenMP threads. Fewer than two K values is invalid.
std::vector<KSweepRow> sweep_k(const ScenarioConfig& base, std::span<const double> ks);

enum class ExportFormat { Csv, Json };
ExportFormat parse_format(const std::string& name);

/// CSV writes delays/hops/queues/netrates tables plus summary.csv,
/// totals.csv, rates.csv, windows.csv and config.json into `dir`; JSON
/// writes record.json.
void export_record(const RunRecord& record, const std::filesystem::path& dir, ExportFormat format);
RunRecord import_record(const std::filesystem::path& dir, ExportFormat format);

nlohmann::json record_to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& j);

void write_ksweep_csv(const std::filesystem::path& file, std::span<const KSweepRow> rows);

}  // namespace dacl
