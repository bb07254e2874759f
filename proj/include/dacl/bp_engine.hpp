#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "dacl/netmodel.hpp"
#include "dacl/rng.hpp"

namespace dacl {

enum class BpVariant { Dtbp, MinResource };

struct PolicyConfig {
  double K = 200.0;
  double x_max = 1.0;
  BpVariant variant = BpVariant::Dtbp;
  double M = 0.0;  // weight offset, min-resource only
  std::uint64_t seed = 1;

  void validate() const;
};

/// Per-node per-commodity price counters P_i^d.
class PriceTable {
 public:
  PriceTable() = default;
  PriceTable(int nodes, int commodities)
      : nodes_(nodes), commodities_(commodities), p_(static_cast<std::size_t>(nodes * commodities), 0.0) {}

  int nodes() const { return nodes_; }
  int commodities() const { return commodities_; }
  double& at(NodeId n, CommodityId d) { return p_[static_cast<std::size_t>(n * commodities_ + d)]; }
  double at(NodeId n, CommodityId d) const { return p_[static_cast<std::size_t>(n * commodities_ + d)]; }
  std::span<const double> values() const { return p_; }

  std::int64_t slot = 0;

  bool operator==(const PriceTable&) const = default;

 private:
  int nodes_ = 0;
  int commodities_ = 0;
  std::vector<double> p_;
};

/// Outcome for one bidirectional link in one slot.
struct LinkDecision {
  LinkId link = 0;
  CommodityId commodity = -1;
  ArcId arc = -1;  // transmitting direction
  double rate = 0.0;

  bool active() const { return commodity >= 0 && rate > 0.0; }
  bool operator==(const LinkDecision&) const = default;
};

/// Realized exogenous arrivals, flattened over (commodity, source) pairs in
/// declaration order.
struct ArrivalRecord {
  std::vector<std::int64_t> count;
  std::vector<double> mean;
};

enum class KernelMode { Serial, Parallel };

double flow_control_mean(double price, const UtilitySpec& utility, const PolicyConfig& config);

/// floor(mean) + Bernoulli(frac(mean)) from one uniform draw u in [0, 1).
std::int64_t sample_arrival(double mean, double u);

template <class URBG>
std::int64_t sample_arrival(double mean, URBG& gen) {
  if (mean < 0.0) throw std::invalid_argument("arrival mean must be nonnegative");
  return sample_arrival(mean, std::uniform_real_distribution<double>(0.0, 1.0)(gen));
}

/// Serial reference: per link, pick the commodity with the largest weight
/// |P_i - P_j| (minus M for min-resource), ties uniformly at random, and
/// grant full capacity toward the lower price when the weight is positive.
void decide_links_serial(const PriceTable& prices, const NetworkGraph& graph, const PolicyConfig& config,
                         std::int64_t slot, std::span<LinkDecision> out);

/// OpenMP kernel; bitwise identical to the serial reference.
void decide_links_parallel(const PriceTable& prices, const NetworkGraph& graph, const PolicyConfig& config,
                           std::int64_t slot, std::span<LinkDecision> out);

std::vector<LinkDecision> decide_links(const PriceTable& prices, const NetworkGraph& graph,
                                       const PolicyConfig& config, std::int64_t slot,
                                       KernelMode mode = KernelMode::Serial);

/// P' = (P - out)^+ + X + in; destination entries forced to zero.
PriceTable price_step(const PriceTable& prices, std::span<const LinkDecision> decisions,
                      const ArrivalRecord& arrivals, const NetworkGraph& graph,
                      std::span<const Commodity> commodities);

struct BpState {
  PriceTable prices;
  std::int64_t slot = 0;
};

struct SlotTrace {
  std::int64_t slot = 0;
  std::vector<LinkDecision> decisions;
  ArrivalRecord arrivals;
};

BpState initial_state(const NetworkGraph& graph, std::span<const Commodity> commodities);

/// One slot: flow control and arrival draws, link decisions from the
/// start-of-slot prices, then the price update.
SlotTrace bp_slot(BpState& state, const NetworkGraph& graph, std::span<const Commodity> commodities,
                  const PolicyConfig& config, KernelMode mode = KernelMode::Serial);

/// Running time average of prices, for mean-price diagnostics.
class PriceAverager {
 public:
  PriceAverager() = default;
  PriceAverager(int nodes, int commodities) : sum_(nodes, commodities) {}

  void add(const PriceTable& p);
  std::int64_t samples() const { return samples_; }
  PriceTable mean() const;

 private:
  PriceTable sum_;
  std::int64_t samples_ = 0;
};

/// Owns the graph, commodities, config, and state of a back-pressure run.
class BpEngine {
 public:
  BpEngine(NetworkGraph graph, std::vector<Commodity> commodities, PolicyConfig config,
           KernelMode mode = KernelMode::Serial);

  const SlotTrace& step();

  const NetworkGraph& graph() const { return graph_; }
  std::span<const Commodity> commodities() const { return commodities_; }
  const PolicyConfig& config() const { return config_; }
  const BpState& state() const { return state_; }
  const SlotTrace& last_trace() const { return trace_; }

 private:
  NetworkGraph graph_;
  std::vector<Commodity> commodities_;
  PolicyConfig config_;
  KernelMode mode_;
  BpState state_;
  SlotTrace trace_;
};

}  // namespace dacl
