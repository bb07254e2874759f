#include "dacl/crosslayer.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "dacl/errors.hpp"

namespace dacl {

void CrossLayerConfig::validate(const NetworkGraph& graph) const {
  try {
    policy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(epsilon > 0.0) || !(epsilon < graph.min_capacity())) {
    throw ConfigError("epsilon must lie in (0, min link capacity), got " + std::to_string(epsilon));
  }
  if (delta && !(*delta > 0.0)) throw ConfigError("delta must be positive, got " + std::to_string(*delta));
  if (window < 1) throw ConfigError("window must be positive");
  if (period < 1) throw ConfigError("period must be positive");
  if (threshold < 0.0) throw ConfigError("retention threshold must be nonnegative");
  if (estimator_warmup < 0) throw ConfigError("estimator warm-up must be nonnegative");
}

namespace {

std::vector<CommoditySubgraph> empty_subgraphs(const NetworkGraph& graph, int commodities) {
  std::vector<CommoditySubgraph> subs(static_cast<std::size_t>(commodities));
  for (CommodityId d = 0; d < commodities; ++d) {
    subs[static_cast<std::size_t>(d)].commodity = d;
    subs[static_cast<std::size_t>(d)].nodes = graph.node_count();
  }
  return subs;
}

}  // namespace

CrossLayerEngine::CrossLayerEngine(NetworkGraph graph, std::vector<Commodity> commodities, CrossLayerConfig config,
                                   KernelMode mode)
    : graph_(std::move(graph)),
      commodities_(std::move(commodities)),
      config_(std::move(config)),
      mode_(mode),
      rng_(config_.policy.seed) {
  config_.validate(graph_);
  validate_commodities(graph_, commodities_);
  config_.policy.variant = BpVariant::Dtbp;
  config_.policy.M = 0.0;

  const int D = static_cast<int>(commodities_.size());
  reduced_ = graph_.with_capacity_reduction(config_.epsilon);
  layer1_ = initial_state(reduced_, commodities_);
  acc_ = NetRateAccumulator(reduced_, commodities_, config_.window, config_.period);

  subgraphs_ = empty_subgraphs(graph_, D);
  certs_.assign(static_cast<std::size_t>(D), AcyclicityCertificate{});
  routes_ = RouteTable(graph_, commodities_, subgraphs_);
  splitter_ = DeficitSplitter(routes_);
  rates_.arcs = graph_.arc_count();
  rates_.commodities = D;
  rates_.S.assign(static_cast<std::size_t>(rates_.arcs * D), 0.0);

  sched_ = SchedulerState(graph_, D);
  estimator_ = ArrivalEstimator(graph_.node_count(), D);
  arrivals_now_.assign(static_cast<std::size_t>(graph_.node_count() * D), 0.0);
  services_.resize(static_cast<std::size_t>(graph_.link_count()));
  l1_admitted_.assign(static_cast<std::size_t>(source_count(commodities_)), 0);
  l3_injected_ = l1_admitted_;
}

void CrossLayerEngine::route_packet(PacketId p, NodeId at) {
  const CommodityId d = pool_.at(p).commodity;
  if (routes_.has_route(at, d)) {
    ArcId arc = -1;
    if (config_.split == SplitMode::Deficit) {
      arc = splitter_.pick(routes_, at, d);
    } else {
      arc = routes_.pick(at, d, rng_.uniform(Stream::Split, static_cast<std::uint64_t>(layer1_.slot),
                                             static_cast<std::uint64_t>(p)));
    }
    sched_.queues.queue(arc, d).push_back(p);
  } else {
    sched_.queues.holding(at, d).push_back(p);
  }
}

void CrossLayerEngine::refresh_routes() {
  const int D = static_cast<int>(commodities_.size());
  NetRateSnapshot snap = snapshot_net_rates(acc_, SnapshotMode::MovingWindow);
  SnapshotEvent ev;
  ev.slot = snap.slot;

  std::vector<CommoditySubgraph> subs;
  std::vector<AcyclicityCertificate> certs;
  int h = 0;
  for (CommodityId d = 0; d < D; ++d) {
    subs.push_back(build_subgraph(snap, graph_, d, config_.threshold));
    certs.push_back(check_loop_free(subs.back()));
    if (!certs.back().acyclic) {
      ev.outcome = SnapshotEvent::Outcome::Cycle;
      ev.commodity = d;
      ev.cycle = certs.back().cycle;
      ev.message = "commodity " + std::to_string(d) + " subgraph has a cycle; previous routes kept";
      events_.push_back(std::move(ev));
      return;
    }
    h = std::max(h, certs.back().longest_path);
  }
  h = std::max(h, 1);
  ev.h_max = h;

  const double bound = delta_bound(config_.epsilon, h, D);
  const double delta = config_.delta.value_or(0.5 * bound);
  ev.delta = delta;
  if (!(delta < bound)) {
    ev.outcome = SnapshotEvent::Outcome::Rejected;
    ev.message = "delta " + std::to_string(delta) + " is not below epsilon/(H_max*|D|) = " + std::to_string(bound);
    events_.push_back(std::move(ev));
    return;
  }
  if (config_.estimate == ArrivalEstimate::Observed && estimator_.samples() < config_.estimator_warmup) {
    ev.outcome = SnapshotEvent::Outcome::Rejected;
    ev.message = "arrival estimator still warming up";
    events_.push_back(std::move(ev));
    return;
  }

  RouteTable routes(graph_, commodities_, subs);
  TokenRateTable rates;
  try {
    const std::vector<double> expected =
        config_.estimate == ArrivalEstimate::Solution
            ? expected_arrivals_from_solution(snap, routes, certs, graph_, delta)
            : estimator_.means();
    rates = token_rates(expected, routes, graph_, delta);
  } catch (const ConfigError& e) {
    ev.outcome = SnapshotEvent::Outcome::Rejected;
    ev.message = e.what();
    events_.push_back(std::move(ev));
    return;
  }

  snapshot_ = std::move(snap);
  subgraphs_ = std::move(subs);
  certs_ = std::move(certs);
  routes_ = std::move(routes);
  splitter_ = DeficitSplitter(routes_);
  rates_ = std::move(rates);
  h_max_ = h;
  events_.push_back(std::move(ev));
}

void CrossLayerEngine::step() {
  const std::int64_t t = layer1_.slot;
  const int N = graph_.node_count();
  const int D = static_cast<int>(commodities_.size());

  // Layer 1: virtual DTBP counters on the reduced capacities.
  trace_ = bp_slot(layer1_, reduced_, commodities_, config_.policy, mode_);
  for (std::size_t k = 0; k < l1_admitted_.size(); ++k) l1_admitted_[k] += trace_.arrivals.count[k];

  // Layer 2: moving-window net rates, refreshed at period boundaries.
  acc_.accumulate(trace_);
  if (acc_.snapshot_due()) refresh_routes();

  // Layer 3: token service on full capacities, then arrivals.
  scheduler_slot(sched_, rates_, graph_, services_, mode_);
  for (LinkId l = 0; l < graph_.link_count(); ++l) {
    if (!(sched_.tokens.link_total(l) < static_cast<double>(D + 1) * graph_.capacity(l))) {
      ++token_violations_;
      break;
    }
  }

  std::fill(arrivals_now_.begin(), arrivals_now_.end(), 0.0);
  delivered_now_.clear();
  for (const ServiceRecord& rec : services_) {
    if (!rec.active()) continue;
    const NodeId to = graph_.arc(rec.arc).to;
    const NodeId dest = commodities_[static_cast<std::size_t>(rec.commodity)].destination;
    for (PacketId p : rec.packets) {
      Packet& pk = pool_.at(p);
      ++pk.hops;
      if (to == dest) {
        pk.delivery = t + 1;
        delivered_now_.push_back(p);
        ++delivered_total_;
      } else {
        arrivals_now_[static_cast<std::size_t>(rec.commodity * N + to)] += 1.0;
        route_packet(p, to);
      }
    }
  }

  std::size_t k = 0;
  for (const Commodity& c : commodities_) {
    for (const Source& s : c.sources) {
      const std::int64_t x = trace_.arrivals.count[k];
      for (std::int64_t i = 0; i < x; ++i) route_packet(pool_.create(c.id, s.node, t + 1), s.node);
      arrivals_now_[static_cast<std::size_t>(c.id * N + s.node)] += static_cast<double>(x);
      l3_injected_[k] += x;
      ++k;
    }
  }
  estimator_.observe(arrivals_now_);
}

}  // namespace dacl
