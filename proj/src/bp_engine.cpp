#include "dacl/bp_engine.hpp"

#include <algorithm>
#include <limits>
#include <utility>

namespace dacl {

void PolicyConfig::validate() const {
  if (!(K > 0.0)) throw std::invalid_argument("K must be positive");
  if (!(x_max > 0.0)) throw std::invalid_argument("x_max must be positive");
  if (M < 0.0) throw std::invalid_argument("min-resource offset M must be nonnegative");
}

double flow_control_mean(double price, const UtilitySpec& utility, const PolicyConfig& config) {
  if (price <= 0.0) return config.x_max;
  return std::min(utility.marginal_inverse(price / config.K), config.x_max);
}

std::int64_t sample_arrival(double mean, double u) {
  if (mean < 0.0 || std::isnan(mean)) throw std::invalid_argument("arrival mean must be nonnegative");
  const double whole = std::floor(mean);
  const double frac = mean - whole;
  return static_cast<std::int64_t>(whole) + (u < frac ? 1 : 0);
}

namespace {

LinkDecision decide_one(const PriceTable& prices, const NetworkGraph& graph, const PolicyConfig& config,
                        const CounterRng& rng, std::int64_t slot, LinkId l) {
  const Link& link = graph.link(l);
  const double offset = config.variant == BpVariant::MinResource ? config.M : 0.0;
  const int D = prices.commodities();

  double best = -std::numeric_limits<double>::infinity();
  int ties = 0;
  for (CommodityId d = 0; d < D; ++d) {
    const double w = std::abs(prices.at(link.a, d) - prices.at(link.b, d)) - offset;
    if (w > best) {
      best = w;
      ties = 1;
    } else if (w == best) {
      ++ties;
    }
  }

  LinkDecision out;
  out.link = l;
  if (!(best > 0.0)) return out;

  int pick = ties > 1 ? static_cast<int>(rng.below(static_cast<std::uint32_t>(ties), Stream::TieBreak,
                                                    static_cast<std::uint64_t>(slot),
                                                    static_cast<std::uint64_t>(l)))
                      : 0;
  for (CommodityId d = 0; d < D; ++d) {
    const double diff = prices.at(link.a, d) - prices.at(link.b, d);
    if (std::abs(diff) - offset != best) continue;
    if (pick-- > 0) continue;
    out.commodity = d;
    out.arc = diff > 0.0 ? NetworkGraph::forward_arc(l) : NetworkGraph::forward_arc(l) + 1;
    out.rate = link.capacity;
    break;
  }
  return out;
}

}  // namespace

void decide_links_serial(const PriceTable& prices, const NetworkGraph& graph, const PolicyConfig& config,
                         std::int64_t slot, std::span<LinkDecision> out) {
  const CounterRng rng(config.seed);
  for (LinkId l = 0; l < graph.link_count(); ++l) out[l] = decide_one(prices, graph, config, rng, slot, l);
}

void decide_links_parallel(const PriceTable& prices, const NetworkGraph& graph, const PolicyConfig& config,
                           std::int64_t slot, std::span<LinkDecision> out) {
  const CounterRng rng(config.seed);
  const LinkId links = graph.link_count();
#pragma omp parallel for schedule(static)
  for (LinkId l = 0; l < links; ++l) out[l] = decide_one(prices, graph, config, rng, slot, l);
}

std::vector<LinkDecision> decide_links(const PriceTable& prices, const NetworkGraph& graph,
                                       const PolicyConfig& config, std::int64_t slot, KernelMode mode) {
  std::vector<LinkDecision> out(static_cast<std::size_t>(graph.link_count()));
  if (mode == KernelMode::Parallel) {
    decide_links_parallel(prices, graph, config, slot, out);
  } else {
    decide_links_serial(prices, graph, config, slot, out);
  }
  return out;
}

PriceTable price_step(const PriceTable& prices, std::span<const LinkDecision> decisions,
                      const ArrivalRecord& arrivals, const NetworkGraph& graph,
                      std::span<const Commodity> commodities) {
  const int N = prices.nodes();
  const int D = prices.commodities();
  PriceTable out_rate(N, D), in_rate(N, D);
  for (const LinkDecision& dec : decisions) {
    if (!dec.active()) continue;
    const Arc& arc = graph.arc(dec.arc);
    out_rate.at(arc.from, dec.commodity) += dec.rate;
    in_rate.at(arc.to, dec.commodity) += dec.rate;
  }

  PriceTable next(N, D);
  for (NodeId n = 0; n < N; ++n) {
    for (CommodityId d = 0; d < D; ++d) {
      next.at(n, d) = std::max(prices.at(n, d) - out_rate.at(n, d), 0.0) + in_rate.at(n, d);
    }
  }
  std::size_t k = 0;
  for (const Commodity& c : commodities) {
    for (const Source& s : c.sources) next.at(s.node, c.id) += static_cast<double>(arrivals.count[k++]);
  }
  for (const Commodity& c : commodities) next.at(c.destination, c.id) = 0.0;
  next.slot = prices.slot + 1;
  return next;
}

BpState initial_state(const NetworkGraph& graph, std::span<const Commodity> commodities) {
  BpState s;
  s.prices = PriceTable(graph.node_count(), static_cast<int>(commodities.size()));
  return s;
}

SlotTrace bp_slot(BpState& state, const NetworkGraph& graph, std::span<const Commodity> commodities,
                  const PolicyConfig& config, KernelMode mode) {
  SlotTrace trace;
  trace.slot = state.slot;

  const CounterRng rng(config.seed);
  const int S = source_count(commodities);
  trace.arrivals.count.resize(static_cast<std::size_t>(S));
  trace.arrivals.mean.resize(static_cast<std::size_t>(S));
  std::size_t k = 0;
  for (const Commodity& c : commodities) {
    for (const Source& s : c.sources) {
      const double mean = s.fixed_rate ? *s.fixed_rate
                                       : flow_control_mean(state.prices.at(s.node, c.id), s.utility, config);
      const double u = rng.uniform(Stream::Arrival, static_cast<std::uint64_t>(state.slot), k);
      trace.arrivals.mean[k] = mean;
      trace.arrivals.count[k] = sample_arrival(mean, u);
      ++k;
    }
  }

  trace.decisions = decide_links(state.prices, graph, config, state.slot, mode);
  state.prices = price_step(state.prices, trace.decisions, trace.arrivals, graph, commodities);
  ++state.slot;
  return trace;
}

void PriceAverager::add(const PriceTable& p) {
  for (NodeId n = 0; n < p.nodes(); ++n) {
    for (CommodityId d = 0; d < p.commodities(); ++d) sum_.at(n, d) += p.at(n, d);
  }
  ++samples_;
}

PriceTable PriceAverager::mean() const {
  PriceTable m(sum_.nodes(), sum_.commodities());
  if (samples_ == 0) return m;
  for (NodeId n = 0; n < m.nodes(); ++n) {
    for (CommodityId d = 0; d < m.commodities(); ++d) m.at(n, d) = sum_.at(n, d) / static_cast<double>(samples_);
  }
  return m;
}

BpEngine::BpEngine(NetworkGraph graph, std::vector<Commodity> commodities, PolicyConfig config, KernelMode mode)
    : graph_(std::move(graph)), commodities_(std::move(commodities)), config_(config), mode_(mode) {
  config_.validate();
  validate_commodities(graph_, commodities_);
  state_ = initial_state(graph_, commodities_);
}

const SlotTrace& BpEngine::step() {
  trace_ = bp_slot(state_, graph_, commodities_, config_, mode_);
  return trace_;
}

}  // namespace dacl
