#include "dacl/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "dacl/errors.hpp"

namespace dacl {

using nlohmann::json;

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Dtbp: return "dtbp";
    case PolicyKind::MinResource: return "min-resource";
    case PolicyKind::CrossLayer: return "cross-layer";
  }
  return "unknown";
}

PolicyKind parse_policy(const std::string& name) {
  std::string s;
  for (char c : name) {
    if (c == '_') c = '-';
    s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (s == "dtbp" || s == "backpressure" || s == "back-pressure") return PolicyKind::Dtbp;
  if (s == "min-resource" || s == "minresource") return PolicyKind::MinResource;
  if (s == "cross-layer" || s == "crosslayer") return PolicyKind::CrossLayer;
  throw std::invalid_argument("unknown policy '" + name + "'");
}

std::string to_string(SplitMode mode) { return mode == SplitMode::Deficit ? "deficit" : "random"; }

SplitMode parse_split(const std::string& name) {
  if (name == "random") return SplitMode::Random;
  if (name == "deficit") return SplitMode::Deficit;
  throw std::invalid_argument("unknown split mode '" + name + "'");
}

std::string to_string(ArrivalEstimate estimate) {
  return estimate == ArrivalEstimate::Observed ? "observed" : "solution";
}

ArrivalEstimate parse_estimate(const std::string& name) {
  if (name == "solution") return ArrivalEstimate::Solution;
  if (name == "observed") return ArrivalEstimate::Observed;
  throw std::invalid_argument("unknown arrival estimate '" + name + "'");
}

// ---------------------------------------------------------------------------
// Scenario configuration

void ScenarioConfig::validate() const {
  const auto& t = topology;
  if (t.kind == "grid") {
    if (t.side < 2) throw ConfigError("topology.side must be at least 2");
  } else if (t.kind == "tandem") {
    if (t.hops < 1) throw ConfigError("topology.hops must be at least 1");
  } else if (t.kind == "custom") {
    if (t.nodes < 1) throw ConfigError("topology.nodes must be at least 1");
  } else {
    throw ConfigError("topology.kind must be grid, tandem or custom, got '" + t.kind + "'");
  }
  if (!(t.capacity > 0.0)) throw ConfigError("topology.capacity must be positive");

  const NetworkGraph g = build_network(*this);
  for (std::size_t i = 0; i < commodities.size(); ++i) {
    const FlowSpec& f = commodities[i];
    const std::string where = "commodities[" + std::to_string(i) + "]";
    if (f.src < 0 || f.src >= g.node_count()) throw ConfigError(where + ".src is not a node");
    if (f.dst < 0 || f.dst >= g.node_count()) throw ConfigError(where + ".dst is not a node");
    if (f.src == f.dst) throw ConfigError(where + " has src == dst");
    if (!(f.weight > 0.0)) throw ConfigError(where + ".weight must be positive");
    if (f.rate && !(*f.rate >= 0.0)) throw ConfigError(where + ".rate must be nonnegative");
  }
  try {
    validate_commodities(g, build_commodities(*this));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const PolicyParams& p = policy;
  if (!(p.K > 0.0)) throw ConfigError("policy.K must be positive");
  if (!(p.x_max > 0.0)) throw ConfigError("policy.x_max must be positive");
  if (p.M < 0.0) throw ConfigError("policy.M must be nonnegative");
  if (p.kind == PolicyKind::CrossLayer) {
    if (!(p.epsilon > 0.0) || !(p.epsilon < g.min_capacity())) {
      throw ConfigError("policy.epsilon must lie in (0, min link capacity)");
    }
    if (p.delta && !(*p.delta > 0.0)) throw ConfigError("policy.delta must be positive");
    if (p.window < 1) throw ConfigError("policy.window must be positive");
    if (p.period < 1) throw ConfigError("policy.period must be positive");
    if (p.threshold < 0.0) throw ConfigError("policy.threshold must be nonnegative");
  }
  if (slots < 0) throw ConfigError("slots must be nonnegative");
  if (warmup < 0 || warmup > slots) throw ConfigError("warmup must lie in [0, slots]");
  if (stability_window < 1) throw ConfigError("stability.window must be positive");
  if (stability_tolerance < 0.0) throw ConfigError("stability.tolerance must be nonnegative");
}

namespace {

template <class T>
T field(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + key + " has the wrong type");
  }
}

template <class T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("missing " + where + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + key + " has the wrong type");
  }
}

}  // namespace

ScenarioConfig scenario_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  ScenarioConfig c;
  c.name = field<std::string>(j, "name", "", "");

  if (!j.contains("topology")) throw ConfigError("missing topology");
  const json& t = j.at("topology");
  c.topology.kind = required<std::string>(t, "kind", "topology.");
  c.topology.capacity = field<double>(t, "capacity", "topology.", 1.0);
  if (c.topology.kind == "grid") c.topology.side = required<int>(t, "side", "topology.");
  if (c.topology.kind == "tandem") c.topology.hops = required<int>(t, "hops", "topology.");
  if (c.topology.kind == "custom") {
    c.topology.nodes = required<int>(t, "nodes", "topology.");
    for (const json& l : required<json>(t, "links", "topology.")) {
      if (!l.is_array() || l.size() != 2) throw ConfigError("topology.links entries must be [a, b] pairs");
      c.topology.links.emplace_back(l[0].get<NodeId>(), l[1].get<NodeId>());
    }
  }

  const json flows = field<json>(j, "commodities", "", json::array());
  if (!flows.is_array()) throw ConfigError("commodities must be an array");
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const std::string where = "commodities[" + std::to_string(i) + "].";
    FlowSpec f;
    f.src = required<NodeId>(flows[i], "src", where);
    f.dst = required<NodeId>(flows[i], "dst", where);
    f.weight = field<double>(flows[i], "weight", where, 1.0);
    if (flows[i].contains("rate") && !flows[i].at("rate").is_null()) f.rate = required<double>(flows[i], "rate", where);
    c.commodities.push_back(f);
  }

  const json p = field<json>(j, "policy", "", json::object());
  try {
    c.policy.kind = parse_policy(field<std::string>(p, "kind", "policy.", "dtbp"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("policy.kind: ") + e.what());
  }
  c.policy.K = field<double>(p, "K", "policy.", c.policy.K);
  c.policy.x_max = field<double>(p, "x_max", "policy.", c.policy.x_max);
  c.policy.M = field<double>(p, "M", "policy.", c.policy.M);
  c.policy.epsilon = field<double>(p, "epsilon", "policy.", c.policy.epsilon);
  if (p.contains("delta") && !p.at("delta").is_null()) c.policy.delta = required<double>(p, "delta", "policy.");
  c.policy.window = field<int>(p, "window", "policy.", c.policy.window);
  c.policy.period = field<int>(p, "period", "policy.", c.policy.period);
  c.policy.threshold = field<double>(p, "threshold", "policy.", c.policy.threshold);
  try {
    c.policy.split = parse_split(field<std::string>(p, "split", "policy.", "deficit"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("policy.split: ") + e.what());
  }
  try {
    c.policy.estimate = parse_estimate(field<std::string>(p, "estimate", "policy.", "solution"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("policy.estimate: ") + e.what());
  }

  c.slots = field<std::int64_t>(j, "slots", "", c.slots);
  c.warmup = field<std::int64_t>(j, "warmup", "", c.warmup);
  c.seed = field<std::uint64_t>(j, "seed", "", c.seed);
  const json s = field<json>(j, "stability", "", json::object());
  c.stability_window = field<int>(s, "window", "stability.", c.stability_window);
  c.stability_tolerance = field<double>(s, "tolerance", "stability.", c.stability_tolerance);
  c.validate();
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  json t = {{"kind", c.topology.kind}, {"capacity", c.topology.capacity}};
  if (c.topology.kind == "grid") t["side"] = c.topology.side;
  if (c.topology.kind == "tandem") t["hops"] = c.topology.hops;
  if (c.topology.kind == "custom") {
    t["nodes"] = c.topology.nodes;
    json links = json::array();
    for (const auto& [a, b] : c.topology.links) links.push_back({a, b});
    t["links"] = links;
  }
  json flows = json::array();
  for (const FlowSpec& f : c.commodities) {
    json e = {{"src", f.src}, {"dst", f.dst}, {"weight", f.weight}};
    if (f.rate) e["rate"] = *f.rate;
    flows.push_back(e);
  }
  json p = {{"kind", to_string(c.policy.kind)}, {"K", c.policy.K},           {"x_max", c.policy.x_max},
            {"M", c.policy.M},                  {"epsilon", c.policy.epsilon}, {"window", c.policy.window},
            {"period", c.policy.period},        {"threshold", c.policy.threshold},
            {"split", to_string(c.policy.split)},  {"estimate", to_string(c.policy.estimate)}};
  p["delta"] = c.policy.delta ? json(*c.policy.delta) : json(nullptr);
  return {{"name", c.name},
          {"topology", t},
          {"commodities", flows},
          {"policy", p},
          {"slots", c.slots},
          {"warmup", c.warmup},
          {"seed", c.seed},
          {"stability", {{"window", c.stability_window}, {"tolerance", c.stability_tolerance}}}};
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

NetworkGraph build_network(const ScenarioConfig& cfg) {
  const TopologySpec& t = cfg.topology;
  if (t.kind == "grid") return build_grid(t.side, t.capacity);
  if (t.kind == "tandem") return build_tandem(t.hops, t.capacity);
  if (t.kind == "custom") {
    std::vector<Link> links;
    for (const auto& [a, b] : t.links) links.push_back({a, b, t.capacity});
    try {
      return NetworkGraph(t.nodes, std::move(links));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("topology.links: ") + e.what());
    }
  }
  throw ConfigError("topology.kind must be grid, tandem or custom, got '" + t.kind + "'");
}

std::vector<Commodity> build_commodities(const ScenarioConfig& cfg) {
  std::vector<Commodity> out;
  for (const FlowSpec& f : cfg.commodities) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Commodity& c) { return c.destination == f.dst; });
    if (it == out.end()) {
      out.push_back({static_cast<CommodityId>(out.size()), f.dst, {}});
      it = out.end() - 1;
    }
    it->sources.push_back({f.src, UtilitySpec{f.weight}, f.rate});
  }
  return out;
}

// ---------------------------------------------------------------------------
// DTBP with real packets

BpPacketEngine::BpPacketEngine(NetworkGraph graph, std::vector<Commodity> commodities, PolicyConfig config,
                               KernelMode mode)
    : graph_(std::move(graph)), commodities_(std::move(commodities)), config_(config), mode_(mode) {
  config_.validate();
  validate_commodities(graph_, commodities_);
  state_ = initial_state(graph_, commodities_);
  queues_.resize(static_cast<std::size_t>(graph_.node_count()) * commodities_.size());
}

std::int64_t BpPacketEngine::in_flight() const {
  std::int64_t n = 0;
  for (const auto& q : queues_) n += static_cast<std::int64_t>(q.size());
  return n;
}

void BpPacketEngine::step() {
  const std::int64_t t = state_.slot;
  const int N = graph_.node_count();
  trace_ = bp_slot(state_, graph_, commodities_, config_, mode_);

  // All head-of-line moves are taken from start-of-slot queues first.
  staged_.clear();
  for (const LinkDecision& dec : trace_.decisions) {
    if (!dec.active()) continue;
    const Arc& arc = graph_.arc(dec.arc);
    auto& q = queues_[static_cast<std::size_t>(dec.commodity * N + arc.from)];
    const auto k = static_cast<std::size_t>(std::floor(dec.rate + 1e-9));
    for (std::size_t i = 0; i < k && !q.empty(); ++i) {
      staged_.emplace_back(q.front(), arc.to);
      q.pop_front();
    }
  }

  delivered_now_.clear();
  for (const auto& [p, to] : staged_) {
    Packet& pk = pool_.at(p);
    ++pk.hops;
    if (to == commodities_[static_cast<std::size_t>(pk.commodity)].destination) {
      pk.delivery = t + 1;
      delivered_now_.push_back(p);
      ++delivered_total_;
    } else {
      queues_[static_cast<std::size_t>(pk.commodity * N + to)].push_back(p);
    }
  }

  std::size_t k = 0;
  for (const Commodity& c : commodities_) {
    for (const Source& s : c.sources) {
      auto& q = queues_[static_cast<std::size_t>(c.id * N + s.node)];
      for (std::int64_t i = 0; i < trace_.arrivals.count[k]; ++i) q.push_back(pool_.create(c.id, s.node, t + 1));
      ++k;
    }
  }
}

// ---------------------------------------------------------------------------
// Stability

StabilityVerdict stability_from_means(std::vector<double> window_means, double tolerance, double abs_slack) {
  if (window_means.size() < 2) throw NotReady("stability check needs at least two full windows");
  StabilityVerdict v;
  const std::size_t half = (window_means.size() + 1) / 2;
  const double ref = *std::max_element(window_means.begin(), window_means.begin() + static_cast<std::ptrdiff_t>(half));
  v.max_window_mean = *std::max_element(window_means.begin(), window_means.end());
  v.stable = window_means.back() <= ref * (1.0 + tolerance) + abs_slack;
  v.window_means = std::move(window_means);
  return v;
}

StabilityVerdict stability_check(std::span<const double> trace, int window, double tolerance, double abs_slack) {
  if (window < 1) throw std::invalid_argument("stability window must be positive");
  const std::size_t w = static_cast<std::size_t>(window);
  if (trace.size() < 2 * w) throw NotReady("stability check needs a trace of at least two windows");
  std::vector<double> means;
  for (std::size_t s = 0; s + w <= trace.size(); s += w) {
    double sum = 0.0;
    for (std::size_t i = s; i < s + w; ++i) sum += trace[i];
    means.push_back(sum / static_cast<double>(w));
  }
  return stability_from_means(std::move(means), tolerance, abs_slack);
}

// ---------------------------------------------------------------------------
// Run records

std::int64_t RunRecord::delivered() const {
  std::int64_t n = 0;
  for (const auto& t : totals) n += t.delivered;
  return n;
}

std::int64_t RunRecord::admitted() const {
  std::int64_t n = 0;
  for (const auto& t : totals) n += t.admitted;
  return n;
}

double RunRecord::mean_delay(std::optional<CommodityId> d) const {
  std::int64_t n = 0, sum = 0;
  for (const auto& t : totals) {
    if (d && t.commodity != *d) continue;
    n += t.delivered;
    sum += t.delay_sum;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(sum) / static_cast<double>(n);
}

double RunRecord::delay_variance(std::optional<CommodityId> d) const {
  const double mu = mean_delay(d);
  if (std::isnan(mu)) return mu;
  double acc = 0.0;
  std::int64_t n = 0;
  for (const auto& r : delays) {
    if (d && r.commodity != *d) continue;
    const double e = static_cast<double>(r.value) - mu;
    acc += e * e * static_cast<double>(r.count);
    n += r.count;
  }
  return acc / static_cast<double>(n);
}

double RunRecord::fraction_hops_above(std::int64_t h) const {
  std::int64_t above = 0, n = 0;
  for (const auto& r : hops) {
    n += r.count;
    if (r.value > h) above += r.count;
  }
  return n == 0 ? 0.0 : static_cast<double>(above) / static_cast<double>(n);
}

PolicyConfig policy_config(const ScenarioConfig& cfg) {
  PolicyConfig p;
  p.K = cfg.policy.K;
  p.x_max = cfg.policy.x_max;
  p.seed = cfg.seed;
  if (cfg.policy.kind == PolicyKind::MinResource) {
    p.variant = BpVariant::MinResource;
    p.M = cfg.policy.M;
  }
  return p;
}

CrossLayerConfig crosslayer_config(const ScenarioConfig& cfg) {
  CrossLayerConfig cl;
  cl.policy = policy_config(cfg);
  cl.epsilon = cfg.policy.epsilon;
  cl.delta = cfg.policy.delta;
  cl.window = cfg.policy.window;
  cl.period = cfg.policy.period;
  cl.threshold = cfg.policy.threshold;
  cl.split = cfg.policy.split;
  cl.estimate = cfg.policy.estimate;
  return cl;
}

namespace {

// Per-queue length series after warm-up: running mean and full-window means.
class QueueMeter {
 public:
  QueueMeter(std::size_t queues, int window) : window_(window), sum_(queues, 0.0), win_(queues, 0.0), means_(queues) {}

  template <class LengthOf>
  void sample(LengthOf&& length_of) {
    for (std::size_t q = 0; q < sum_.size(); ++q) {
      const double len = static_cast<double>(length_of(q));
      sum_[q] += len;
      win_[q] += len;
    }
    ++samples_;
    if (++in_window_ == window_) {
      for (std::size_t q = 0; q < sum_.size(); ++q) {
        means_[q].push_back(win_[q] / static_cast<double>(window_));
        win_[q] = 0.0;
      }
      in_window_ = 0;
    }
  }

  double mean(std::size_t q) const { return samples_ == 0 ? 0.0 : sum_[q] / static_cast<double>(samples_); }
  const std::vector<double>& window_means(std::size_t q) const { return means_[q]; }

 private:
  int window_;
  int in_window_ = 0;
  std::int64_t samples_ = 0;
  std::vector<double> sum_, win_;
  std::vector<std::vector<double>> means_;
};

void finish_queues(RunRecord& rec, const QueueMeter& meter, std::vector<QueueStat> stats, double tolerance) {
  rec.stable = true;
  rec.max_window_mean = 0.0;
  for (std::size_t q = 0; q < stats.size(); ++q) {
    QueueStat& s = stats[q];
    s.mean_len = meter.mean(q);
    s.window_means = meter.window_means(q);
    if (s.window_means.size() >= 2) {
      const StabilityVerdict v = stability_from_means(s.window_means, tolerance);
      s.stable = v.stable;
      rec.max_window_mean = std::max(rec.max_window_mean, v.max_window_mean);
    }
    rec.stable = rec.stable && s.stable;
  }
  rec.queues = std::move(stats);
}

void collect_packets(RunRecord& rec, const PacketPool& pool, std::span<const Commodity> commodities,
                     std::int64_t warmup, std::int64_t slots) {
  std::map<std::pair<CommodityId, std::int64_t>, std::int64_t> delays, hops;
  std::map<std::pair<CommodityId, NodeId>, std::int64_t> per_source;
  rec.totals.clear();
  for (const Commodity& c : commodities) {
    rec.totals.push_back({c.id, 0, 0, 0});
    for (const Source& s : c.sources) per_source[{c.id, s.node}] = 0;
  }
  for (std::int64_t id = 0; id < pool.size(); ++id) {
    const Packet& p = pool.at(id);
    if (p.delivery >= 0) rec.diagnostics.max_hops = std::max<std::int64_t>(rec.diagnostics.max_hops, p.hops);
    if (p.birth <= warmup) continue;
    CommodityTotals& t = rec.totals[static_cast<std::size_t>(p.commodity)];
    ++t.admitted;
    ++per_source[{p.commodity, p.source}];
    if (p.delivery < 0) continue;
    ++t.delivered;
    t.delay_sum += p.delivery - p.birth;
    ++delays[{p.commodity, p.delivery - p.birth}];
    ++hops[{p.commodity, p.hops}];
  }
  for (const auto& [k, n] : delays) rec.delays.push_back({k.first, k.second, n});
  for (const auto& [k, n] : hops) rec.hops.push_back({k.first, k.second, n});
  const double horizon = static_cast<double>(slots - warmup);
  for (const auto& [k, n] : per_source) {
    rec.rates.push_back({k.first, k.second, n, horizon > 0.0 ? static_cast<double>(n) / horizon : 0.0});
  }
}

void add_netrates(RunRecord& rec, const NetRateSnapshot& snap, const NetworkGraph& graph) {
  for (CommodityId d = 0; d < snap.commodities; ++d) {
    for (ArcId a = 0; a < snap.arcs; ++a) {
      const double r = snap.at(d, a);
      if (r > 0.0) rec.netrates.push_back({d, graph.arc(a).from, graph.arc(a).to, r});
    }
  }
}

RunRecord run_backpressure(const ScenarioConfig& cfg, const NetworkGraph& graph, std::vector<Commodity> commodities,
                           KernelMode mode, RunRecord rec) {
  const int N = graph.node_count();
  const int D = static_cast<int>(commodities.size());
  BpPacketEngine engine(graph, commodities, policy_config(cfg), mode);
  NetRateAccumulator acc(graph, commodities, 1, 1);
  QueueMeter meter(static_cast<std::size_t>(N * D), cfg.stability_window);

  for (std::int64_t t = 0; t < cfg.slots; ++t) {
    engine.step();
    acc.accumulate(engine.last_trace());
    if (engine.packets().size() != engine.delivered_total() + engine.in_flight()) {
      ++rec.diagnostics.conservation_failures;
    }
    if (t >= cfg.warmup) {
      meter.sample([&](std::size_t q) {
        return engine.queue(static_cast<NodeId>(q % static_cast<std::size_t>(N)),
                            static_cast<CommodityId>(q / static_cast<std::size_t>(N)))
            .size();
      });
    }
  }

  std::vector<QueueStat> stats;
  for (CommodityId d = 0; d < D; ++d) {
    for (NodeId n = 0; n < N; ++n) stats.push_back({n, -1, d, 0.0, {}, true});
  }
  finish_queues(rec, meter, std::move(stats), cfg.stability_tolerance);
  collect_packets(rec, engine.packets(), commodities, cfg.warmup, cfg.slots);
  if (cfg.slots > 0) add_netrates(rec, snapshot_net_rates(acc, SnapshotMode::FullHistory), graph);
  rec.diagnostics.in_flight = engine.in_flight();
  return rec;
}

RunRecord run_crosslayer(const ScenarioConfig& cfg, const NetworkGraph& graph, std::vector<Commodity> commodities,
                         KernelMode mode, RunRecord rec) {
  CrossLayerEngine engine(graph, commodities, crosslayer_config(cfg), mode);

  const int A = graph.arc_count();
  const int D = static_cast<int>(commodities.size());
  QueueMeter meter(static_cast<std::size_t>(A * D), cfg.stability_window);
  const SchedulerState& sched = engine.scheduler();

  std::int64_t violations_at_warmup = 0;
  for (std::int64_t t = 0; t < cfg.slots; ++t) {
    if (t == cfg.warmup) violations_at_warmup = engine.token_region_violations();
    engine.step();
    if (engine.packets().size() != engine.delivered_total() + engine.in_flight() + engine.held()) {
      ++rec.diagnostics.conservation_failures;
    }
    if (engine.layer1_admitted() != engine.layer3_injected()) ++rec.diagnostics.conservation_failures;
    rec.diagnostics.max_token_error = std::max(rec.diagnostics.max_token_error, sched.tokens.max_conservation_error());
    if (t >= cfg.warmup) {
      meter.sample([&](std::size_t q) {
        return sched.queues
            .queue(static_cast<ArcId>(q % static_cast<std::size_t>(A)),
                   static_cast<CommodityId>(q / static_cast<std::size_t>(A)))
            .size();
      });
    }
  }

  std::vector<QueueStat> stats;
  for (CommodityId d = 0; d < D; ++d) {
    for (ArcId a = 0; a < A; ++a) stats.push_back({graph.arc(a).from, graph.arc(a).to, d, 0.0, {}, true});
  }
  finish_queues(rec, meter, std::move(stats), cfg.stability_tolerance);
  collect_packets(rec, engine.packets(), commodities, cfg.warmup, cfg.slots);
  if (engine.snapshot()) add_netrates(rec, *engine.snapshot(), graph);

  RunDiagnostics& dg = rec.diagnostics;
  dg.in_flight = engine.in_flight();
  dg.held = engine.held();
  if (cfg.warmup >= cfg.slots) violations_at_warmup = engine.token_region_violations();
  dg.token_violations = engine.token_region_violations() - violations_at_warmup;
  dg.h_max = engine.h_max();
  dg.delta = engine.delta();
  for (const SnapshotEvent& ev : engine.events()) {
    switch (ev.outcome) {
      case SnapshotEvent::Outcome::Applied: ++dg.snapshots_applied; break;
      case SnapshotEvent::Outcome::Cycle:
        ++dg.snapshot_cycles;
        if (ev.slot >= cfg.warmup) ++dg.cyclic_after_warmup;
        break;
      case SnapshotEvent::Outcome::Rejected: ++dg.snapshot_rejected; break;
    }
  }
  return rec;
}

}  // namespace

RunRecord run_scenario(const ScenarioConfig& cfg, KernelMode mode) {
  cfg.validate();
  const NetworkGraph graph = build_network(cfg);
  std::vector<Commodity> commodities = build_commodities(cfg);

  RunRecord rec;
  rec.policy = to_string(cfg.policy.kind);
  rec.seed = cfg.seed;
  rec.slots = cfg.slots;
  rec.warmup = cfg.warmup;
  rec.config = scenario_to_json(cfg);
  if (cfg.policy.kind == PolicyKind::CrossLayer) {
    return run_crosslayer(cfg, graph, std::move(commodities), mode, std::move(rec));
  }
  return run_backpressure(cfg, graph, std::move(commodities), mode, std::move(rec));
}

std::vector<KSweepRow> sweep_k(const ScenarioConfig& base, std::span<const double> ks) {
  if (ks.size() < 2) throw std::invalid_argument("a K sweep needs at least two K values");
  const PolicyKind kinds[] = {PolicyKind::Dtbp, PolicyKind::CrossLayer};
  const int tasks = static_cast<int>(ks.size()) * 2;
  std::vector<KSweepRow> rows(static_cast<std::size_t>(tasks));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(tasks));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < tasks; ++i) {
    try {
      ScenarioConfig cfg = base;
      cfg.policy.kind = kinds[i % 2];
      cfg.policy.K = ks[static_cast<std::size_t>(i / 2)];
      const RunRecord rec = run_scenario(cfg);
      rows[static_cast<std::size_t>(i)] = {to_string(cfg.policy.kind), cfg.policy.K, rec.mean_delay()};
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const KSweepRow& a, const KSweepRow& b) { return a.policy < b.policy; });
  return rows;
}

// ---------------------------------------------------------------------------
// Persistence

ExportFormat parse_format(const std::string& name) {
  if (name == "csv") return ExportFormat::Csv;
  if (name == "json") return ExportFormat::Json;
  throw std::invalid_argument("unknown export format '" + name + "'");
}

namespace {

json hist_json(const std::vector<HistogramRow>& rows) {
  json a = json::array();
  for (const auto& r : rows) a.push_back({r.commodity, r.value, r.count});
  return a;
}

std::vector<HistogramRow> hist_from(const json& a) {
  std::vector<HistogramRow> rows;
  for (const auto& r : a) rows.push_back({r[0].get<CommodityId>(), r[1].get<std::int64_t>(), r[2].get<std::int64_t>()});
  return rows;
}

json diag_json(const RunDiagnostics& d) {
  return {{"max_hops", d.max_hops},
          {"in_flight", d.in_flight},
          {"held", d.held},
          {"snapshots_applied", d.snapshots_applied},
          {"snapshot_cycles", d.snapshot_cycles},
          {"snapshot_rejected", d.snapshot_rejected},
          {"cyclic_after_warmup", d.cyclic_after_warmup},
          {"token_violations", d.token_violations},
          {"max_token_error", d.max_token_error},
          {"conservation_failures", d.conservation_failures},
          {"h_max", d.h_max},
          {"delta", d.delta}};
}

RunDiagnostics diag_from(const json& j) {
  RunDiagnostics d;
  d.max_hops = j.at("max_hops").get<std::int64_t>();
  d.in_flight = j.at("in_flight").get<std::int64_t>();
  d.held = j.at("held").get<std::int64_t>();
  d.snapshots_applied = j.at("snapshots_applied").get<std::int64_t>();
  d.snapshot_cycles = j.at("snapshot_cycles").get<std::int64_t>();
  d.snapshot_rejected = j.at("snapshot_rejected").get<std::int64_t>();
  d.cyclic_after_warmup = j.at("cyclic_after_warmup").get<std::int64_t>();
  d.token_violations = j.at("token_violations").get<std::int64_t>();
  d.max_token_error = j.at("max_token_error").get<double>();
  d.conservation_failures = j.at("conservation_failures").get<std::int64_t>();
  d.h_max = j.at("h_max").get<int>();
  d.delta = j.at("delta").get<double>();
  return d;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.precision(17);
  return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return in;
}

// Rows of a simple comma-separated file with a header line.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::ifstream in = open_in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(p.string() + " has no header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

void expect_cells(const std::vector<std::string>& row, std::size_t n, const std::filesystem::path& p) {
  if (row.size() != n) throw std::runtime_error(p.string() + ": expected " + std::to_string(n) + " columns");
}

}  // namespace

json record_to_json(const RunRecord& r) {
  json queues = json::array();
  for (const auto& q : r.queues) {
    queues.push_back({{"node", q.node},
                      {"neighbor", q.neighbor},
                      {"commodity", q.commodity},
                      {"mean_len", q.mean_len},
                      {"window_means", q.window_means},
                      {"stable", q.stable}});
  }
  json totals = json::array();
  for (const auto& t : r.totals) totals.push_back({t.commodity, t.admitted, t.delivered, t.delay_sum});
  json rates = json::array();
  for (const auto& s : r.rates) rates.push_back({{"commodity", s.commodity}, {"source", s.source}, {"admitted", s.admitted}, {"rate", s.rate}});
  json net = json::array();
  for (const auto& n : r.netrates) net.push_back({n.commodity, n.from, n.to, n.r_hat});
  return {{"policy", r.policy},     {"seed", r.seed},          {"slots", r.slots},
          {"warmup", r.warmup},     {"delays", hist_json(r.delays)}, {"hops", hist_json(r.hops)},
          {"totals", totals},       {"rates", rates},          {"queues", queues},
          {"stable", r.stable},     {"max_window_mean", r.max_window_mean},
          {"netrates", net},        {"diagnostics", diag_json(r.diagnostics)}, {"config", r.config}};
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.policy = j.at("policy").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.slots = j.at("slots").get<std::int64_t>();
  r.warmup = j.at("warmup").get<std::int64_t>();
  r.delays = hist_from(j.at("delays"));
  r.hops = hist_from(j.at("hops"));
  for (const auto& t : j.at("totals")) {
    r.totals.push_back({t[0].get<CommodityId>(), t[1].get<std::int64_t>(), t[2].get<std::int64_t>(), t[3].get<std::int64_t>()});
  }
  for (const auto& s : j.at("rates")) {
    r.rates.push_back({s.at("commodity").get<CommodityId>(), s.at("source").get<NodeId>(),
                       s.at("admitted").get<std::int64_t>(), s.at("rate").get<double>()});
  }
  for (const auto& q : j.at("queues")) {
    r.queues.push_back({q.at("node").get<NodeId>(), q.at("neighbor").get<NodeId>(), q.at("commodity").get<CommodityId>(),
                        q.at("mean_len").get<double>(), q.at("window_means").get<std::vector<double>>(),
                        q.at("stable").get<bool>()});
  }
  r.stable = j.at("stable").get<bool>();
  r.max_window_mean = j.at("max_window_mean").get<double>();
  for (const auto& n : j.at("netrates")) {
    r.netrates.push_back({n[0].get<CommodityId>(), n[1].get<NodeId>(), n[2].get<NodeId>(), n[3].get<double>()});
  }
  r.diagnostics = diag_from(j.at("diagnostics"));
  r.config = j.at("config");
  return r;
}

void export_record(const RunRecord& r, const std::filesystem::path& dir, ExportFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  if (format == ExportFormat::Json) {
    std::ofstream out = open_out(dir / "record.json");
    out << record_to_json(r).dump(1) << '\n';
    if (!out) throw std::runtime_error("write failed for " + (dir / "record.json").string());
    return;
  }

  {
    std::ofstream out = open_out(dir / "delays.csv");
    out << "commodity,delay_slots,count\n";
    for (const auto& h : r.delays) out << h.commodity << ',' << h.value << ',' << h.count << '\n';
  }
  {
    std::ofstream out = open_out(dir / "hops.csv");
    out << "commodity,hops,count\n";
    for (const auto& h : r.hops) out << h.commodity << ',' << h.value << ',' << h.count << '\n';
  }
  {
    std::ofstream out = open_out(dir / "queues.csv");
    out << "node,neighbor,commodity,mean_len\n";
    for (const auto& q : r.queues) out << q.node << ',' << q.neighbor << ',' << q.commodity << ',' << q.mean_len << '\n';
  }
  {
    std::ofstream out = open_out(dir / "windows.csv");
    out << "queue,window,mean,stable\n";
    for (std::size_t i = 0; i < r.queues.size(); ++i) {
      const auto& q = r.queues[i];
      if (q.window_means.empty()) out << i << ",-1,0," << q.stable << '\n';
      for (std::size_t w = 0; w < q.window_means.size(); ++w) {
        out << i << ',' << w << ',' << q.window_means[w] << ',' << q.stable << '\n';
      }
    }
  }
  {
    std::ofstream out = open_out(dir / "netrates.csv");
    out << "commodity,from,to,r_hat\n";
    for (const auto& n : r.netrates) out << n.commodity << ',' << n.from << ',' << n.to << ',' << n.r_hat << '\n';
  }
  {
    std::ofstream out = open_out(dir / "totals.csv");
    out << "commodity,admitted,delivered,delay_sum\n";
    for (const auto& t : r.totals) out << t.commodity << ',' << t.admitted << ',' << t.delivered << ',' << t.delay_sum << '\n';
  }
  {
    std::ofstream out = open_out(dir / "rates.csv");
    out << "commodity,source,admitted,rate\n";
    for (const auto& s : r.rates) out << s.commodity << ',' << s.source << ',' << s.admitted << ',' << s.rate << '\n';
  }
  {
    std::ofstream out = open_out(dir / "summary.csv");
    out << "key,value\n";
    out << "policy," << r.policy << "\nseed," << r.seed << "\nslots," << r.slots << "\nwarmup," << r.warmup
        << "\nstable," << r.stable << "\nmax_window_mean," << r.max_window_mean << '\n';
    const nlohmann::json diag = diag_json(r.diagnostics);
    for (const auto& [k, v] : diag.items()) out << k << ',' << v.dump() << '\n';
  }
  {
    std::ofstream out = open_out(dir / "config.json");
    out << r.config.dump(1) << '\n';
  }
}

RunRecord import_record(const std::filesystem::path& dir, ExportFormat format) {
  if (format == ExportFormat::Json) {
    std::ifstream in = open_in(dir / "record.json");
    try {
      return record_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw std::runtime_error((dir / "record.json").string() + ": " + e.what());
    }
  }

  RunRecord r;
  std::map<std::string, std::string> kv;
  for (const auto& row : read_csv(dir / "summary.csv")) {
    expect_cells(row, 2, dir / "summary.csv");
    kv[row[0]] = row[1];
  }
  r.policy = kv.at("policy");
  r.seed = std::stoull(kv.at("seed"));
  r.slots = std::stoll(kv.at("slots"));
  r.warmup = std::stoll(kv.at("warmup"));
  r.stable = kv.at("stable") == "1";
  r.max_window_mean = std::stod(kv.at("max_window_mean"));
  json dj = json::object();
  for (const auto& key : {"max_hops", "in_flight", "held", "snapshots_applied", "snapshot_cycles", "snapshot_rejected",
                          "cyclic_after_warmup", "token_violations", "max_token_error", "conservation_failures",
                          "h_max", "delta"}) {
    dj[key] = json::parse(kv.at(key));
  }
  r.diagnostics = diag_from(dj);

  for (const auto& row : read_csv(dir / "delays.csv")) {
    expect_cells(row, 3, dir / "delays.csv");
    r.delays.push_back({std::stoi(row[0]), std::stoll(row[1]), std::stoll(row[2])});
  }
  for (const auto& row : read_csv(dir / "hops.csv")) {
    expect_cells(row, 3, dir / "hops.csv");
    r.hops.push_back({std::stoi(row[0]), std::stoll(row[1]), std::stoll(row[2])});
  }
  for (const auto& row : read_csv(dir / "queues.csv")) {
    expect_cells(row, 4, dir / "queues.csv");
    r.queues.push_back({std::stoi(row[0]), std::stoi(row[1]), std::stoi(row[2]), std::stod(row[3]), {}, true});
  }
  for (const auto& row : read_csv(dir / "windows.csv")) {
    expect_cells(row, 4, dir / "windows.csv");
    QueueStat& q = r.queues.at(std::stoul(row[0]));
    if (row[1] != "-1") q.window_means.push_back(std::stod(row[2]));
    q.stable = row[3] == "1";
  }
  for (const auto& row : read_csv(dir / "netrates.csv")) {
    expect_cells(row, 4, dir / "netrates.csv");
    r.netrates.push_back({std::stoi(row[0]), std::stoi(row[1]), std::stoi(row[2]), std::stod(row[3])});
  }
  for (const auto& row : read_csv(dir / "totals.csv")) {
    expect_cells(row, 4, dir / "totals.csv");
    r.totals.push_back({std::stoi(row[0]), std::stoll(row[1]), std::stoll(row[2]), std::stoll(row[3])});
  }
  for (const auto& row : read_csv(dir / "rates.csv")) {
    expect_cells(row, 4, dir / "rates.csv");
    r.rates.push_back({std::stoi(row[0]), std::stoi(row[1]), std::stoll(row[2]), std::stod(row[3])});
  }
  std::ifstream cfg = open_in(dir / "config.json");
  r.config = json::parse(cfg);
  return r;
}

void write_ksweep_csv(const std::filesystem::path& file, std::span<const KSweepRow> rows) {
  std::ofstream out = open_out(file);
  out << "policy,K,mean_delay\n";
  for (const auto& r : rows) out << r.policy << ',' << r.K << ',' << r.mean_delay << '\n';
}

}  // namespace dacl
