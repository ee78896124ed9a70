#include "sagin/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <fmt/format.h>

#include "sagin/random.hpp"

namespace sagin {

std::vector<double> buffer_snapshot(const Topology& topo, std::span<const QueueState> ports,
                                    std::span<const NodeId> monitored) {
  if (ports.size() != topo.port_count()) {
    throw SimulationError(fmt::format("buffer_snapshot: {} queue states for {} ports",
                                      ports.size(), topo.port_count()));
  }
  std::vector<double> out;
  out.reserve(monitored.size());
  for (NodeId id : monitored) {
    double occupied = 0.0;
    double total = 0.0;
    for (const auto& nb : topo.neighbors(id)) {
      occupied += ports[nb.port].occupancy;
      total += topo.port_buffer(nb.port);
    }
    out.push_back(total > 0.0 ? std::clamp(1.0 - occupied / total, 0.0, 1.0) : 1.0);
  }
  return out;
}

namespace {

enum class EventKind : std::uint8_t { Generate, TxDone, Arrive, Interval, WindowStart };

struct Event {
  double t;
  std::uint64_t seq;
  std::uint32_t target;
  EventKind kind;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return a.t > b.t || (a.t == b.t && a.seq > b.seq);
  }
};

struct CompiledRoute {
  std::vector<std::uint32_t> ports;
};

struct PacketRec {
  std::uint64_t id = 0;
  double created_at = 0.0;
  std::uint32_t flow = 0;
  std::uint32_t route = 0;
  std::uint32_t hop = 0;
};

struct PortRuntime {
  QueueState q;
  std::vector<std::uint32_t> ring;
  std::uint32_t head = 0;
  double capacity = 0.0;
  double delay = 0.0;
  double tx_start = 0.0;
  double window_bits = 0.0;
  double interval_bits = 0.0;
  int monitored_row = -1;  // egress of a monitored satellite towards MEO/GEO
};

class Simulator {
 public:
  Simulator(const Topology& topo, std::span<const Flow> flows, RoutingPolicy& policy,
            const SimConfig& cfg, const SimHooks& hooks)
      : topo_(topo),
        flows_(flows),
        policy_(policy),
        cfg_(cfg),
        hooks_(hooks),
        monitored_(monitored_satellites(topo)),
        trace_(monitored_reference_capacity(topo, monitored_), cfg.interval_s),
        bits_(cfg.packet_bits) {
    ports_.resize(topo.port_count());
    for (std::uint32_t p = 0; p < ports_.size(); ++p) {
      auto& port = ports_[p];
      port.capacity = topo.port_capacity(p);
      port.delay = topo.port_delay(p);
      port.ring.resize(topo.port_buffer(p));
    }
    for (std::size_t row = 0; row < monitored_.size(); ++row) {
      for (const auto& nb : topo.neighbors(monitored_[row])) {
        const NodeKind k = topo.node(nb.node).kind;
        if (k == NodeKind::Meo || k == NodeKind::Geo) {
          ports_[nb.port].monitored_row = static_cast<int>(row);
        }
      }
    }
    flow_route_.assign(flows.size(), 0);
  }

  MetricsReport run() {
    const double window = cfg_.duration_s - cfg_.warmup_s;
    policy_.prepare(topo_, flows_);
    std::vector<double> idle(monitored_.size(), 1.0);
    IntervalObservation first{0.0, 0, &trace_, idle, IntervalOutcome{}};
    policy_.on_interval(first);
    compile_routes();

    schedule(cfg_.warmup_s, EventKind::WindowStart, 0);
    if (cfg_.interval_s < cfg_.duration_s) schedule(cfg_.interval_s, EventKind::Interval, 1);
    Rng rng(mix_seed(cfg_.seed, 0x9e7));
    for (std::uint32_t i = 0; i < flows_.size(); ++i) {
      const double step = bits_ / peak_rate(flows_[i]);
      const double t0 = align_on(flows_[i], rng.uniform() * step);
      if (t0 < cfg_.duration_s) schedule(t0, EventKind::Generate, i);
    }

    while (!events_.empty() && events_.top().t < cfg_.duration_s) {
      const Event ev = events_.top();
      events_.pop();
      now_ = ev.t;
      switch (ev.kind) {
        case EventKind::Generate: on_generate(ev.target); break;
        case EventKind::TxDone: on_tx_done(ev.target); break;
        case EventKind::Arrive: on_arrive(ev.target); break;
        case EventKind::Interval: on_interval(ev.target); break;
        case EventKind::WindowStart: on_window_start(); break;
      }
      if (generated_ != delivered_ + dropped_ + queued_ + propagating_) {
        throw SimulationError(fmt::format("bit conservation violated at t={}", now_));
      }
    }
    if (!window_started_) on_window_start();

    MetricsReport report;
    report.duration_s = window;
    report.generated_bits = static_cast<double>(generated_ - start_.generated);
    report.delivered_bits = static_cast<double>(delivered_ - start_.delivered);
    report.dropped_bits = static_cast<double>(dropped_ - start_.dropped);
    report.in_flight_start_bits = static_cast<double>(start_.in_flight);
    report.in_flight_end_bits = static_cast<double>(queued_ + propagating_);
    report.throughput_bps = report.delivered_bits / window;
    report.loss_rate =
        report.generated_bits > 0.0 ? report.dropped_bits / report.generated_bits : 0.0;
    report.delivered_packets = delivered_packets_;
    report.mean_delay_s = delivered_packets_ ? delay_sum_ / static_cast<double>(delivered_packets_) : 0.0;
    report.per_link_utilization.resize(ports_.size());
    for (std::size_t p = 0; p < ports_.size(); ++p) {
      // A transmission still on the wire at the horizon counts up to the horizon.
      auto& port = ports_[p];
      double bits = port.window_bits;
      if (port.q.occupancy > 0) {
        const double start = std::max(port.tx_start, cfg_.warmup_s);
        bits += std::max(0.0, cfg_.duration_s - start) * port.capacity;
      }
      report.per_link_utilization[p] = std::clamp(bits / (port.capacity * window), 0.0, 1.0);
    }
    return report;
  }

 private:
  struct Counters {
    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t in_flight = 0;
  };

  static double peak_rate(const Flow& f) {
    return f.burst ? f.rate_bps / f.burst->duty : f.rate_bps;
  }

  static double align_on(const Flow& f, double t) {
    if (!f.burst) return t;
    const BurstParams& b = *f.burst;
    const double pos = std::fmod(t + b.phase_s, b.period_s);
    return pos < b.duty * b.period_s ? t : t + (b.period_s - pos);
  }

  void schedule(double t, EventKind kind, std::uint32_t target) {
    events_.push(Event{t, seq_++, target, kind});
  }

  std::uint32_t intern(const Path& path, std::size_t flow_index) {
    const Flow& f = flows_[flow_index];
    if (path.nodes.size() < 2 || path.nodes.front() != f.src || path.nodes.back() != f.dst) {
      throw SimulationError(fmt::format("flow {}: route {} does not join {} to {}", f.flow_id,
                                        to_string(path), f.src.index, f.dst.index));
    }
    auto [it, fresh] = route_ids_.try_emplace(path.nodes, 0);
    if (!fresh) return it->second;
    CompiledRoute compiled;
    compiled.ports.reserve(path.hops());
    for (std::size_t h = 0; h + 1 < path.nodes.size(); ++h) {
      auto port = topo_.port_between(path.nodes[h], path.nodes[h + 1]);
      if (!port) {
        route_ids_.erase(it);
        throw SimulationError(fmt::format("flow {}: hop {} ({} -> {}) is not a link", f.flow_id, h,
                                          path.nodes[h].index, path.nodes[h + 1].index));
      }
      compiled.ports.push_back(*port);
    }
    it->second = static_cast<std::uint32_t>(routes_.size());
    routes_.push_back(std::move(compiled));
    return it->second;
  }

  void compile_routes() {
    for (std::size_t i = 0; i < flows_.size(); ++i) flow_route_[i] = intern(policy_.route(i), i);
  }

  std::uint32_t alloc_packet(std::uint32_t flow) {
    std::uint32_t idx;
    if (!free_.empty()) {
      idx = free_.back();
      free_.pop_back();
    } else {
      idx = static_cast<std::uint32_t>(packets_.size());
      packets_.emplace_back();
    }
    packets_[idx] = PacketRec{next_packet_id_++, now_, flow, flow_route_[flow], 0};
    return idx;
  }

  void enqueue(std::uint32_t port_index, std::uint32_t pkt) {
    auto& port = ports_[port_index];
    const auto capacity = static_cast<std::uint32_t>(port.ring.size());
    if (port.q.occupancy >= capacity) {
      ++port.q.drops;
      dropped_ += bits_;
      interval_dropped_ += bits_;
      if (hooks_.drop_trace) {
        const Port pt = topo_.port(port_index);
        *hooks_.drop_trace << fmt::format("{} {} {} {}\n", now_, pt.from.index, pt.to.index,
                                          flows_[packets_[pkt].flow].flow_id);
      }
      free_.push_back(pkt);
      return;
    }
    port.ring[(port.head + port.q.occupancy) % capacity] = pkt;
    ++port.q.occupancy;
    queued_ += bits_;
    if (port.q.occupancy == 1) start_tx(port_index);
  }

  void start_tx(std::uint32_t port_index) {
    auto& port = ports_[port_index];
    port.tx_start = now_;
    port.q.busy_until = now_ + bits_ / port.capacity;
    schedule(port.q.busy_until, EventKind::TxDone, port_index);
  }

  void on_generate(std::uint32_t flow) {
    const std::uint32_t pkt = alloc_packet(flow);
    generated_ += bits_;
    interval_generated_ += bits_;
    enqueue(routes_[packets_[pkt].route].ports[0], pkt);
    const Flow& f = flows_[flow];
    const double next = align_on(f, now_ + bits_ / peak_rate(f));
    if (next < cfg_.duration_s) schedule(next, EventKind::Generate, flow);
  }

  void on_tx_done(std::uint32_t port_index) {
    auto& port = ports_[port_index];
    const auto capacity = static_cast<std::uint32_t>(port.ring.size());
    const std::uint32_t pkt = port.ring[port.head];
    port.head = (port.head + 1) % capacity;
    --port.q.occupancy;
    queued_ -= bits_;
    propagating_ += bits_;

    const double lo = std::max(port.tx_start, cfg_.warmup_s);
    if (now_ > lo) port.window_bits += (now_ - lo) * port.capacity;
    port.interval_bits += bits_;

    ++packets_[pkt].hop;
    schedule(now_ + port.delay, EventKind::Arrive, pkt);
    if (port.q.occupancy > 0) start_tx(port_index);
  }

  void on_arrive(std::uint32_t pkt) {
    propagating_ -= bits_;
    PacketRec& rec = packets_[pkt];
    const CompiledRoute& route = routes_[rec.route];
    if (rec.hop == route.ports.size()) {
      delivered_ += bits_;
      if (window_started_) {
        ++delivered_packets_;
        delay_sum_ += now_ - rec.created_at;
      }
      if (hooks_.on_deliver) hooks_.on_deliver(flows_[rec.flow].flow_id, rec.id, rec.created_at, now_);
      free_.push_back(pkt);
      return;
    }
    enqueue(route.ports[rec.hop], pkt);
  }

  void on_window_start() {
    window_started_ = true;
    start_ = Counters{generated_, delivered_, dropped_, queued_ + propagating_};
  }

  void on_interval(std::uint32_t k) {
    std::vector<double> egress(monitored_.size(), 0.0);
    std::uint64_t queued_check = 0;
    for (auto& port : ports_) {
      if (port.monitored_row >= 0) egress[static_cast<std::size_t>(port.monitored_row)] += port.interval_bits;
      port.interval_bits = 0.0;
      queued_check += static_cast<std::uint64_t>(port.q.occupancy) * bits_;
    }
    if (queued_check != queued_) {
      throw SimulationError(fmt::format("queue accounting mismatch at t={}", now_));
    }
    trace_.push_interval(egress);

    std::vector<QueueState> states;
    states.reserve(ports_.size());
    for (const auto& port : ports_) states.push_back(port.q);
    const auto buffers = buffer_snapshot(topo_, states, monitored_);

    IntervalOutcome outcome;
    outcome.generated_bits = static_cast<double>(interval_generated_);
    outcome.dropped_bits = static_cast<double>(interval_dropped_);
    outcome.loss_rate = interval_generated_ ? outcome.dropped_bits / outcome.generated_bits : 0.0;
    outcome.min_buffer = buffers.empty() ? 1.0 : *std::min_element(buffers.begin(), buffers.end());
    interval_generated_ = 0;
    interval_dropped_ = 0;

    IntervalObservation obs{now_, k, &trace_, buffers, outcome};
    if (policy_.on_interval(obs)) compile_routes();
    if (hooks_.on_interval) hooks_.on_interval(now_, buffers);

    const double next = cfg_.interval_s * (k + 1);
    if (next < cfg_.duration_s) schedule(next, EventKind::Interval, k + 1);
  }

  const Topology& topo_;
  std::span<const Flow> flows_;
  RoutingPolicy& policy_;
  const SimConfig& cfg_;
  const SimHooks& hooks_;
  std::vector<NodeId> monitored_;
  LoadTrace trace_;
  const std::uint64_t bits_;

  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;

  std::vector<PortRuntime> ports_;
  std::vector<PacketRec> packets_;
  std::vector<std::uint32_t> free_;
  std::uint64_t next_packet_id_ = 0;

  std::map<std::vector<NodeId>, std::uint32_t> route_ids_;
  std::vector<CompiledRoute> routes_;
  std::vector<std::uint32_t> flow_route_;

  std::uint64_t generated_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
  std::uint64_t queued_ = 0;
  std::uint64_t propagating_ = 0;
  std::uint64_t interval_generated_ = 0;
  std::uint64_t interval_dropped_ = 0;

  bool window_started_ = false;
  Counters start_;
  std::uint64_t delivered_packets_ = 0;
  double delay_sum_ = 0.0;
};

}  // namespace

MetricsReport run_packet_sim(const Topology& topo, std::span<const Flow> flows,
                             RoutingPolicy& policy, const SimConfig& cfg, const SimHooks& hooks) {
  if (!(cfg.duration_s > 0.0)) throw SimulationError("duration must be positive");
  if (!(cfg.warmup_s >= 0.0) || cfg.warmup_s >= cfg.duration_s) {
    throw SimulationError("warm-up must lie in [0, duration)");
  }
  if (cfg.packet_bits == 0) throw SimulationError("packet size must be positive");
  if (!(cfg.interval_s > 0.0)) throw SimulationError("decision interval must be positive");
  Simulator sim(topo, flows, policy, cfg, hooks);
  return sim.run();
}

MetricsReport run_fluid_paths(const Topology& topo, std::span<const FluidFlow> flows) {
  std::vector<std::vector<std::uint32_t>> ports(flows.size());
  std::vector<double> prop(flows.size(), 0.0);
  for (std::size_t f = 0; f < flows.size(); ++f) {
    const Path& path = flows[f].path;
    for (std::size_t h = 0; h + 1 < path.nodes.size(); ++h) {
      auto port = topo.port_between(path.nodes[h], path.nodes[h + 1]);
      if (!port) {
        throw SimulationError(fmt::format("fluid flow {}: hop {} ({} -> {}) is not a link", f, h,
                                          path.nodes[h].index, path.nodes[h + 1].index));
      }
      ports[f].push_back(*port);
      prop[f] += topo.port_delay(*port);
    }
  }

  std::vector<double> survival(topo.port_count(), 1.0);
  std::vector<double> load(topo.port_count(), 0.0);
  for (int iter = 0; iter < 1000; ++iter) {
    std::fill(load.begin(), load.end(), 0.0);
    for (std::size_t f = 0; f < flows.size(); ++f) {
      double rate = flows[f].demand_bps;
      for (auto p : ports[f]) {
        load[p] += rate;
        rate *= survival[p];
      }
    }
    double change = 0.0;
    for (std::size_t p = 0; p < load.size(); ++p) {
      const double cap = topo.port_capacity(static_cast<std::uint32_t>(p));
      const double s = load[p] > cap ? cap / load[p] : 1.0;
      change = std::max(change, std::abs(s - survival[p]));
      survival[p] = s;
    }
    if (change <= 1e-15) break;
  }

  MetricsReport report;
  report.duration_s = 1.0;
  double delay_weight = 0.0;
  for (std::size_t f = 0; f < flows.size(); ++f) {
    double rate = flows[f].demand_bps;
    for (auto p : ports[f]) rate *= survival[p];
    report.generated_bits += flows[f].demand_bps;
    report.delivered_bits += rate;
    delay_weight += rate * prop[f];
  }
  report.dropped_bits = report.generated_bits - report.delivered_bits;
  report.throughput_bps = report.delivered_bits;
  report.loss_rate = report.generated_bits > 0.0 ? report.dropped_bits / report.generated_bits : 0.0;
  report.mean_delay_s = report.delivered_bits > 0.0 ? delay_weight / report.delivered_bits : 0.0;
  report.per_link_utilization.resize(topo.port_count());
  for (std::size_t p = 0; p < load.size(); ++p) {
    const double cap = topo.port_capacity(static_cast<std::uint32_t>(p));
    report.per_link_utilization[p] = std::min(load[p], cap) / cap;
  }
  return report;
}

MetricsReport run_fluid_eval(const Topology& topo, const CombinationSpace& space,
                             const OdDemands& demands, const PathCombination& combo) {
  std::vector<FluidFlow> flows;
  flows.reserve(demands.size());
  for (const auto& [od, bps] : demands) {
    const std::size_t k = space.od_index(od);
    if (k >= combo.paths.size()) {
      throw SimulationError(fmt::format("combination {} has no path for OD ({}, {})",
                                        combo.combo_id, od.origin.index, od.destination.index));
    }
    flows.push_back({combo.paths[k], bps});
  }
  return run_fluid_paths(topo, flows);
}

OdDemands aggregate_od_demands(const Topology& topo, std::span<const Flow> flows) {
  OdDemands out;
  for (const Flow& f : flows) {
    out[OdPair{topo.serving_meo(f.src), topo.serving_meo(f.dst)}] += f.rate_bps;
  }
  return out;
}

}  // namespace sagin
