#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#include "sagin/routing.hpp"
#include "sagin/topology.hpp"
#include "sagin/traffic.hpp"

namespace sagin {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QueueState {
  std::uint32_t occupancy = 0;  // packets queued, including the one on the wire
  std::uint64_t drops = 0;
  double busy_until = 0.0;
};

// Metrics over the measurement window [warmup, horizon).
//
// Counters are event-time: bits generated, delivered, and dropped inside the
// window. Conservation reads
//   in_flight_start + generated = delivered + dropped + in_flight_end.
struct MetricsReport {
  double duration_s = 0.0;
  double generated_bits = 0.0;
  double delivered_bits = 0.0;
  double dropped_bits = 0.0;
  double in_flight_start_bits = 0.0;
  double in_flight_end_bits = 0.0;
  double throughput_bps = 0.0;
  double loss_rate = 0.0;
  double mean_delay_s = 0.0;
  std::uint64_t delivered_packets = 0;
  std::vector<double> per_link_utilization;  // indexed by port

  bool conserves_bits() const {
    return in_flight_start_bits + generated_bits ==
           delivered_bits + dropped_bits + in_flight_end_bits;
  }
};

struct SimConfig {
  double duration_s = 60.0;
  double warmup_s = 5.0;
  std::uint32_t packet_bits = 12000;
  double interval_s = 1.0;
  std::uint64_t seed = 1;

  bool operator==(const SimConfig&) const = default;
};

struct SimHooks {
  // Drop trace lines: "t_s link_src link_dst flow_id".
  std::ostream* drop_trace = nullptr;
  std::function<void(std::uint32_t flow_id, std::uint64_t packet_id, double created_at, double t)>
      on_deliver;
  // Called after every decision interval with the remaining-buffer fractions of
  // the monitored satellites.
  std::function<void(double t, std::span<const double> buffers)> on_interval;
};

// Remaining-buffer fraction per monitored node over all of its egress queues.
std::vector<double> buffer_snapshot(const Topology& topo, std::span<const QueueState> ports,
                                    std::span<const NodeId> monitored);

// Store-and-forward drop-tail packet simulation. Deterministic given inputs.
MetricsReport run_packet_sim(const Topology& topo, std::span<const Flow> flows,
                             RoutingPolicy& policy, const SimConfig& cfg,
                             const SimHooks& hooks = {});

using OdDemands = std::map<OdPair, double>;

struct FluidFlow {
  Path path;
  double demand_bps = 0.0;
};

// Splittable fluid along fixed paths; each link passes min(1, capacity/load) of
// its offered load, with upstream losses shrinking downstream load. Reports
// rates over a 1 s window with propagation-only delay.
MetricsReport run_fluid_paths(const Topology& topo, std::span<const FluidFlow> flows);

MetricsReport run_fluid_eval(const Topology& topo, const CombinationSpace& space,
                             const OdDemands& demands, const PathCombination& combo);

// Satellite-segment demand of a flow set.
OdDemands aggregate_od_demands(const Topology& topo, std::span<const Flow> flows);

}  // namespace sagin
