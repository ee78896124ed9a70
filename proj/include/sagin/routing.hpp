#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "sagin/topology.hpp"
#include "sagin/traffic.hpp"

namespace sagin {

class RoutingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Left MEO origin, right MEO destination.
struct OdPair {
  NodeId origin;
  NodeId destination;

  auto operator<=>(const OdPair&) const = default;
};

// A partition-crossing link at or above the MEO layer.
struct EgressRoute {
  NodeId left_end;
  NodeId right_end;
};

struct PathCombination {
  std::uint32_t combo_id = 0;
  std::vector<std::uint8_t> egress_choice;  // per left MEO origin
  std::vector<Path> paths;                  // per OD index
};

// OD pairs, candidate paths, and per-origin egress combinations of the
// satellite segment.
class CombinationSpace {
 public:
  explicit CombinationSpace(const Topology& topo);

  const std::vector<NodeId>& origins() const { return origins_; }
  const std::vector<NodeId>& destinations() const { return destinations_; }
  const std::vector<OdPair>& od_pairs() const { return ods_; }
  const std::vector<EgressRoute>& egress_routes() const { return egress_; }
  const std::vector<PathCombination>& combinations() const { return combos_; }
  std::size_t size() const { return combos_.size(); }

  // Index of od in od_pairs(); throws for a pair that is not an OD pair.
  std::size_t od_index(OdPair od) const;
  std::size_t od_index(NodeId origin, NodeId destination) const;
  const std::vector<Path>& candidates(std::size_t od_index) const { return candidates_[od_index]; }

 private:
  std::vector<NodeId> origins_;
  std::vector<NodeId> destinations_;
  std::vector<OdPair> ods_;
  std::vector<EgressRoute> egress_;
  std::vector<std::vector<Path>> candidates_;
  std::vector<PathCombination> combos_;
};

// Partition-crossing egress routes: MEO cross links ordered by left endpoint,
// then GEO cross links.
std::vector<EgressRoute> egress_routes(const Topology& topo);

// One candidate per egress route, in egress order.
std::vector<Path> enumerate_candidate_paths(const Topology& topo, OdPair od);

// Each origin picks one egress class for all of its OD pairs; combo_id is the
// mixed-radix number of the choices with the first origin most significant.
std::vector<PathCombination> enumerate_combinations(const Topology& topo);

// src -> UAV -> LEO -> origin MEO, the satellite path, then down to dst.
Path compose_route(const Topology& topo, const Flow& flow, const Path& satellite_path);

// End-to-end route whose satellite segment is the propagation-delay shortest path.
Path sp_route(const Topology& topo, const Flow& flow);

struct IntervalOutcome {
  double generated_bits = 0.0;
  double dropped_bits = 0.0;
  double loss_rate = 0.0;
  double min_buffer = 1.0;
};

struct IntervalObservation {
  double now_s = 0.0;
  std::size_t interval_index = 0;  // number of completed intervals
  const LoadTrace* trace = nullptr;
  std::span<const double> buffers;  // remaining-buffer fractions of monitored nodes
  IntervalOutcome last;             // outcome of the interval that just ended
};

class RoutingPolicy {
 public:
  virtual ~RoutingPolicy() = default;

  virtual std::string_view name() const = 0;
  virtual void prepare(const Topology& topo, std::span<const Flow> flows) = 0;
  // Called at every decision boundary including t = 0. Returns true when any
  // route changed.
  virtual bool on_interval(const IntervalObservation&) { return false; }
  virtual const Path& route(std::size_t flow_index) const = 0;
};

class ShortestPathPolicy final : public RoutingPolicy {
 public:
  std::string_view name() const override { return "sp"; }
  void prepare(const Topology& topo, std::span<const Flow> flows) override;
  const Path& route(std::size_t flow_index) const override { return routes_.at(flow_index); }

 private:
  std::vector<Path> routes_;
};

// Routes every flow through one fixed path combination.
class FixedCombinationPolicy final : public RoutingPolicy {
 public:
  explicit FixedCombinationPolicy(std::uint32_t combo_id) : combo_id_(combo_id) {}

  std::string_view name() const override { return "fixed"; }
  void prepare(const Topology& topo, std::span<const Flow> flows) override;
  const Path& route(std::size_t flow_index) const override { return routes_.at(flow_index); }

 private:
  std::uint32_t combo_id_;
  std::vector<Path> routes_;
};

// Per-flow routes for every combination: routes[combo][flow].
std::vector<std::vector<Path>> routes_per_combination(const Topology& topo,
                                                      const CombinationSpace& space,
                                                      std::span<const Flow> flows);

}  // namespace sagin
