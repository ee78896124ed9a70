#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sagin {

// Dense node index, 0..N-1.
struct NodeId {
  std::uint32_t index = 0;

  constexpr auto operator<=>(const NodeId&) const = default;
};

enum class NodeKind : std::uint8_t { Geo, Meo, Leo, Uav, Ground };
enum class Side : std::uint8_t { Left, Right };
enum class Band : std::uint8_t { Ka, L, Access };

std::string_view to_string(NodeKind kind);
std::string_view to_string(Side side);
std::string_view to_string(Band band);

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoPathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NodeInfo {
  NodeId id;
  NodeKind kind = NodeKind::Ground;
  Side side = Side::Left;
};

// Bidirectional link; each direction has its own queue in the simulator.
struct Link {
  NodeId a;
  NodeId b;
  double capacity_bps = 0.0;
  double prop_delay_s = 0.0;
  std::uint32_t buffer_pkts = 0;
  Band band = Band::Ka;
};

// Directed view of a link. Port p of link l: p = 2*l for a->b, 2*l+1 for b->a.
struct Port {
  NodeId from;
  NodeId to;
  std::uint32_t link = 0;
};

struct Neighbor {
  NodeId node;
  std::uint32_t port = 0;  // egress port towards `node`
};

struct LinkDefaults {
  double isl_bps = 1e9;          // MEO-MEO, MEO-GEO, GEO-GEO (Ka)
  double leo_meo_bps = 1e9;      // Ka
  double uav_leo_bps = 120e6;    // L band
  double ground_uav_bps = 10e6;  // access

  double ground_uav_s = 0.0001;
  double uav_leo_s = 0.003;
  double leo_meo_s = 0.035;
  double meo_meo_s = 0.030;
  double meo_cross_s = 0.050;
  double meo_geo_s = 0.090;
  double geo_geo_s = 0.120;

  std::uint32_t buffer_pkts = 256;
  std::uint32_t access_buffer_pkts = 1024;

  bool operator==(const LinkDefaults&) const = default;
};

struct TopologyConfig {
  std::uint32_t geo = 2;
  std::uint32_t meo = 6;
  std::uint32_t leo = 12;
  std::uint32_t uav = 120;
  std::uint32_t ground = 3200;
  LinkDefaults links;

  bool operator==(const TopologyConfig&) const = default;
};

enum class WeightRule : std::uint8_t { PropDelay, HopCount };

struct Path {
  std::vector<NodeId> nodes;

  std::size_t hops() const { return nodes.empty() ? 0 : nodes.size() - 1; }
  bool operator==(const Path&) const = default;
};

std::string to_string(const Path& path);

class Topology {
 public:
  // Validates per-link invariants only; any graph shape is accepted.
  static Topology from_parts(std::vector<NodeInfo> nodes, std::vector<Link> links);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t link_count() const { return links_.size(); }
  std::size_t port_count() const { return 2 * links_.size(); }

  const std::vector<NodeInfo>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const NodeInfo& node(NodeId id) const { return nodes_.at(id.index); }
  const Link& link(std::uint32_t index) const { return links_.at(index); }
  Port port(std::uint32_t port) const;
  double port_capacity(std::uint32_t port) const { return links_[port / 2].capacity_bps; }
  double port_delay(std::uint32_t port) const { return links_[port / 2].prop_delay_s; }
  std::uint32_t port_buffer(std::uint32_t port) const { return links_[port / 2].buffer_pkts; }

  // Sorted by neighbor index.
  std::span<const Neighbor> neighbors(NodeId id) const;
  std::optional<std::uint32_t> port_between(NodeId from, NodeId to) const;

  std::vector<NodeId> nodes_of(NodeKind kind) const;
  std::vector<NodeId> nodes_of(NodeKind kind, Side side) const;

  // Unique uplink neighbor (Ground->Uav, Uav->Leo, Leo->Meo); nullopt for Meo/Geo
  // or when the node has no such attachment.
  std::optional<NodeId> uplink(NodeId id) const;
  // Ground -> Uav -> Leo -> Meo chain starting at `id` (inclusive).
  std::vector<NodeId> attachment_chain(NodeId id) const;
  NodeId serving_meo(NodeId id) const;

  // Edge list, one line per directed link, sorted by (src, dst).
  std::string dump() const;

 private:
  std::vector<NodeInfo> nodes_;
  std::vector<Link> links_;
  std::vector<std::uint32_t> adj_offsets_;
  std::vector<Neighbor> adj_;
};

// Fixed layered graph: G1-G2, MEO triangles per side, cross links M2-M4 and M3-M6,
// each GEO to its side's MEOs, LEOs split evenly over MEOs, UAVs over LEOs, and
// ground nodes round-robin over their side's UAVs.
Topology build_reference_topology(const TopologyConfig& cfg);

// Monitored satellites in feature order: M1..M6, G1, G2.
std::vector<NodeId> monitored_satellites(const Topology& topo);

double path_weight(const Topology& topo, const Path& path, WeightRule rule);
bool is_valid_path(const Topology& topo, const Path& path);

// Minimum-weight simple path; ties go to the lexicographically smallest node
// sequence. Throws NoPathError when dst is unreachable.
Path shortest_path(const Topology& topo, NodeId src, NodeId dst,
                   WeightRule rule = WeightRule::PropDelay);

// Sum of capacities of partition-crossing links whose endpoints both have a kind
// in `layers`.
double cross_section_capacity(const Topology& topo, std::initializer_list<NodeKind> layers);
double cross_section_capacity(const Topology& topo, std::span<const NodeKind> layers);

}  // namespace sagin

template <>
struct std::hash<sagin::NodeId> {
  std::size_t operator()(const sagin::NodeId& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.index);
  }
};
