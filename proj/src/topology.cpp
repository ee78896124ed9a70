#include "sagin/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

namespace sagin {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Geo: return "GEO";
    case NodeKind::Meo: return "MEO";
    case NodeKind::Leo: return "LEO";
    case NodeKind::Uav: return "UAV";
    case NodeKind::Ground: return "GROUND";
  }
  return "?";
}

std::string_view to_string(Side side) { return side == Side::Left ? "left" : "right"; }

std::string_view to_string(Band band) {
  switch (band) {
    case Band::Ka: return "Ka";
    case Band::L: return "L";
    case Band::Access: return "Access";
  }
  return "?";
}

std::string to_string(const Path& path) {
  std::string out;
  for (std::size_t i = 0; i < path.nodes.size(); ++i) {
    if (i) out += "->";
    out += std::to_string(path.nodes[i].index);
  }
  return out;
}

Topology Topology::from_parts(std::vector<NodeInfo> nodes, std::vector<Link> links) {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id.index != i) {
      throw TopologyError(fmt::format("node ids must be dense: position {} holds id {}", i,
                                      nodes[i].id.index));
    }
  }
  for (std::size_t l = 0; l < links.size(); ++l) {
    const Link& link = links[l];
    if (link.a.index >= nodes.size() || link.b.index >= nodes.size()) {
      throw TopologyError(fmt::format("link {} references an unknown node", l));
    }
    if (link.a == link.b) {
      throw TopologyError(fmt::format("link {} has identical endpoints {}", l, link.a.index));
    }
    if (!(link.capacity_bps > 0.0)) {
      throw TopologyError(fmt::format("link {} capacity must be positive", l));
    }
    if (!(link.prop_delay_s > 0.0)) {
      throw TopologyError(fmt::format("link {} propagation delay must be positive", l));
    }
    if (link.buffer_pkts < 1) {
      throw TopologyError(fmt::format("link {} buffer must hold at least one packet", l));
    }
  }

  Topology topo;
  topo.nodes_ = std::move(nodes);
  topo.links_ = std::move(links);

  std::vector<std::vector<Neighbor>> lists(topo.nodes_.size());
  for (std::uint32_t l = 0; l < topo.links_.size(); ++l) {
    const Link& link = topo.links_[l];
    lists[link.a.index].push_back({link.b, 2 * l});
    lists[link.b.index].push_back({link.a, 2 * l + 1});
  }
  topo.adj_offsets_.assign(topo.nodes_.size() + 1, 0);
  for (std::size_t n = 0; n < lists.size(); ++n) {
    auto& list = lists[n];
    std::sort(list.begin(), list.end(),
              [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i].node == list[i - 1].node) {
        throw TopologyError(
            fmt::format("duplicate link between {} and {}", n, list[i].node.index));
      }
    }
    topo.adj_offsets_[n + 1] = topo.adj_offsets_[n] + static_cast<std::uint32_t>(list.size());
    topo.adj_.insert(topo.adj_.end(), list.begin(), list.end());
  }
  return topo;
}

Port Topology::port(std::uint32_t port) const {
  const Link& link = links_.at(port / 2);
  return (port % 2 == 0) ? Port{link.a, link.b, port / 2} : Port{link.b, link.a, port / 2};
}

std::span<const Neighbor> Topology::neighbors(NodeId id) const {
  const auto begin = adj_offsets_.at(id.index);
  const auto end = adj_offsets_.at(id.index + 1);
  return {adj_.data() + begin, adj_.data() + end};
}

std::optional<std::uint32_t> Topology::port_between(NodeId from, NodeId to) const {
  auto list = neighbors(from);
  auto it = std::lower_bound(list.begin(), list.end(), to,
                             [](const Neighbor& n, NodeId v) { return n.node < v; });
  if (it == list.end() || it->node != to) return std::nullopt;
  return it->port;
}

std::vector<NodeId> Topology::nodes_of(NodeKind kind) const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.kind == kind) out.push_back(n.id);
  }
  return out;
}

std::vector<NodeId> Topology::nodes_of(NodeKind kind, Side side) const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.kind == kind && n.side == side) out.push_back(n.id);
  }
  return out;
}

std::optional<NodeId> Topology::uplink(NodeId id) const {
  NodeKind want;
  switch (node(id).kind) {
    case NodeKind::Ground: want = NodeKind::Uav; break;
    case NodeKind::Uav: want = NodeKind::Leo; break;
    case NodeKind::Leo: want = NodeKind::Meo; break;
    default: return std::nullopt;
  }
  std::optional<NodeId> found;
  for (const auto& nb : neighbors(id)) {
    if (node(nb.node).kind == want) {
      if (found) return std::nullopt;
      found = nb.node;
    }
  }
  return found;
}

std::vector<NodeId> Topology::attachment_chain(NodeId id) const {
  std::vector<NodeId> chain{id};
  while (auto up = uplink(chain.back())) chain.push_back(*up);
  return chain;
}

NodeId Topology::serving_meo(NodeId id) const {
  auto chain = attachment_chain(id);
  if (node(chain.back()).kind != NodeKind::Meo) {
    throw TopologyError(fmt::format("node {} has no MEO attachment", id.index));
  }
  return chain.back();
}

std::string Topology::dump() const {
  std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> rows;
  rows.reserve(port_count());
  for (std::uint32_t p = 0; p < port_count(); ++p) {
    Port pt = port(p);
    rows.emplace_back(pt.from.index, pt.to.index, pt.link);
  }
  std::sort(rows.begin(), rows.end());
  std::string out;
  for (const auto& [src, dst, l] : rows) {
    const Link& link = links_[l];
    out += fmt::format("{} {} {} {} {:.0f} {} {} {}\n", src, dst,
                       to_string(nodes_[src].kind), to_string(nodes_[dst].kind),
                       link.capacity_bps, link.prop_delay_s, link.buffer_pkts,
                       to_string(link.band));
  }
  return out;
}

namespace {

void require(bool ok, std::string_view what) {
  if (!ok) throw TopologyError(fmt::format("invalid topology config: {}", what));
}

}  // namespace

Topology build_reference_topology(const TopologyConfig& cfg) {
  require(cfg.geo == 2, "geo count must be 2 (G1, G2)");
  require(cfg.meo == 6, "meo count must be 6 (two triangles)");
  require(cfg.leo > 0 && cfg.leo % cfg.meo == 0, "leo count must be a positive multiple of meo");
  require(cfg.uav > 0 && cfg.uav % cfg.leo == 0, "uav count must be a positive multiple of leo");
  require(cfg.ground % 2 == 0, "ground count must be divisible by 2");
  const LinkDefaults& d = cfg.links;
  require(d.isl_bps > 0 && d.leo_meo_bps > 0 && d.uav_leo_bps > 0 && d.ground_uav_bps > 0,
          "capacities must be positive");
  require(d.ground_uav_s > 0 && d.uav_leo_s > 0 && d.leo_meo_s > 0 && d.meo_meo_s > 0 &&
              d.meo_cross_s > 0 && d.meo_geo_s > 0 && d.geo_geo_s > 0,
          "propagation delays must be positive");
  require(d.buffer_pkts >= 1 && d.access_buffer_pkts >= 1, "buffers must hold at least one packet");

  std::vector<NodeInfo> nodes;
  auto add_layer = [&](NodeKind kind, std::uint32_t count) {
    const auto first = static_cast<std::uint32_t>(nodes.size());
    for (std::uint32_t i = 0; i < count; ++i) {
      nodes.push_back({NodeId{first + i}, kind, i < count / 2 ? Side::Left : Side::Right});
    }
    return first;
  };
  const auto geo0 = add_layer(NodeKind::Geo, cfg.geo);
  const auto meo0 = add_layer(NodeKind::Meo, cfg.meo);
  const auto leo0 = add_layer(NodeKind::Leo, cfg.leo);
  const auto uav0 = add_layer(NodeKind::Uav, cfg.uav);
  const auto gnd0 = add_layer(NodeKind::Ground, cfg.ground);

  std::vector<Link> links;
  auto connect = [&](std::uint32_t a, std::uint32_t b, double bps, double delay,
                     std::uint32_t buf, Band band) {
    links.push_back({NodeId{a}, NodeId{b}, bps, delay, buf, band});
  };
  auto meo = [&](int k) { return meo0 + static_cast<std::uint32_t>(k - 1); };  // M1..M6

  connect(geo0, geo0 + 1, d.isl_bps, d.geo_geo_s, d.buffer_pkts, Band::Ka);
  for (int base : {1, 4}) {
    connect(meo(base), meo(base + 1), d.isl_bps, d.meo_meo_s, d.buffer_pkts, Band::Ka);
    connect(meo(base), meo(base + 2), d.isl_bps, d.meo_meo_s, d.buffer_pkts, Band::Ka);
    connect(meo(base + 1), meo(base + 2), d.isl_bps, d.meo_meo_s, d.buffer_pkts, Band::Ka);
  }
  connect(meo(2), meo(4), d.isl_bps, d.meo_cross_s, d.buffer_pkts, Band::Ka);
  connect(meo(3), meo(6), d.isl_bps, d.meo_cross_s, d.buffer_pkts, Band::Ka);
  for (int k = 1; k <= 6; ++k) {
    connect(k <= 3 ? geo0 : geo0 + 1, meo(k), d.isl_bps, d.meo_geo_s, d.buffer_pkts, Band::Ka);
  }

  const std::uint32_t leo_per_meo = cfg.leo / cfg.meo;
  for (std::uint32_t i = 0; i < cfg.leo; ++i) {
    connect(leo0 + i, meo0 + i / leo_per_meo, d.leo_meo_bps, d.leo_meo_s, d.buffer_pkts, Band::Ka);
  }
  const std::uint32_t uav_per_leo = cfg.uav / cfg.leo;
  for (std::uint32_t i = 0; i < cfg.uav; ++i) {
    connect(uav0 + i, leo0 + i / uav_per_leo, d.uav_leo_bps, d.uav_leo_s, d.access_buffer_pkts,
            Band::L);
  }
  const std::uint32_t ground_per_side = cfg.ground / 2;
  const std::uint32_t uav_per_side = cfg.uav / 2;
  for (std::uint32_t i = 0; i < cfg.ground; ++i) {
    const std::uint32_t side = i / ground_per_side;
    const std::uint32_t uav = uav0 + side * uav_per_side + (i % ground_per_side) % uav_per_side;
    connect(gnd0 + i, uav, d.ground_uav_bps, d.ground_uav_s, d.access_buffer_pkts, Band::Access);
  }

  return Topology::from_parts(std::move(nodes), std::move(links));
}

std::vector<NodeId> monitored_satellites(const Topology& topo) {
  auto meos = topo.nodes_of(NodeKind::Meo);
  auto geos = topo.nodes_of(NodeKind::Geo);
  meos.insert(meos.end(), geos.begin(), geos.end());
  return meos;
}

double path_weight(const Topology& topo, const Path& path, WeightRule rule) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) {
    auto port = topo.port_between(path.nodes[i], path.nodes[i + 1]);
    if (!port) {
      throw NoPathError(fmt::format("nodes {} and {} are not adjacent", path.nodes[i].index,
                                    path.nodes[i + 1].index));
    }
    total += rule == WeightRule::PropDelay ? topo.port_delay(*port) : 1.0;
  }
  return total;
}

bool is_valid_path(const Topology& topo, const Path& path) {
  if (path.nodes.empty()) return false;
  std::vector<NodeId> seen = path.nodes;
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) return false;
  for (NodeId n : path.nodes) {
    if (n.index >= topo.node_count()) return false;
  }
  for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) {
    if (!topo.port_between(path.nodes[i], path.nodes[i + 1])) return false;
  }
  return true;
}

Path shortest_path(const Topology& topo, NodeId src, NodeId dst, WeightRule rule) {
  if (src.index >= topo.node_count() || dst.index >= topo.node_count()) {
    throw NoPathError("shortest_path: unknown node");
  }
  if (src == dst) throw NoPathError("shortest_path: source equals destination");

  auto weight = [&](std::uint32_t port) {
    return rule == WeightRule::PropDelay ? topo.port_delay(port) : 1.0;
  };

  // Distances to dst; links are symmetric so a forward search from dst suffices.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(topo.node_count(), inf);
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[dst.index] = 0.0;
  heap.emplace(0.0, dst.index);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (const auto& nb : topo.neighbors(NodeId{u})) {
      const double nd = d + weight(nb.port);
      if (nd < dist[nb.node.index]) {
        dist[nb.node.index] = nd;
        heap.emplace(nd, nb.node.index);
      }
    }
  }
  if (dist[src.index] == inf) {
    throw NoPathError(fmt::format("no path from {} to {}", src.index, dst.index));
  }

  // Greedy walk: smallest-index neighbor that stays on some optimal path.
  Path path{{src}};
  NodeId u = src;
  while (u != dst) {
    const double tol = 1e-12 * std::max(1.0, dist[u.index]);
    bool advanced = false;
    for (const auto& nb : topo.neighbors(u)) {
      if (dist[nb.node.index] + weight(nb.port) <= dist[u.index] + tol) {
        u = nb.node;
        path.nodes.push_back(u);
        advanced = true;
        break;
      }
    }
    if (!advanced) throw NoPathError("shortest_path: inconsistent distance labels");
  }
  return path;
}

double cross_section_capacity(const Topology& topo, std::span<const NodeKind> layers) {
  auto in_filter = [&](NodeKind k) {
    return std::find(layers.begin(), layers.end(), k) != layers.end();
  };
  double total = 0.0;
  for (const Link& link : topo.links()) {
    const auto& a = topo.node(link.a);
    const auto& b = topo.node(link.b);
    if (a.side != b.side && in_filter(a.kind) && in_filter(b.kind)) total += link.capacity_bps;
  }
  return total;
}

double cross_section_capacity(const Topology& topo, std::initializer_list<NodeKind> layers) {
  return cross_section_capacity(topo, std::span<const NodeKind>(layers.begin(), layers.size()));
}

}  // namespace sagin
