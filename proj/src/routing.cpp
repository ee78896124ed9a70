#include "sagin/routing.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

namespace sagin {

std::vector<EgressRoute> egress_routes(const Topology& topo) {
  std::vector<EgressRoute> meo_links;
  std::vector<EgressRoute> geo_links;
  for (const Link& link : topo.links()) {
    const auto& a = topo.node(link.a);
    const auto& b = topo.node(link.b);
    if (a.side == b.side || a.kind != b.kind) continue;
    EgressRoute route = a.side == Side::Left ? EgressRoute{a.id, b.id} : EgressRoute{b.id, a.id};
    if (a.kind == NodeKind::Meo) meo_links.push_back(route);
    if (a.kind == NodeKind::Geo) geo_links.push_back(route);
  }
  auto by_ends = [](const EgressRoute& x, const EgressRoute& y) {
    return std::tie(x.left_end, x.right_end) < std::tie(y.left_end, y.right_end);
  };
  std::sort(meo_links.begin(), meo_links.end(), by_ends);
  std::sort(geo_links.begin(), geo_links.end(), by_ends);
  meo_links.insert(meo_links.end(), geo_links.begin(), geo_links.end());
  return meo_links;
}

namespace {

Path extend_through(const Topology& topo, OdPair od, const EgressRoute& egress) {
  Path path{{od.origin}};
  if (od.origin != egress.left_end) path.nodes.push_back(egress.left_end);
  path.nodes.push_back(egress.right_end);
  if (od.destination != egress.right_end) path.nodes.push_back(od.destination);
  for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) {
    if (!topo.port_between(path.nodes[i], path.nodes[i + 1])) {
      throw RoutingError(fmt::format("no link {} -> {} for egress {}-{}", path.nodes[i].index,
                                     path.nodes[i + 1].index, egress.left_end.index,
                                     egress.right_end.index));
    }
  }
  return path;
}

}  // namespace

std::vector<Path> enumerate_candidate_paths(const Topology& topo, OdPair od) {
  const auto egress = egress_routes(topo);
  if (egress.empty()) throw RoutingError("topology has no partition-crossing egress link");
  std::vector<Path> out;
  out.reserve(egress.size());
  for (const auto& e : egress) out.push_back(extend_through(topo, od, e));
  return out;
}

CombinationSpace::CombinationSpace(const Topology& topo)
    : origins_(topo.nodes_of(NodeKind::Meo, Side::Left)),
      destinations_(topo.nodes_of(NodeKind::Meo, Side::Right)),
      egress_(sagin::egress_routes(topo)) {
  if (origins_.empty() || destinations_.empty()) {
    throw RoutingError("combination space needs MEOs on both sides");
  }
  if (egress_.empty()) throw RoutingError("topology has no partition-crossing egress link");
  for (NodeId o : origins_) {
    for (NodeId d : destinations_) ods_.push_back({o, d});
  }
  for (const auto& od : ods_) {
    std::vector<Path> paths;
    for (const auto& e : egress_) paths.push_back(extend_through(topo, od, e));
    candidates_.push_back(std::move(paths));
  }

  const std::size_t radix = egress_.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < origins_.size(); ++i) total *= radix;
  combos_.reserve(total);
  for (std::size_t id = 0; id < total; ++id) {
    PathCombination combo;
    combo.combo_id = static_cast<std::uint32_t>(id);
    combo.egress_choice.assign(origins_.size(), 0);
    std::size_t rest = id;
    for (std::size_t i = origins_.size(); i-- > 0;) {
      combo.egress_choice[i] = static_cast<std::uint8_t>(rest % radix);
      rest /= radix;
    }
    combo.paths.reserve(ods_.size());
    for (std::size_t k = 0; k < ods_.size(); ++k) {
      const std::size_t origin_pos = k / destinations_.size();
      combo.paths.push_back(candidates_[k][combo.egress_choice[origin_pos]]);
    }
    combos_.push_back(std::move(combo));
  }
}

std::size_t CombinationSpace::od_index(NodeId origin, NodeId destination) const {
  auto o = std::find(origins_.begin(), origins_.end(), origin);
  auto d = std::find(destinations_.begin(), destinations_.end(), destination);
  if (o == origins_.end() || d == destinations_.end()) {
    throw RoutingError(
        fmt::format("({}, {}) is not an OD pair", origin.index, destination.index));
  }
  return static_cast<std::size_t>(o - origins_.begin()) * destinations_.size() +
         static_cast<std::size_t>(d - destinations_.begin());
}

std::size_t CombinationSpace::od_index(OdPair od) const {
  return od_index(od.origin, od.destination);
}

std::vector<PathCombination> enumerate_combinations(const Topology& topo) {
  return CombinationSpace(topo).combinations();
}

Path compose_route(const Topology& topo, const Flow& flow, const Path& satellite_path) {
  const auto up = topo.attachment_chain(flow.src);
  const auto down = topo.attachment_chain(flow.dst);
  if (satellite_path.nodes.empty() || up.back() != satellite_path.nodes.front() ||
      down.back() != satellite_path.nodes.back()) {
    throw RoutingError(fmt::format("flow {}: satellite path {} does not join its access chains",
                                   flow.flow_id, to_string(satellite_path)));
  }
  Path route;
  route.nodes.reserve(up.size() + satellite_path.nodes.size() + down.size());
  route.nodes.insert(route.nodes.end(), up.begin(), up.end() - 1);
  route.nodes.insert(route.nodes.end(), satellite_path.nodes.begin(), satellite_path.nodes.end());
  route.nodes.insert(route.nodes.end(), down.rbegin() + 1, down.rend());
  return route;
}

Path sp_route(const Topology& topo, const Flow& flow) {
  const NodeId origin = topo.serving_meo(flow.src);
  const NodeId destination = topo.serving_meo(flow.dst);
  if (origin == destination) {
    return compose_route(topo, flow, Path{{origin}});
  }
  return compose_route(topo, flow, shortest_path(topo, origin, destination, WeightRule::PropDelay));
}

void ShortestPathPolicy::prepare(const Topology& topo, std::span<const Flow> flows) {
  std::map<std::pair<NodeId, NodeId>, Path> cache;
  routes_.clear();
  routes_.reserve(flows.size());
  for (const Flow& f : flows) {
    const NodeId o = topo.serving_meo(f.src);
    const NodeId d = topo.serving_meo(f.dst);
    auto [it, fresh] = cache.try_emplace({o, d});
    if (fresh) {
      it->second = o == d ? Path{{o}} : shortest_path(topo, o, d, WeightRule::PropDelay);
    }
    routes_.push_back(compose_route(topo, f, it->second));
  }
}

std::vector<std::vector<Path>> routes_per_combination(const Topology& topo,
                                                      const CombinationSpace& space,
                                                      std::span<const Flow> flows) {
  std::vector<std::size_t> od_of_flow;
  od_of_flow.reserve(flows.size());
  for (const Flow& f : flows) {
    od_of_flow.push_back(space.od_index(topo.serving_meo(f.src), topo.serving_meo(f.dst)));
  }
  std::vector<std::vector<Path>> out(space.size());
  for (const auto& combo : space.combinations()) {
    auto& routes = out[combo.combo_id];
    routes.reserve(flows.size());
    for (std::size_t i = 0; i < flows.size(); ++i) {
      routes.push_back(compose_route(topo, flows[i], combo.paths[od_of_flow[i]]));
    }
  }
  return out;
}

void FixedCombinationPolicy::prepare(const Topology& topo, std::span<const Flow> flows) {
  CombinationSpace space(topo);
  if (combo_id_ >= space.size()) {
    throw RoutingError(fmt::format("combination {} out of range ({} combinations)", combo_id_,
                                   space.size()));
  }
  routes_ = std::move(routes_per_combination(topo, space, flows)[combo_id_]);
}

}  // namespace sagin
