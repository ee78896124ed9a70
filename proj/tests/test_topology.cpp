#include <doctest.h>

#include <algorithm>
#include <deque>
#include <limits>
#include <set>
#include <sstream>

#include "sagin/random.hpp"
#include "sagin/topology.hpp"

using namespace sagin;

namespace {

const Topology& reference() {
  static const Topology topo = build_reference_topology(TopologyConfig{});
  return topo;
}

NodeId meo(int k) { return reference().nodes_of(NodeKind::Meo)[k - 1]; }
NodeId geo(int k) { return reference().nodes_of(NodeKind::Geo)[k - 1]; }

// Plain Bellman-Ford distances from src, relaxed over both link directions.
std::vector<double> bellman_ford(const Topology& topo, NodeId src, WeightRule rule) {
  std::vector<double> d(topo.node_count(), std::numeric_limits<double>::infinity());
  d[src.index] = 0.0;
  for (std::size_t round = 0; round + 1 < topo.node_count(); ++round) {
    bool changed = false;
    for (const auto& l : topo.links()) {
      const double w = rule == WeightRule::HopCount ? 1.0 : l.prop_delay_s;
      if (d[l.a.index] + w < d[l.b.index]) d[l.b.index] = d[l.a.index] + w, changed = true;
      if (d[l.b.index] + w < d[l.a.index]) d[l.a.index] = d[l.b.index] + w, changed = true;
    }
    if (!changed) break;
  }
  return d;
}

// Edmonds-Karp max flow between two node sets over links whose endpoints are
// both in `layers`.
double max_flow(const Topology& topo, const std::vector<NodeId>& sources,
                const std::vector<NodeId>& sinks, std::set<NodeKind> layers) {
  const std::size_t n = topo.node_count() + 2;
  const std::size_t S = n - 2, T = n - 1;
  std::vector<std::vector<double>> cap(n, std::vector<double>(n, 0.0));
  for (const auto& l : topo.links()) {
    if (!layers.count(topo.node(l.a).kind) || !layers.count(topo.node(l.b).kind)) continue;
    cap[l.a.index][l.b.index] += l.capacity_bps;
    cap[l.b.index][l.a.index] += l.capacity_bps;
  }
  for (NodeId s : sources) cap[S][s.index] = 1e18;
  for (NodeId t : sinks) cap[t.index][T] = 1e18;
  double flow = 0.0;
  for (;;) {
    std::vector<std::size_t> prev(n, n);
    prev[S] = S;
    std::deque<std::size_t> q{S};
    while (!q.empty() && prev[T] == n) {
      const auto u = q.front();
      q.pop_front();
      for (std::size_t v = 0; v < n; ++v) {
        if (prev[v] == n && cap[u][v] > 0) prev[v] = u, q.push_back(v);
      }
    }
    if (prev[T] == n) return flow;
    double aug = 1e18;
    for (auto v = T; v != S; v = prev[v]) aug = std::min(aug, cap[prev[v]][v]);
    for (auto v = T; v != S; v = prev[v]) cap[prev[v]][v] -= aug, cap[v][prev[v]] += aug;
    flow += aug;
  }
}

bool has_link(const Topology& topo, NodeId a, NodeId b) { return topo.port_between(a, b).has_value(); }

}  // namespace

TEST_CASE("reference topology has the expected node counts") {
  const auto& topo = reference();
  CHECK(topo.node_count() == 3340);
  CHECK(topo.nodes_of(NodeKind::Geo).size() == 2);
  CHECK(topo.nodes_of(NodeKind::Meo).size() == 6);
  CHECK(topo.nodes_of(NodeKind::Leo).size() == 12);
  CHECK(topo.nodes_of(NodeKind::Uav).size() == 120);
  CHECK(topo.nodes_of(NodeKind::Ground).size() == 3200);
  CHECK(topo.nodes_of(NodeKind::Ground, Side::Left).size() == 1600);
  CHECK(topo.nodes_of(NodeKind::Meo, Side::Right).size() == 3);
}

TEST_CASE("partition-crossing links are exactly M2-M4, M3-M6 and G1-G2") {
  const auto& topo = reference();
  std::set<std::pair<std::uint32_t, std::uint32_t>> crossing;
  for (const auto& l : topo.links()) {
    if (topo.node(l.a).side != topo.node(l.b).side) {
      crossing.insert(std::minmax(l.a.index, l.b.index));
    }
  }
  const std::set<std::pair<std::uint32_t, std::uint32_t>> want{
      std::minmax(meo(2).index, meo(4).index), std::minmax(meo(3).index, meo(6).index),
      std::minmax(geo(1).index, geo(2).index)};
  CHECK(crossing == want);
  CHECK_FALSE(has_link(topo, meo(1), meo(5)));
  CHECK(has_link(topo, meo(1), meo(2)));
  CHECK(has_link(topo, meo(1), meo(3)));
  CHECK(has_link(topo, geo(1), meo(1)));
  CHECK_FALSE(has_link(topo, geo(1), meo(4)));
}

TEST_CASE("every node is reachable") {
  const auto& topo = reference();
  std::vector<bool> seen(topo.node_count(), false);
  std::deque<NodeId> q{NodeId{0}};
  seen[0] = true;
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop_front();
    for (const auto& nb : topo.neighbors(u)) {
      if (!seen[nb.node.index]) seen[nb.node.index] = true, q.push_back(nb.node);
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
}

TEST_CASE("attachment chains climb one layer at a time") {
  const auto& topo = reference();
  for (NodeId g : topo.nodes_of(NodeKind::Ground)) {
    const auto chain = topo.attachment_chain(g);
    REQUIRE(chain.size() == 4);
    CHECK(topo.node(chain[1]).kind == NodeKind::Uav);
    CHECK(topo.node(chain[2]).kind == NodeKind::Leo);
    CHECK(topo.node(chain[3]).kind == NodeKind::Meo);
    CHECK(topo.node(chain[3]).side == topo.node(g).side);
  }
}

TEST_CASE("zero ground nodes still builds the upper layers") {
  TopologyConfig cfg;
  cfg.ground = 0;
  const auto topo = build_reference_topology(cfg);
  CHECK(topo.node_count() == 140);
  CHECK(topo.nodes_of(NodeKind::Ground).empty());
  CHECK(cross_section_capacity(topo, {NodeKind::Meo, NodeKind::Geo}) == 3e9);
}

TEST_CASE("unsupported shapes are rejected") {
  TopologyConfig cfg;
  cfg.geo = 3;
  CHECK_THROWS_AS(build_reference_topology(cfg), TopologyError);
  cfg = {};
  cfg.leo = 7;
  CHECK_THROWS_AS(build_reference_topology(cfg), TopologyError);
  cfg = {};
  cfg.ground = 3;
  CHECK_THROWS_AS(build_reference_topology(cfg), TopologyError);

  std::vector<NodeInfo> nodes{{NodeId{0}, NodeKind::Meo, Side::Left}, {NodeId{1}, NodeKind::Meo, Side::Right}};
  CHECK_THROWS_AS(Topology::from_parts(nodes, {{NodeId{0}, NodeId{0}, 1e9, 0.01, 10, Band::Ka}}), TopologyError);
  CHECK_THROWS_AS(Topology::from_parts(nodes, {{NodeId{0}, NodeId{1}, -1.0, 0.01, 10, Band::Ka}}), TopologyError);
  CHECK_THROWS_AS(Topology::from_parts(nodes, {{NodeId{0}, NodeId{5}, 1e9, 0.01, 10, Band::Ka}}), TopologyError);
}

TEST_CASE("shortest path M1 to M5 goes through M2 and M4") {
  const auto& topo = reference();
  const Path p = shortest_path(topo, meo(1), meo(5));
  CHECK(p.nodes == std::vector<NodeId>{meo(1), meo(2), meo(4), meo(5)});
  CHECK(path_weight(topo, p, WeightRule::PropDelay) == doctest::Approx(0.11));
}

TEST_CASE("adjacent MEOs are one hop apart") {
  const Path p = shortest_path(reference(), meo(1), meo(2));
  CHECK(p.nodes == std::vector<NodeId>{meo(1), meo(2)});
}

TEST_CASE("left and right partitions are mirror images in size") {
  const auto& topo = reference();
  for (NodeKind k : {NodeKind::Geo, NodeKind::Meo, NodeKind::Leo, NodeKind::Uav, NodeKind::Ground}) {
    CAPTURE(to_string(k));
    CHECK(topo.nodes_of(k, Side::Left).size() == topo.nodes_of(k, Side::Right).size());
  }
}

TEST_CASE("without the MEO cross links G1-G2 is the only cut") {
  const auto& topo = reference();
  std::vector<Link> links;
  for (const auto& l : topo.links()) {
    const bool meo_cross = topo.node(l.a).kind == NodeKind::Meo && topo.node(l.b).kind == NodeKind::Meo &&
                           topo.node(l.a).side != topo.node(l.b).side;
    if (!meo_cross) links.push_back(l);
  }
  const auto cut = Topology::from_parts(topo.nodes(), links);
  CHECK(cross_section_capacity(cut, {NodeKind::Meo}) == 0.0);
  CHECK(cross_section_capacity(cut, {NodeKind::Meo, NodeKind::Geo}) == 1e9);
  const double flow = max_flow(cut, cut.nodes_of(NodeKind::Meo, Side::Left),
                               cut.nodes_of(NodeKind::Meo, Side::Right), {NodeKind::Meo, NodeKind::Geo});
  CHECK(flow == doctest::Approx(1e9));
  const Path p = shortest_path(cut, meo(1), meo(5));
  CHECK(p.nodes == std::vector<NodeId>{meo(1), geo(1), geo(2), meo(5)});
}

TEST_CASE("shortest paths match a Bellman-Ford oracle on random pairs") {
  const auto& topo = reference();
  Rng rng(2718);
  for (WeightRule rule : {WeightRule::PropDelay, WeightRule::HopCount}) {
    for (int i = 0; i < 100; ++i) {
      const NodeId src{static_cast<std::uint32_t>(rng.below(topo.node_count()))};
      const NodeId dst{static_cast<std::uint32_t>(rng.below(topo.node_count()))};
      const auto dist = bellman_ford(topo, src, rule);
      const Path p = shortest_path(topo, src, dst, rule);
      CAPTURE(src.index);
      CAPTURE(dst.index);
      CHECK(is_valid_path(topo, p));
      CHECK(p.nodes.front() == src);
      CHECK(p.nodes.back() == dst);
      CHECK(path_weight(topo, p, rule) == doctest::Approx(dist[dst.index]).epsilon(1e-12));
    }
  }
}

TEST_CASE("unreachable destination raises NoPathError") {
  std::vector<NodeInfo> nodes{{NodeId{0}, NodeKind::Meo, Side::Left},
                              {NodeId{1}, NodeKind::Meo, Side::Left},
                              {NodeId{2}, NodeKind::Meo, Side::Right}};
  const auto topo = Topology::from_parts(nodes, {{NodeId{0}, NodeId{1}, 1e9, 0.01, 10, Band::Ka}});
  CHECK_THROWS_AS(shortest_path(topo, NodeId{0}, NodeId{2}), NoPathError);
}

TEST_CASE("cross-section capacities") {
  const auto& topo = reference();
  CHECK(cross_section_capacity(topo, {NodeKind::Meo}) == 2e9);
  CHECK(cross_section_capacity(topo, {NodeKind::Meo, NodeKind::Geo}) == 3e9);
  CHECK(cross_section_capacity(topo, {NodeKind::Leo}) == 0.0);
}

TEST_CASE("satellite min cut equals the cross-section capacity") {
  const auto& topo = reference();
  const double flow = max_flow(topo, topo.nodes_of(NodeKind::Meo, Side::Left),
                               topo.nodes_of(NodeKind::Meo, Side::Right), {NodeKind::Meo, NodeKind::Geo});
  CHECK(flow == doctest::Approx(3e9));
}

TEST_CASE("dump is deterministic and lists both directions") {
  const auto a = build_reference_topology(TopologyConfig{}).dump();
  const auto b = build_reference_topology(TopologyConfig{}).dump();
  CHECK(a == b);
  std::istringstream in(a);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 2 * reference().link_count());
}

TEST_CASE("monitored satellites are M1..M6 then G1, G2") {
  const auto& topo = reference();
  const auto m = monitored_satellites(topo);
  REQUIRE(m.size() == 8);
  for (int k = 1; k <= 6; ++k) CHECK(m[k - 1] == meo(k));
  CHECK(m[6] == geo(1));
  CHECK(m[7] == geo(2));
}
