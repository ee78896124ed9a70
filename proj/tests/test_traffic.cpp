#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "sagin/routing.hpp"
#include "sagin/traffic.hpp"

using namespace sagin;

namespace {

const Topology& reference() {
  static const Topology topo = build_reference_topology(TopologyConfig{});
  return topo;
}

double offered(const std::vector<Flow>& flows) {
  return std::accumulate(flows.begin(), flows.end(), 0.0,
                         [](double s, const Flow& f) { return s + f.rate_bps; });
}

// Offered egress bits per monitored satellite over one interval when every flow
// follows its shortest path.
std::vector<double> sp_offered_egress(const Topology& topo, const std::vector<Flow>& flows,
                                      double interval_s) {
  const auto monitored = monitored_satellites(topo);
  std::vector<double> bits(monitored.size(), 0.0);
  for (const auto& f : flows) {
    const Path p = sp_route(topo, f);
    for (std::size_t h = 0; h + 1 < p.nodes.size(); ++h) {
      const auto from = p.nodes[h], to = p.nodes[h + 1];
      const auto kind = topo.node(to).kind;
      if (kind != NodeKind::Meo && kind != NodeKind::Geo) continue;
      const auto it = std::find(monitored.begin(), monitored.end(), from);
      if (it != monitored.end()) bits[it - monitored.begin()] += f.rate_bps * interval_s;
    }
  }
  return bits;
}

}  // namespace

TEST_CASE("1600 sources at 2 Mbps offer 3.2 Gbps") {
  const auto flows = select_active_sources(reference(), 1600, 1);
  CHECK(flows.size() == 1600);
  CHECK(offered(flows) == doctest::Approx(3.2e9));
}

TEST_CASE("zero sources yield an empty flow set") {
  CHECK(select_active_sources(reference(), 0, 1).empty());
}

TEST_CASE("sources are distinct left ground nodes paired with distinct right ones") {
  const auto& topo = reference();
  const auto flows = select_active_sources(topo, 700, 9);
  std::set<NodeId> src, dst;
  for (const auto& f : flows) {
    CHECK(topo.node(f.src).kind == NodeKind::Ground);
    CHECK(topo.node(f.src).side == Side::Left);
    CHECK(topo.node(f.dst).kind == NodeKind::Ground);
    CHECK(topo.node(f.dst).side == Side::Right);
    src.insert(f.src);
    dst.insert(f.dst);
  }
  CHECK(src.size() == 700);
  CHECK(dst.size() == 700);
}

TEST_CASE("source selection is deterministic per seed") {
  const auto a = select_active_sources(reference(), 300, 4);
  const auto b = select_active_sources(reference(), 300, 4);
  const auto c = select_active_sources(reference(), 300, 5);
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("more sources than left ground nodes is an error") {
  CHECK_THROWS_AS(select_active_sources(reference(), 1601, 1), TrafficError);
}

TEST_CASE("bursty sources keep their mean rate") {
  TrafficConfig cfg;
  cfg.burst.enabled = true;
  cfg.burst.period_s = 60.0;
  cfg.burst.duty = 0.25;
  const auto flows = select_active_sources(reference(), 20, 3, cfg);
  for (const auto& f : flows) {
    REQUIRE(f.burst.has_value());
    // Midpoint rule over one full period.
    const int steps = 600000;
    const double dt = f.burst->period_s / steps;
    double bits = 0.0;
    for (int i = 0; i < steps; ++i) bits += instantaneous_rate(f, (i + 0.5) * dt) * dt;
    CHECK(bits / f.burst->period_s == doctest::Approx(f.rate_bps).epsilon(1e-3));
    double peak = 0.0;
    for (int i = 0; i < 1000; ++i) peak = std::max(peak, instantaneous_rate(f, i * 0.06));
    CHECK(peak == doctest::Approx(f.rate_bps / 0.25));
  }
}

TEST_CASE("observed pattern of an idle network is all zeros") {
  const auto& topo = reference();
  const auto monitored = monitored_satellites(topo);
  LoadTrace trace(monitored_reference_capacity(topo, monitored), 1.0);
  for (int k = 0; k < 20; ++k) trace.push_interval(std::vector<double>(8, 0.0));
  const auto p = observe_pattern(trace, 20.0, 16);
  CHECK(p.rows == 8);
  CHECK(p.window == 16);
  CHECK(p.data.size() == 8 * 16);
  CHECK(std::all_of(p.data.begin(), p.data.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("1 Gbps through M2 normalizes to 1.0 in the M2 row") {
  const auto& topo = reference();
  const auto monitored = monitored_satellites(topo);
  LoadTrace trace(monitored_reference_capacity(topo, monitored), 1.0);
  std::vector<double> bits(8, 0.0);
  bits[1] = 1e9;
  trace.push_interval(bits);
  const auto p = observe_pattern(trace, 1.0, 16);
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 16; ++c) {
      CHECK(p.at(r, c) == ((r == 1 && c == 15) ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("short history is left-padded and future intervals are invisible") {
  LoadTrace trace(std::vector<double>(8, 1e9), 1.0);
  for (int k = 1; k <= 3; ++k) trace.push_interval(std::vector<double>(8, k * 1e8));
  const auto p = observe_pattern(trace, 2.0, 4);
  CHECK(p.at(0, 0) == 0.0);
  CHECK(p.at(0, 1) == 0.0);
  CHECK(p.at(0, 2) == doctest::Approx(0.1));
  CHECK(p.at(0, 3) == doctest::Approx(0.2));
}

TEST_CASE("shortest-path load at 3.2 Gbps saturates the congested MEO rows") {
  const auto& topo = reference();
  const auto monitored = monitored_satellites(topo);
  const auto flows = select_active_sources(topo, 1600, 1);
  LoadTrace trace(monitored_reference_capacity(topo, monitored), 1.0);
  trace.push_interval(sp_offered_egress(topo, flows, 1.0));
  const auto p = observe_pattern(trace, 1.0, 16);
  // The left egress MEOs clamp. On the right, M4 forwards the two OD pairs that
  // end at M5 via M2-M4 and M6 the one via M3-M6, each ninth of 3.2 Gbps.
  CHECK(p.at(1, 15) == 1.0);
  CHECK(p.at(2, 15) == 1.0);
  CHECK(p.at(3, 15) == doctest::Approx(2.0 / 9 * 3.2).epsilon(0.05));
  CHECK(p.at(5, 15) == doctest::Approx(1.0 / 9 * 3.2).epsilon(0.05));
  CHECK(p.at(6, 15) == 0.0);
  CHECK(p.at(7, 15) == 0.0);
  for (double v : p.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("load trace rejects a wrong row count") {
  LoadTrace trace(std::vector<double>(8, 1e9), 1.0);
  CHECK_THROWS_AS(trace.push_interval(std::vector<double>(7, 0.0)), TrafficError);
}
