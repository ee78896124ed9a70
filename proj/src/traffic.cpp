#include "sagin/traffic.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sagin/random.hpp"

namespace sagin {

namespace {

// First k entries of a seeded partial Fisher-Yates shuffle.
std::vector<NodeId> draw_without_replacement(std::vector<NodeId> pool, std::uint32_t k, Rng& rng) {
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

std::vector<Flow> select_active_sources(const Topology& topo, std::uint32_t n,
                                        std::uint64_t seed, const TrafficConfig& cfg) {
  const auto left = topo.nodes_of(NodeKind::Ground, Side::Left);
  const auto right = topo.nodes_of(NodeKind::Ground, Side::Right);
  if (n > left.size() || n > right.size()) {
    throw TrafficError(fmt::format("requested {} sources but only {} left / {} right ground nodes",
                                   n, left.size(), right.size()));
  }
  if (!(cfg.rate_bps > 0.0)) throw TrafficError("flow rate must be positive");
  if (cfg.burst.enabled && (!(cfg.burst.period_s > 0.0) || !(cfg.burst.duty > 0.0) ||
                            cfg.burst.duty > 1.0)) {
    throw TrafficError("burst needs period > 0 and duty in (0, 1]");
  }

  Rng rng(mix_seed(seed, 0x5a61));
  const auto sources = draw_without_replacement(left, n, rng);
  const auto dests = draw_without_replacement(right, n, rng);

  std::vector<Flow> flows;
  flows.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Flow f{i, sources[i], dests[i], cfg.rate_bps, std::nullopt};
    if (cfg.burst.enabled) {
      f.burst = BurstParams{cfg.burst.period_s, cfg.burst.duty,
                            rng.uniform(0.0, cfg.burst.period_s)};
    }
    flows.push_back(f);
  }
  return flows;
}

double instantaneous_rate(const Flow& flow, double t) {
  if (!flow.burst) return flow.rate_bps;
  const BurstParams& b = *flow.burst;
  const double pos = std::fmod(t + b.phase_s, b.period_s);
  return pos < b.duty * b.period_s ? flow.rate_bps / b.duty : 0.0;
}

LoadTrace::LoadTrace(std::vector<double> reference_bps, double interval_s)
    : reference_bps_(std::move(reference_bps)), interval_s_(interval_s) {
  if (reference_bps_.empty()) throw TrafficError("load trace needs at least one monitored row");
  if (!(interval_s_ > 0.0)) throw TrafficError("load trace interval must be positive");
}

void LoadTrace::push_interval(std::span<const double> egress_bits) {
  if (egress_bits.size() != rows()) {
    throw TrafficError(fmt::format("load trace expects {} rows, got {}", rows(), egress_bits.size()));
  }
  history_.insert(history_.end(), egress_bits.begin(), egress_bits.end());
}

TrafficPattern observe_pattern(const LoadTrace& trace, double now, std::size_t window) {
  TrafficPattern pattern{trace.rows(), window, trace.interval_s(),
                         std::vector<double>(trace.rows() * window, 0.0)};
  const auto done_by_now =
      static_cast<std::size_t>(std::max(0.0, std::floor(now / trace.interval_s() + 1e-9)));
  const std::size_t completed = std::min(trace.intervals(), done_by_now);
  const std::size_t used = std::min(completed, window);
  for (std::size_t c = 0; c < used; ++c) {
    const std::size_t k = completed - used + c;
    const std::size_t col = window - used + c;
    for (std::size_t r = 0; r < trace.rows(); ++r) {
      const double load = trace.bits(k, r) / (trace.reference_bps(r) * trace.interval_s());
      pattern.data[r * window + col] = std::clamp(load, 0.0, 1.0);
    }
  }
  return pattern;
}

std::vector<double> monitored_reference_capacity(const Topology& topo,
                                                 std::span<const NodeId> monitored) {
  std::vector<double> out;
  out.reserve(monitored.size());
  for (NodeId id : monitored) {
    double best = 0.0;
    for (const auto& nb : topo.neighbors(id)) {
      const NodeKind k = topo.node(nb.node).kind;
      if (k == NodeKind::Meo || k == NodeKind::Geo) best = std::max(best, topo.port_capacity(nb.port));
    }
    if (best <= 0.0) {
      throw TrafficError(fmt::format("monitored node {} has no satellite egress link", id.index));
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace sagin
