#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sagin/topology.hpp"

namespace sagin {

struct BurstParams {
  double period_s = 60.0;
  double duty = 0.5;
  double phase_s = 0.0;

  bool operator==(const BurstParams&) const = default;
};

struct Flow {
  std::uint32_t flow_id = 0;
  NodeId src;
  NodeId dst;
  double rate_bps = 0.0;
  std::optional<BurstParams> burst;

  bool operator==(const Flow&) const = default;
};

struct BurstConfig {
  bool enabled = false;
  double period_s = 60.0;
  double duty = 0.5;

  bool operator==(const BurstConfig&) const = default;
};

struct TrafficConfig {
  std::uint32_t n_sources = 1600;
  double rate_bps = 2e6;
  BurstConfig burst;
  std::uint64_t seed = 1;

  bool operator==(const TrafficConfig&) const = default;
};

class TrafficError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// n distinct left ground sources, each paired with a distinct right ground
// destination. Burst phases are drawn per flow when bursts are enabled.
std::vector<Flow> select_active_sources(const Topology& topo, std::uint32_t n,
                                        std::uint64_t seed, const TrafficConfig& cfg = {});

// Rate at time t; bursty flows send at rate/duty during the on-phase.
double instantaneous_rate(const Flow& flow, double t);

// Per-interval egress bits of the monitored satellites.
class LoadTrace {
 public:
  LoadTrace(std::vector<double> reference_bps, double interval_s);

  void push_interval(std::span<const double> egress_bits);

  std::size_t rows() const { return reference_bps_.size(); }
  std::size_t intervals() const { return history_.size() / rows(); }
  double interval_s() const { return interval_s_; }
  double reference_bps(std::size_t row) const { return reference_bps_[row]; }
  // Egress bits of `row` during completed interval `k` (0 = oldest).
  double bits(std::size_t k, std::size_t row) const { return history_[k * rows() + row]; }

 private:
  std::vector<double> reference_bps_;
  double interval_s_;
  std::vector<double> history_;
};

// rows x window matrix of normalized egress load; column 0 is the oldest.
struct TrafficPattern {
  std::size_t rows = 0;
  std::size_t window = 0;
  double interval_s = 1.0;
  std::vector<double> data;

  double at(std::size_t row, std::size_t col) const { return data[row * window + col]; }
};

// Last `window` intervals completed by `now`, normalized and clamped to [0,1],
// left-padded with zeros when history is short.
TrafficPattern observe_pattern(const LoadTrace& trace, double now, std::size_t window);

// Reference capacity for each monitored satellite: its largest egress capacity
// towards another MEO/GEO node.
std::vector<double> monitored_reference_capacity(const Topology& topo,
                                                 std::span<const NodeId> monitored);

}  // namespace sagin
