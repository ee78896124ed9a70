#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sagin/netsim.hpp"
#include "sagin/neural.hpp"
#include "sagin/random.hpp"
#include "sagin/routing.hpp"
#include "sagin/traffic.hpp"

namespace sagin {

struct LabelThresholds {
  double loss = 0.001;   // choose only below this interval loss rate
  double buffer = 0.1;   // and only above this minimum remaining-buffer fraction

  bool operator==(const LabelThresholds&) const = default;
};

// (1,0) when the interval was loss-free enough and no monitored buffer was
// close to full, else (0,1).
std::vector<double> label_from_outcome(double loss_rate, double min_buffer,
                                       const LabelThresholds& thresholds);
std::vector<double> label_from_outcome(const MetricsReport& report, double min_buffer,
                                       const LabelThresholds& thresholds);

// Single-channel rows x (window + 1) input: the traffic pattern, then the
// remaining-buffer column.
nn::Tensor make_cnn_input(const TrafficPattern& pattern, std::span<const double> buffers);

// The input the monitored satellites would observe in steady state under a fluid
// evaluation: constant egress load columns and a buffer column in which every
// saturated egress queue counts as full.
nn::Tensor fluid_observation(const Topology& topo, const MetricsReport& fluid, std::size_t window);

// Fixed-capacity FIFO of training samples; the oldest sample is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 512);

  void push(nn::TrainSample sample);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return slots_.size(); }
  // i = 0 is the oldest retained sample.
  const nn::TrainSample& at(std::size_t i) const;
  // Up to `batch` distinct samples drawn uniformly.
  std::vector<nn::TrainSample> sample(std::size_t batch, Rng& rng) const;

 private:
  std::vector<nn::TrainSample> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

struct OnlineConfig {
  bool enabled = true;
  double learning_rate = 0.01;
  std::size_t replay_capacity = 512;
  std::size_t batch = 32;
  LabelThresholds thresholds;
};

// Per-combination replay buffers plus one gradient step per completed interval.
class OnlineTrainer {
 public:
  OnlineTrainer(std::size_t combinations, const OnlineConfig& cfg, std::uint64_t seed);

  // Labels the interval just run under `combo`, stores it, and trains that
  // combination's model on a mini-batch from its buffer. Returns the loss of
  // that step, or a negative value when training is disabled.
  double update(nn::CnnModel& model, std::uint32_t combo, const nn::Tensor& input,
                const IntervalOutcome& outcome);

  const ReplayBuffer& buffer(std::uint32_t combo) const { return buffers_.at(combo); }
  std::size_t steps() const { return steps_; }

 private:
  OnlineConfig cfg_;
  std::vector<ReplayBuffer> buffers_;
  Rng rng_;
  std::size_t steps_ = 0;
};

struct DemandSample {
  OdDemands demands;
  std::uint32_t observed_combo = 0;  // routing in force when the input was observed
};

struct PretrainConfig {
  bool enabled = true;
  std::size_t samples = 200;
  std::size_t epochs = 8;
  std::size_t batch = 4;
  double learning_rate = 0.01;
  double margin = 0.01;
  std::uint64_t seed = 1;

  bool operator==(const PretrainConfig&) const = default;
};

struct PretrainReport {
  std::size_t samples = 0;
  std::vector<std::size_t> positives;  // per combination
  std::vector<std::size_t> negatives;
  std::vector<double> final_loss;      // mean loss over each model's own samples
};

using FluidOracle = std::function<MetricsReport(const OdDemands&, const PathCombination&)>;

// Random demand snapshots: source count uniform in [0, max_sources], aggregated
// to OD demands (instantaneous rates at a random time for bursty traffic), each
// with a random observed combination.
std::vector<DemandSample> sample_demands(const Topology& topo, const CombinationSpace& space,
                                         const TrafficConfig& traffic, std::size_t count,
                                         std::uint32_t max_sources, std::uint64_t seed);

// Labels each sample by evaluating every combination with the oracle: the
// loss-minimizing ones get (1,0), those worse than best + margin get (0,1), the
// rest are skipped. Then trains each model on its own samples.
PretrainReport pretrain_offline(std::vector<nn::CnnModel>& models, const Topology& topo,
                                const CombinationSpace& space,
                                std::span<const DemandSample> samples, const FluidOracle& oracle,
                                const PretrainConfig& cfg, std::size_t window);

}  // namespace sagin
