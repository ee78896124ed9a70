#include "sagin/training.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace sagin {

std::vector<double> label_from_outcome(double loss_rate, double min_buffer,
                                       const LabelThresholds& thresholds) {
  return loss_rate < thresholds.loss && min_buffer > thresholds.buffer ? nn::choose_label()
                                                                       : nn::reject_label();
}

std::vector<double> label_from_outcome(const MetricsReport& report, double min_buffer,
                                       const LabelThresholds& thresholds) {
  return label_from_outcome(report.loss_rate, min_buffer, thresholds);
}

nn::Tensor make_cnn_input(const TrafficPattern& pattern, std::span<const double> buffers) {
  if (buffers.size() != pattern.rows) {
    throw nn::ShapeError(fmt::format("pattern has {} rows but {} buffer values", pattern.rows,
                                     buffers.size()));
  }
  const std::size_t cols = pattern.window + 1;
  nn::Tensor t({1, pattern.rows, cols});
  for (std::size_t r = 0; r < pattern.rows; ++r) {
    for (std::size_t c = 0; c < pattern.window; ++c) t.data[r * cols + c] = pattern.at(r, c);
    t.data[r * cols + pattern.window] = std::clamp(buffers[r], 0.0, 1.0);
  }
  return t;
}

nn::Tensor fluid_observation(const Topology& topo, const MetricsReport& fluid, std::size_t window) {
  if (fluid.per_link_utilization.size() != topo.port_count()) {
    throw nn::ShapeError("fluid report does not match topology");
  }
  const auto monitored = monitored_satellites(topo);
  const auto reference = monitored_reference_capacity(topo, monitored);
  const std::size_t cols = window + 1;
  nn::Tensor t({1, monitored.size(), cols});
  for (std::size_t r = 0; r < monitored.size(); ++r) {
    double egress = 0.0;
    double full = 0.0;
    double total = 0.0;
    for (const auto& nb : topo.neighbors(monitored[r])) {
      const double util = fluid.per_link_utilization[nb.port];
      const NodeKind k = topo.node(nb.node).kind;
      if (k == NodeKind::Meo || k == NodeKind::Geo) egress += util * topo.port_capacity(nb.port);
      if (util >= 1.0 - 1e-12) full += topo.port_buffer(nb.port);
      total += topo.port_buffer(nb.port);
    }
    const double load = std::clamp(egress / reference[r], 0.0, 1.0);
    for (std::size_t c = 0; c < window; ++c) t.data[r * cols + c] = load;
    t.data[r * cols + window] = total > 0.0 ? 1.0 - full / total : 1.0;
  }
  return t;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : slots_(capacity) {
  if (capacity == 0) throw nn::TrainingError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(nn::TrainSample sample) {
  const std::size_t cap = slots_.size();
  slots_[(head_ + size_) % cap] = std::move(sample);
  if (size_ < cap) {
    ++size_;
  } else {
    head_ = (head_ + 1) % cap;
  }
}

const nn::TrainSample& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay buffer index");
  return slots_[(head_ + i) % slots_.size()];
}

std::vector<nn::TrainSample> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  const std::size_t k = std::min(batch, size_);
  std::vector<std::size_t> idx(size_);
  for (std::size_t i = 0; i < size_; ++i) idx[i] = i;
  std::vector<nn::TrainSample> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(size_ - i);
    std::swap(idx[i], idx[j]);
    out.push_back(at(idx[i]));
  }
  return out;
}

OnlineTrainer::OnlineTrainer(std::size_t combinations, const OnlineConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), buffers_(combinations, ReplayBuffer(cfg.replay_capacity)), rng_(mix_seed(seed, 0x0271)) {
  if (cfg.batch == 0) throw nn::TrainingError("online batch size must be positive");
}

double OnlineTrainer::update(nn::CnnModel& model, std::uint32_t combo, const nn::Tensor& input,
                             const IntervalOutcome& outcome) {
  if (!cfg_.enabled) return -1.0;
  auto& buffer = buffers_.at(combo);
  buffer.push({input, label_from_outcome(outcome.loss_rate, outcome.min_buffer, cfg_.thresholds),
               combo});
  const auto batch = buffer.sample(cfg_.batch, rng_);
  ++steps_;
  return model.train_step(batch, cfg_.learning_rate);
}

std::vector<DemandSample> sample_demands(const Topology& topo, const CombinationSpace& space,
                                         const TrafficConfig& traffic, std::size_t count,
                                         std::uint32_t max_sources, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xde3a));
  std::vector<DemandSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto n = static_cast<std::uint32_t>(rng.below(std::uint64_t{max_sources} + 1));
    const auto flows = select_active_sources(topo, n, rng.next(), traffic);
    DemandSample sample;
    if (traffic.burst.enabled) {
      const double t = rng.uniform(0.0, traffic.burst.period_s);
      for (const Flow& f : flows) {
        sample.demands[OdPair{topo.serving_meo(f.src), topo.serving_meo(f.dst)}] +=
            instantaneous_rate(f, t);
      }
    } else {
      sample.demands = aggregate_od_demands(topo, flows);
    }
    sample.observed_combo = static_cast<std::uint32_t>(rng.below(space.size()));
    out.push_back(std::move(sample));
  }
  return out;
}

PretrainReport pretrain_offline(std::vector<nn::CnnModel>& models, const Topology& topo,
                                const CombinationSpace& space,
                                std::span<const DemandSample> samples, const FluidOracle& oracle,
                                const PretrainConfig& cfg, std::size_t window) {
  if (samples.empty()) throw nn::TrainingError("pretraining needs at least one demand sample");
  if (models.size() != space.size()) {
    throw nn::TrainingError(fmt::format("{} models for {} combinations", models.size(), space.size()));
  }
  if (cfg.batch == 0) throw nn::TrainingError("pretraining batch size must be positive");

  const auto& combos = space.combinations();
  std::vector<std::vector<nn::TrainSample>> per_model(models.size());
  for (const auto& s : samples) {
    const auto observed = oracle(s.demands, combos.at(s.observed_combo));
    const nn::Tensor input = fluid_observation(topo, observed, window);
    std::vector<double> loss(combos.size());
    for (std::size_t c = 0; c < combos.size(); ++c) loss[c] = oracle(s.demands, combos[c]).loss_rate;
    const double best = *std::min_element(loss.begin(), loss.end());
    for (std::size_t c = 0; c < combos.size(); ++c) {
      const auto id = static_cast<std::uint32_t>(c);
      if (loss[c] <= best + 1e-12) {
        per_model[c].push_back({input, nn::choose_label(), id});
      } else if (loss[c] > best + cfg.margin) {
        per_model[c].push_back({input, nn::reject_label(), id});
      }
    }
  }

  PretrainReport report;
  report.samples = samples.size();
  for (std::size_t c = 0; c < models.size(); ++c) {
    auto& data = per_model[c];
    std::size_t pos = 0;
    for (const auto& s : data) pos += s.label[0] > 0.5 ? 1 : 0;
    report.positives.push_back(pos);
    report.negatives.push_back(data.size() - pos);
    if (data.empty()) {
      report.final_loss.push_back(0.0);
      continue;
    }
    Rng rng(mix_seed(cfg.seed, 0x7000 + c));
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<nn::TrainSample> batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
        batch.clear();
        for (std::size_t j = start; j < std::min(order.size(), start + cfg.batch); ++j) {
          batch.push_back(data[order[j]]);
        }
        models[c].train_step(batch, cfg.learning_rate);
      }
    }
    report.final_loss.push_back(models[c].loss(data));
  }
  return report;
}

}  // namespace sagin
