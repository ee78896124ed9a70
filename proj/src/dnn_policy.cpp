#include "sagin/dnn_policy.hpp"

#include <fmt/format.h>

namespace sagin {

std::uint32_t argmax_choose(std::span<const double> p_choose) {
  if (p_choose.empty()) throw RoutingError("no combinations to choose from");
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < p_choose.size(); ++c) {
    if (p_choose[c] > p_choose[best]) best = c;
  }
  return best;
}

std::uint32_t dl_select_combination(const nn::Tensor& features,
                                    std::span<const nn::CnnModel> models,
                                    std::size_t combinations, const ExploreParams& explore,
                                    Rng& rng) {
  if (models.size() != combinations) {
    throw RoutingError(fmt::format("expected one model per combination ({}), got {}",
                                   combinations, models.size()));
  }
  if (explore.training && explore.epsilon > 0.0 && rng.uniform() < explore.epsilon) {
    return static_cast<std::uint32_t>(rng.below(combinations));
  }
  std::vector<double> p(models.size());
  for (std::size_t c = 0; c < models.size(); ++c) p[c] = models[c].forward(features)[0];
  return argmax_choose(p);
}

DnnPolicy::DnnPolicy(std::vector<nn::CnnModel> models, const DnnPolicyConfig& cfg)
    : models_(std::move(models)),
      cfg_(cfg),
      rng_(mix_seed(cfg.seed, 0xd11)),
      trainer_(models_.size(), cfg.online, cfg.seed) {}

void DnnPolicy::prepare(const Topology& topo, std::span<const Flow> flows) {
  CombinationSpace space(topo);
  if (models_.size() != space.size()) {
    throw RoutingError(fmt::format("expected one model per combination ({}), got {}",
                                   space.size(), models_.size()));
  }
  routes_ = routes_per_combination(topo, space, flows);
  current_.reset();
  selections_.clear();
}

bool DnnPolicy::on_interval(const IntervalObservation& obs) {
  if (!obs.trace) throw RoutingError("dnn policy needs a load trace");
  const nn::Tensor input =
      make_cnn_input(observe_pattern(*obs.trace, obs.now_s, cfg_.window), obs.buffers);
  if (current_ && cfg_.online.enabled) {
    trainer_.update(models_[*current_], *current_, last_input_, obs.last);
  }
  ExploreParams explore = cfg_.explore;
  explore.training = explore.training && cfg_.online.enabled;
  const std::uint32_t pick = dl_select_combination(input, models_, routes_.size(), explore, rng_);
  const bool changed = !current_ || *current_ != pick;
  current_ = pick;
  last_input_ = input;
  selections_.push_back(pick);
  return changed;
}

const Path& DnnPolicy::route(std::size_t flow_index) const {
  if (!current_) throw RoutingError("dnn policy has not selected a combination yet");
  return routes_[*current_].at(flow_index);
}

}  // namespace sagin
