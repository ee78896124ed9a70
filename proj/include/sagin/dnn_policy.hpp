#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sagin/neural.hpp"
#include "sagin/random.hpp"
#include "sagin/routing.hpp"
#include "sagin/training.hpp"

namespace sagin {

struct ExploreParams {
  double epsilon = 0.0;  // only honoured while training
  bool training = false;
};

// Argmax of p(choose); ties go to the lowest combo id.
std::uint32_t argmax_choose(std::span<const double> p_choose);

// Evaluates every model on `features` and returns the chosen combination. With
// probability epsilon (training only) a uniform random combination instead.
std::uint32_t dl_select_combination(const nn::Tensor& features,
                                    std::span<const nn::CnnModel> models,
                                    std::size_t combinations, const ExploreParams& explore,
                                    Rng& rng);

struct DnnPolicyConfig {
  std::size_t window = 16;
  ExploreParams explore;
  OnlineConfig online;
  std::uint64_t seed = 1;
};

// Re-selects a path combination at every decision interval from the per-
// combination CNN outputs and, when enabled, trains the chosen model online.
class DnnPolicy final : public RoutingPolicy {
 public:
  DnnPolicy(std::vector<nn::CnnModel> models, const DnnPolicyConfig& cfg);

  std::string_view name() const override { return "dnn"; }
  void prepare(const Topology& topo, std::span<const Flow> flows) override;
  bool on_interval(const IntervalObservation& obs) override;
  const Path& route(std::size_t flow_index) const override;

  const std::vector<nn::CnnModel>& models() const { return models_; }
  const std::vector<std::uint32_t>& selections() const { return selections_; }
  const OnlineTrainer& trainer() const { return trainer_; }

 private:
  std::vector<nn::CnnModel> models_;
  DnnPolicyConfig cfg_;
  Rng rng_;
  OnlineTrainer trainer_;
  std::vector<std::vector<Path>> routes_;  // [combo][flow]
  std::optional<std::uint32_t> current_;
  nn::Tensor last_input_;
  std::vector<std::uint32_t> selections_;
};

}  // namespace sagin
