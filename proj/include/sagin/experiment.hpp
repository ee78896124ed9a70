#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sagin/config.hpp"
#include "sagin/dnn_policy.hpp"
#include "sagin/netsim.hpp"
#include "sagin/neural.hpp"
#include "sagin/routing.hpp"
#include "sagin/training.hpp"

namespace sagin {

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepRow {
  std::string policy;
  std::uint32_t n_sources = 0;
  std::uint64_t seed = 0;
  double throughput_bps = 0.0;
  double loss_rate = 0.0;
  double mean_delay_s = 0.0;

  bool operator==(const SweepRow&) const = default;
};

// Canonical order: (policy, n_sources, seed).
bool row_less(const SweepRow& a, const SweepRow& b);

struct SweepResult {
  std::vector<SweepRow> rows;

  bool operator==(const SweepResult&) const = default;
};

// Freshly initialized, untrained models, one per path combination.
std::vector<nn::CnnModel> initial_models(const ExperimentConfig& cfg);

// Offline fluid-oracle pretraining of `models` as configured.
PretrainReport pretrain_models(const ExperimentConfig& cfg, std::vector<nn::CnnModel>& models);

// model_00.bin .. model_26.bin
void save_models(const std::filesystem::path& dir, const std::vector<nn::CnnModel>& models);
std::vector<nn::CnnModel> load_models(const std::filesystem::path& dir, const ExperimentConfig& cfg);

// Loads checkpoints from `ckpt_dir` when given and present, otherwise pretrains
// (or fails when pretraining is disabled).
std::vector<nn::CnnModel> obtain_models(const ExperimentConfig& cfg,
                                        const std::optional<std::filesystem::path>& ckpt_dir);

DnnPolicyConfig dnn_policy_config(const ExperimentConfig& cfg, std::uint64_t seed);

std::unique_ptr<RoutingPolicy> make_policy(const std::string& name, const ExperimentConfig& cfg,
                                           const std::vector<nn::CnnModel>* models,
                                           std::uint64_t seed);

struct RunOutcome {
  MetricsReport metrics;
  std::vector<std::uint32_t> selections;  // dnn only
};

// One packet simulation: repetition `rep` uses flow seed traffic.seed + rep and
// simulation seed simulation.seed + rep.
RunOutcome run_single(const ExperimentConfig& cfg, const Topology& topo, const std::string& policy,
                      std::uint32_t n_sources, std::uint32_t rep,
                      const std::vector<nn::CnnModel>* models, const SimHooks& hooks = {});

using SweepProgress = std::function<void(const SweepRow&)>;

// Every (policy, n, repetition) of the sweep grid. Values are rounded to CSV
// precision so the result equals its own CSV round trip. `models` is required
// when the grid includes the dnn policy; each run starts from a copy.
SweepResult run_sweep(const ExperimentConfig& cfg, const std::vector<nn::CnnModel>* models,
                      const SweepProgress& progress = {});

}  // namespace sagin
