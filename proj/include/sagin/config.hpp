#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sagin/netsim.hpp"
#include "sagin/neural.hpp"
#include "sagin/topology.hpp"
#include "sagin/traffic.hpp"
#include "sagin/training.hpp"

namespace sagin {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RoutingConfig {
  std::string policy = "sp";  // "sp" or "dnn"
  std::size_t window = 16;    // T, intervals of traffic history
  double interval_s = 1.0;
  double epsilon = 0.0;
  bool online_training = true;
  double learning_rate = 0.01;
  std::size_t replay_capacity = 512;
  std::size_t batch = 32;
  LabelThresholds thresholds;

  bool operator==(const RoutingConfig&) const = default;
};

struct NeuralConfig {
  std::vector<std::size_t> conv_channels{8, 16, 16};
  std::size_t kernel = 3;
  std::vector<std::size_t> hidden{64, 32};
  std::uint64_t init_seed = 1;

  bool operator==(const NeuralConfig&) const = default;
};

struct SweepConfig {
  std::uint32_t n_min = 100;
  std::uint32_t n_max = 1600;
  std::uint32_t n_step = 100;
  std::uint32_t repetitions = 1;
  std::vector<std::string> policies{"sp", "dnn"};
  std::uint32_t threads = 0;  // 0: hardware concurrency

  bool operator==(const SweepConfig&) const = default;
};

struct SimulationConfig {
  double duration_s = 60.0;
  double warmup_s = 5.0;
  std::uint32_t packet_bits = 12000;
  std::uint64_t seed = 1;

  bool operator==(const SimulationConfig&) const = default;
};

struct ExperimentConfig {
  TopologyConfig topology;
  TrafficConfig traffic;
  SimulationConfig simulation;
  RoutingConfig routing;
  NeuralConfig neural;
  PretrainConfig pretrain;
  SweepConfig sweep;
  std::string output_dir = ".";

  bool operator==(const ExperimentConfig&) const = default;

  SimConfig sim_config(std::uint64_t seed) const;
  nn::Architecture architecture() const;
  std::vector<std::uint32_t> sweep_points() const;
};

// Parses a YAML document; every section and key is optional, unknown keys are
// rejected. Throws ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

// SAGIN_SEED overrides the simulation and traffic seeds, SAGIN_OUT_DIR the
// output directory.
void apply_env_overrides(ExperimentConfig& cfg);

// Throws ConfigError on values no run could use.
void validate(const ExperimentConfig& cfg);

}  // namespace sagin
