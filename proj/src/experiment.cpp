#include "sagin/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "sagin/dnn_policy.hpp"
#include "sagin/random.hpp"

namespace sagin {

bool row_less(const SweepRow& a, const SweepRow& b) {
  return std::tie(a.policy, a.n_sources, a.seed) < std::tie(b.policy, b.n_sources, b.seed);
}

std::vector<nn::CnnModel> initial_models(const ExperimentConfig& cfg) {
  const Topology topo = build_reference_topology(cfg.topology);
  const CombinationSpace space(topo);
  const auto arch = cfg.architecture();
  std::vector<nn::CnnModel> models;
  models.reserve(space.size());
  for (std::size_t c = 0; c < space.size(); ++c) {
    models.push_back(nn::CnnModel::build(arch, mix_seed(cfg.neural.init_seed, c)));
  }
  return models;
}

PretrainReport pretrain_models(const ExperimentConfig& cfg, std::vector<nn::CnnModel>& models) {
  const Topology topo = build_reference_topology(cfg.topology);
  const CombinationSpace space(topo);
  const auto samples = sample_demands(topo, space, cfg.traffic, cfg.pretrain.samples,
                                      cfg.sweep.n_max, cfg.pretrain.seed);
  const FluidOracle oracle = [&](const OdDemands& d, const PathCombination& c) {
    return run_fluid_eval(topo, space, d, c);
  };
  return pretrain_offline(models, topo, space, samples, oracle, cfg.pretrain, cfg.routing.window);
}

namespace {

std::filesystem::path model_path(const std::filesystem::path& dir, std::size_t c) {
  return dir / fmt::format("model_{:02}.bin", c);
}

}  // namespace

void save_models(const std::filesystem::path& dir, const std::vector<nn::CnnModel>& models) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ExperimentError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  for (std::size_t c = 0; c < models.size(); ++c) models[c].save(model_path(dir, c));
}

std::vector<nn::CnnModel> load_models(const std::filesystem::path& dir, const ExperimentConfig& cfg) {
  const Topology topo = build_reference_topology(cfg.topology);
  const std::size_t count = CombinationSpace(topo).size();
  const auto arch = cfg.architecture();
  std::vector<nn::CnnModel> models;
  for (std::size_t c = 0; c < count; ++c) {
    const auto path = model_path(dir, c);
    if (!std::filesystem::exists(path)) {
      throw ExperimentError(fmt::format("missing checkpoint {}", path.string()));
    }
    models.push_back(nn::CnnModel::load(path));
    if (!(models.back().architecture() == arch)) {
      throw ExperimentError(fmt::format("{} does not match the configured architecture", path.string()));
    }
  }
  return models;
}

std::vector<nn::CnnModel> obtain_models(const ExperimentConfig& cfg,
                                        const std::optional<std::filesystem::path>& ckpt_dir) {
  if (ckpt_dir && std::filesystem::exists(model_path(*ckpt_dir, 0))) {
    return load_models(*ckpt_dir, cfg);
  }
  if (!cfg.pretrain.enabled) {
    throw ExperimentError(ckpt_dir ? fmt::format("no checkpoints in {} and pretraining is disabled",
                                                 ckpt_dir->string())
                                   : std::string("dnn policy needs checkpoints or pretraining"));
  }
  auto models = initial_models(cfg);
  pretrain_models(cfg, models);
  return models;
}

DnnPolicyConfig dnn_policy_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  DnnPolicyConfig d;
  d.window = cfg.routing.window;
  d.explore.epsilon = cfg.routing.epsilon;
  d.explore.training = cfg.routing.online_training;
  d.online.enabled = cfg.routing.online_training;
  d.online.learning_rate = cfg.routing.learning_rate;
  d.online.replay_capacity = cfg.routing.replay_capacity;
  d.online.batch = cfg.routing.batch;
  d.online.thresholds = cfg.routing.thresholds;
  d.seed = seed;
  return d;
}

std::unique_ptr<RoutingPolicy> make_policy(const std::string& name, const ExperimentConfig& cfg,
                                           const std::vector<nn::CnnModel>* models,
                                           std::uint64_t seed) {
  if (name == "sp") return std::make_unique<ShortestPathPolicy>();
  if (name == "dnn") {
    if (!models) throw ExperimentError("dnn policy needs models");
    return std::make_unique<DnnPolicy>(*models, dnn_policy_config(cfg, seed));
  }
  throw ExperimentError(fmt::format("unknown policy '{}'", name));
}

RunOutcome run_single(const ExperimentConfig& cfg, const Topology& topo, const std::string& policy,
                      std::uint32_t n_sources, std::uint32_t rep,
                      const std::vector<nn::CnnModel>* models, const SimHooks& hooks) {
  const auto flows = select_active_sources(topo, n_sources, cfg.traffic.seed + rep, cfg.traffic);
  const std::uint64_t seed = cfg.simulation.seed + rep;
  auto pol = make_policy(policy, cfg, models, seed);
  RunOutcome out;
  out.metrics = run_packet_sim(topo, flows, *pol, cfg.sim_config(seed), hooks);
  if (auto* dnn = dynamic_cast<DnnPolicy*>(pol.get())) out.selections = dnn->selections();
  return out;
}

namespace {

double round_to(double v, double scale) { return std::round(v * scale) / scale; }

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg, const std::vector<nn::CnnModel>* models,
                      const SweepProgress& progress) {
  validate(cfg);
  const Topology topo = build_reference_topology(cfg.topology);

  struct Job {
    std::string policy;
    std::uint32_t n;
    std::uint32_t rep;
  };
  std::vector<Job> jobs;
  for (const auto& policy : cfg.sweep.policies) {
    if (policy == "dnn" && !models) throw ExperimentError("sweep includes dnn but no models were given");
    for (std::uint32_t n : cfg.sweep_points()) {
      for (std::uint32_t rep = 0; rep < cfg.sweep.repetitions; ++rep) jobs.push_back({policy, n, rep});
    }
  }

  std::vector<SweepRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const auto& job = jobs[i];
        const auto m = run_single(cfg, topo, job.policy, job.n, job.rep, models).metrics;
        if (!m.conserves_bits()) {
          throw SimulationError(fmt::format("bit conservation violated: {} n={} rep={}", job.policy,
                                            job.n, job.rep));
        }
        SweepRow row{job.policy,
                     job.n,
                     cfg.simulation.seed + job.rep,
                     std::round(m.throughput_bps),
                     round_to(m.loss_rate, 1e6),
                     round_to(m.mean_delay_s, 1e6)};
        std::lock_guard lock(mu);
        rows[i] = row;
        if (progress) progress(row);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
        return;
      }
    }
  };

  std::size_t threads = cfg.sweep.threads ? cfg.sweep.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::sort(rows.begin(), rows.end(), row_less);
  return SweepResult{std::move(rows)};
}

}  // namespace sagin
