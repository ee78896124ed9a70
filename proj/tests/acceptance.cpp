// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "sagin/config.hpp"
#include "sagin/experiment.hpp"
#include "sagin/random.hpp"
#include "sagin/report.hpp"

using namespace sagin;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kLowLoadLoss = 0.005;        // criterion 1
constexpr double kLowLoadThroughput = 0.02;   // criterion 1
constexpr double kOnsetLoss = 0.01;           // criteria 2, 3
constexpr std::uint32_t kSpOnsetLo = 600, kSpOnsetHi = 1000;
constexpr double kPlateauFlatness = 0.15;
constexpr std::uint32_t kDlOnsetLo = 1000, kDlOnsetHi = 1500;
constexpr double kDlGain = 0.20;
constexpr std::size_t kMinPretrainSamples = 200;
constexpr double kTopUtilBand = 0.95;         // criterion 4: "top" = within 5% of the max
constexpr double kGeoIdle = 0.01;
constexpr int kFluidScenarios = 20;           // criterion 5
constexpr double kFluidLoadCap = 0.6;
constexpr double kFluidAgreement = 0.05;
constexpr double kBudgetSeconds = 15 * 60;    // criterion 8

int failures = 0;
std::atomic<int> conservation_violations{0};

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  if (!ok) ++failures;
  fmt::print("criterion {} {}  {}: {}\n", id, ok ? "PASS" : "FAIL", what, detail);
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs fn(i) for i in [0, n) on all hardware threads; results by index.
template <class T>
std::vector<T> parallel_map(std::size_t n, const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

// Sweep that also counts conservation failures instead of stopping at the first.
SweepResult checked_sweep(const ExperimentConfig& cfg, const std::vector<nn::CnnModel>& models) {
  try {
    return run_sweep(cfg, &models);
  } catch (const SimulationError& e) {
    ++conservation_violations;
    fmt::print("  simulation error: {}\n", e.what());
    return {};
  }
}

const SweepRow* find_row(const SweepResult& r, const std::string& policy, std::uint32_t n) {
  for (const auto& row : r.rows) {
    if (row.policy == policy && row.n_sources == n) return &row;
  }
  return nullptr;
}

std::optional<std::uint32_t> loss_onset(const SweepResult& r, const std::string& policy) {
  for (const auto& row : r.rows) {
    if (row.policy == policy && row.loss_rate > kOnsetLoss) return row.n_sources;
  }
  return std::nullopt;
}

std::string onset_str(std::optional<std::uint32_t> n) { return n ? fmt::format("{}", *n) : "none"; }

std::string loss_curve(const SweepResult& r, const std::string& policy) {
  std::string s;
  for (const auto& row : r.rows) {
    if (row.policy == policy) s += fmt::format(" {}:{:.2f}%", row.n_sources, 100 * row.loss_rate);
  }
  return s;
}

// ---------------------------------------------------------------------------

void criterion_1(const ExperimentConfig& base, const std::vector<nn::CnnModel>& models) {
  auto cfg = base;
  cfg.simulation.duration_s = 60.0;
  cfg.simulation.warmup_s = 5.0;
  cfg.sweep.n_min = 100;
  cfg.sweep.n_max = 600;
  cfg.sweep.n_step = 100;
  cfg.sweep.repetitions = 3;
  cfg.sweep.policies = {"sp", "dnn"};
  cfg.traffic.burst.enabled = false;
  const auto t0 = Clock::now();
  const auto result = checked_sweep(cfg, models);
  double worst_loss = 0.0, worst_thr = 0.0;
  for (const auto& row : result.rows) {
    const double offered = row.n_sources * cfg.traffic.rate_bps;
    worst_loss = std::max(worst_loss, row.loss_rate);
    worst_thr = std::max(worst_thr, std::abs(row.throughput_bps - offered) / offered);
  }
  const bool ok = result.rows.size() == 36 && worst_loss < kLowLoadLoss && worst_thr < kLowLoadThroughput;
  report(1, ok, "low-load equivalence (n<=600, 60 s, 3 seeds, sp+dnn)",
         fmt::format("{} runs, worst loss {:.4f}% (<{}%), worst throughput deviation {:.3f}% (<{}%), {:.0f} s",
                     result.rows.size(), 100 * worst_loss, 100 * kLowLoadLoss, 100 * worst_thr,
                     100 * kLowLoadThroughput, seconds_since(t0)));
}

void criterion_2(const SweepResult& grid, double cross_section) {
  const auto onset = loss_onset(grid, "sp");
  const auto* at1600 = find_row(grid, "sp", 1600);
  const auto* at1200 = find_row(grid, "sp", 1200);
  bool ok = onset && *onset >= kSpOnsetLo && *onset <= kSpOnsetHi && at1600 && at1200;
  double flat = 1.0;
  if (at1600 && at1200) {
    flat = std::abs(at1600->throughput_bps - at1200->throughput_bps) / at1200->throughput_bps;
    ok = ok && at1600->throughput_bps <= cross_section && flat <= kPlateauFlatness;
  }
  report(2, ok, "sp saturation",
         fmt::format("onset {} (in [{}, {}]), thr(1600) {:.3f} Gbps (<= {:.1f}), |thr(1600)-thr(1200)|/thr(1200) "
                     "{:.1f}% (<= {}%); loss:{}",
                     onset_str(onset), kSpOnsetLo, kSpOnsetHi, at1600 ? at1600->throughput_bps / 1e9 : 0.0,
                     cross_section / 1e9, 100 * flat, 100 * kPlateauFlatness, loss_curve(grid, "sp")));
}

void criterion_3(const ExperimentConfig& cfg, const PretrainReport& pre, const SweepResult& grid) {
  const auto onset = loss_onset(grid, "dnn");
  const auto* dl = find_row(grid, "dnn", 1600);
  const auto* sp = find_row(grid, "sp", 1600);
  const double gain = (dl && sp) ? dl->throughput_bps / sp->throughput_bps - 1.0 : 0.0;
  const bool trained = pre.samples >= kMinPretrainSamples && cfg.routing.online_training;
  const bool onset_ok = onset && *onset >= kDlOnsetLo && *onset <= kDlOnsetHi;
  const bool ok = trained && onset_ok && gain >= kDlGain;
  report(3, ok, "dl improvement",
         fmt::format("pretrain samples {} (>= {}), online training {}, onset {} (in [{}, {}]), "
                     "thr(1600) dnn/sp - 1 = {:.1f}% (>= {}%); loss:{}",
                     pre.samples, kMinPretrainSamples, cfg.routing.online_training ? "on" : "off",
                     onset_str(onset), kDlOnsetLo, kDlOnsetHi, 100 * gain, 100 * kDlGain,
                     loss_curve(grid, "dnn")));
}

void criterion_4(const ExperimentConfig& cfg, const Topology& topo) {
  const auto out = run_single(cfg, topo, "sp", 1600, 0, nullptr);
  if (!out.metrics.conserves_bits()) ++conservation_violations;
  const auto& util = out.metrics.per_link_utilization;
  auto is_sat = [&](NodeId n) {
    const auto k = topo.node(n).kind;
    return k == NodeKind::Meo || k == NodeKind::Geo;
  };
  const auto meos = topo.nodes_of(NodeKind::Meo);
  const auto geos = topo.nodes_of(NodeKind::Geo);
  const std::vector<NodeId> congested{meos[1], meos[2], meos[3], meos[5]};
  double max_util = 0.0;
  for (std::uint32_t p = 0; p < topo.port_count(); ++p) {
    const auto port = topo.port(p);
    if (is_sat(port.from) && is_sat(port.to)) max_util = std::max(max_util, util[p]);
  }
  bool subset = max_util > 0.0;
  std::string top;
  for (std::uint32_t p = 0; p < topo.port_count(); ++p) {
    const auto port = topo.port(p);
    if (!is_sat(port.from) || !is_sat(port.to) || util[p] < kTopUtilBand * max_util) continue;
    top += fmt::format(" {}->{}:{:.3f}", port.from.index, port.to.index, util[p]);
    subset = subset && std::find(congested.begin(), congested.end(), port.from) != congested.end();
  }
  const double geo_util = std::max(util[*topo.port_between(geos[0], geos[1])],
                                   util[*topo.port_between(geos[1], geos[0])]);
  report(4, subset && geo_util < kGeoIdle, "congestion locus (sp, n=1600)",
         fmt::format("top satellite links{} all leave M2/M3/M4/M6: {}; G1-G2 utilization {:.4f}% (<{}%)", top,
                     subset ? "yes" : "no", 100 * geo_util, 100 * kGeoIdle));
}

void criterion_5(const ExperimentConfig& cfg, const Topology& topo) {
  const CombinationSpace space(topo);
  struct Scenario {
    std::uint32_t n;
    std::uint32_t combo;
    std::uint64_t seed;
    double fluid_bps;
  };
  std::vector<Scenario> scenarios;
  Rng rng(5150);
  int rejected = 0;
  while (scenarios.size() < kFluidScenarios) {
    Scenario s{static_cast<std::uint32_t>(1 + rng.below(1600)), static_cast<std::uint32_t>(rng.below(27)),
               rng.next(), 0.0};
    const auto flows = select_active_sources(topo, s.n, s.seed, cfg.traffic);
    const auto routes = routes_per_combination(topo, space, flows);
    std::vector<FluidFlow> fluid;
    for (std::size_t i = 0; i < flows.size(); ++i) fluid.push_back({routes[s.combo][i], flows[i].rate_bps});
    const auto r = run_fluid_paths(topo, fluid);
    const double peak = *std::max_element(r.per_link_utilization.begin(), r.per_link_utilization.end());
    if (peak > kFluidLoadCap) {
      ++rejected;
      continue;
    }
    s.fluid_bps = r.throughput_bps;
    scenarios.push_back(s);
  }
  const auto worst = parallel_map<double>(scenarios.size(), [&](std::size_t i) {
    const auto& s = scenarios[i];
    const auto flows = select_active_sources(topo, s.n, s.seed, cfg.traffic);
    FixedCombinationPolicy policy(s.combo);
    const auto m = run_packet_sim(topo, flows, policy, cfg.sim_config(cfg.simulation.seed));
    if (!m.conserves_bits()) ++conservation_violations;
    return std::abs(m.throughput_bps - s.fluid_bps) / s.fluid_bps;
  });
  const double w = *std::max_element(worst.begin(), worst.end());
  report(5, w <= kFluidAgreement, "fluid/packet agreement",
         fmt::format("{} loss-free scenarios (every link <= {}% loaded, {} redrawn), worst throughput "
                     "difference {:.3f}% (<= {}%)",
                     scenarios.size(), 100 * kFluidLoadCap, rejected, 100 * w, 100 * kFluidAgreement));
}

// Central differences for every parameter of a small network.
double worst_gradient_error() {
  nn::Architecture arch;
  arch.rows = 4;
  arch.cols = 5;
  arch.conv_channels = {2, 3, 2};
  arch.kernel = 3;
  arch.hidden = {6, 4};
  auto model = nn::CnnModel::build(arch, 31);
  Rng rng(8);
  for (auto& l : model.conv_layers()) for (double& b : l.bias) b = rng.uniform(0.05, 0.2);
  for (auto& l : model.dense_layers()) for (double& b : l.bias) b = rng.uniform(0.05, 0.2);
  std::vector<nn::TrainSample> batch;
  for (int i = 0; i < 3; ++i) {
    nn::Tensor t({1, arch.rows, arch.cols});
    for (double& x : t.data) x = rng.uniform();
    batch.push_back({t, i % 2 ? nn::reject_label() : nn::choose_label(), 0});
  }
  nn::CnnModel::Gradients g;
  model.loss_and_gradients(batch, g);
  std::vector<const std::vector<double>*> analytic;
  for (const auto& l : g.conv) analytic.push_back(&l.weight), analytic.push_back(&l.bias);
  for (const auto& l : g.dense) analytic.push_back(&l.weight), analytic.push_back(&l.bias);
  auto blocks = model.parameters();
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      const double saved = blocks[b][i];
      blocks[b][i] = saved + h;
      const double up = model.loss(batch);
      blocks[b][i] = saved - h;
      const double down = model.loss(batch);
      blocks[b][i] = saved;
      const double numeric = (up - down) / (2 * h);
      // The 1e-6 floor keeps dead-ReLU entries (analytic 0, numeric ~1e-11) from
      // dominating.
      const double diff = std::abs(numeric - (*analytic[b])[i]);
      worst = std::max(worst, diff / std::max({std::abs(numeric), std::abs((*analytic[b])[i]), 1e-6}));
    }
  }
  return worst;
}

void criterion_6(const ExperimentConfig& cfg) {
  const double grad = worst_gradient_error();

  const auto arch = cfg.architecture();
  int worst_steps = 0;
  bool overfit = true;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto m = nn::CnnModel::build(arch, seed);
    Rng rng(seed + 40);
    nn::Tensor t({1, arch.rows, arch.cols});
    for (double& x : t.data) x = rng.uniform();
    const std::vector<nn::TrainSample> one{{t, seed % 2 ? nn::choose_label() : nn::reject_label(), 0}};
    int steps = 0;
    while (m.loss(one) >= 0.01 && steps < 500) m.train_step(one, 0.01), ++steps;
    overfit = overfit && m.loss(one) < 0.01;
    worst_steps = std::max(worst_steps, steps);
  }

  double norm_err = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = nn::CnnModel::build(arch, seed);
    Rng rng(seed);
    nn::Tensor t({1, arch.rows, arch.cols});
    for (double& x : t.data) x = rng.uniform();
    const auto p = m.forward(t);
    norm_err = std::max(norm_err, std::abs(p[0] + p[1] - 1.0));
  }

  auto m = nn::CnnModel::build(arch, 77);
  const auto path = fs::temp_directory_path() / "sagin_acceptance_ckpt.bin";
  m.save(path);
  const bool roundtrip = nn::CnnModel::load(path) == m;
  fs::remove(path);

  const bool ok = grad < 1e-4 && overfit && norm_err <= 1e-9 && roundtrip;
  report(6, ok, "neural correctness",
         fmt::format("gradient rel. error {:.2e} (<1e-4), overfit in {} steps (<=500), softmax sum error "
                     "{:.1e} (<=1e-9), checkpoint round trip {}",
                     grad, worst_steps, norm_err, roundtrip ? "bit-exact" : "differs"));
}

void criterion_7(const ExperimentConfig& smoke, const std::vector<nn::CnnModel>& models,
                 const SweepResult& grid) {
  auto cfg = smoke;
  cfg.sweep.n_min = 400;
  cfg.sweep.n_max = 1600;
  cfg.sweep.n_step = 1200;
  const auto a = checked_sweep(cfg, models);
  const auto b = checked_sweep(cfg, models);
  const bool same = !a.rows.empty() && emit_csv(a) == emit_csv(b);
  bool matches_grid = !a.rows.empty();
  for (const auto& row : a.rows) {
    const auto* g = find_row(grid, row.policy, row.n_sources);
    matches_grid = matches_grid && g && *g == row;
  }
  const int violations = conservation_violations.load();
  report(7, same && matches_grid && violations == 0, "determinism and conservation",
         fmt::format("repeated sweep CSV identical: {}, rows equal to the full grid's: {}, conservation "
                     "violations across all runs: {}",
                     same ? "yes" : "no", matches_grid ? "yes" : "no", violations));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  try {
    const auto smoke = load_config(fs::path(SAGIN_SOURCE_DIR) / "configs" / "smoke.yaml");
    const Topology topo = build_reference_topology(smoke.topology);
    fmt::print("acceptance: {} hardware threads, smoke grid {}..{} step {}, {} s per point\n",
               std::thread::hardware_concurrency(), smoke.sweep.n_min, smoke.sweep.n_max, smoke.sweep.n_step,
               smoke.simulation.duration_s);

    auto models = initial_models(smoke);
    const auto pre = pretrain_models(smoke, models);
    fmt::print("pretrained {} models on {} samples in {:.0f} s\n", models.size(), pre.samples, seconds_since(t0));

    const auto grid = checked_sweep(smoke, models);
    fmt::print("smoke grid: {} rows at {:.0f} s\n", grid.rows.size(), seconds_since(t0));
    const auto csv_dir = fs::temp_directory_path() / "sagin_acceptance";
    fs::create_directories(csv_dir);
    if (!grid.rows.empty()) write_csv(grid, csv_dir / "smoke.csv");

    criterion_1(smoke, models);
    criterion_2(grid, cross_section_capacity(topo, {NodeKind::Meo, NodeKind::Geo}));
    criterion_3(smoke, pre, grid);
    criterion_4(smoke, topo);
    criterion_5(smoke, topo);
    criterion_6(smoke);
    criterion_7(smoke, models, grid);
  } catch (const std::exception& e) {
    fmt::print("acceptance aborted: {}\n", e.what());
    return 2;
  }
  const double elapsed = seconds_since(t0);
  report(8, elapsed < kBudgetSeconds, "time budget",
         fmt::format("whole suite {:.0f} s on {} hardware threads (< {:.0f} s)", elapsed,
                     std::thread::hardware_concurrency(), kBudgetSeconds));
  fmt::print("{} of 8 criteria failed\n", failures);
  return failures ? 1 : 0;
}
