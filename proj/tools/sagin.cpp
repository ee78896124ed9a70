#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "sagin/config.hpp"
#include "sagin/experiment.hpp"
#include "sagin/report.hpp"

namespace fs = std::filesystem;
using namespace sagin;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

ExperimentConfig load(const std::string& path) {
  auto cfg = load_config(path);
  apply_env_overrides(cfg);
  validate(cfg);
  return cfg;
}

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

void cmd_topo_dump(const std::string& cfg_path, const std::string& out_path) {
  const auto cfg = load(cfg_path);
  const auto topo = build_reference_topology(cfg.topology);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", out_path));
  out << topo.dump();
  fmt::print("{} nodes, {} links -> {}\n", topo.node_count(), topo.links().size(), out_path);
}

void cmd_pretrain(const std::string& cfg_path, const std::string& dir) {
  const auto cfg = load(cfg_path);
  auto models = initial_models(cfg);
  const auto report = pretrain_models(cfg, models);
  save_models(dir, models);
  for (std::size_t c = 0; c < models.size(); ++c) {
    fmt::print("combo {:2}  +{:<4} -{:<4} loss {:.4f}\n", c, report.positives[c], report.negatives[c],
               report.final_loss[c]);
  }
  fmt::print("{} samples, {} models -> {}\n", report.samples, models.size(), dir);
}

void cmd_run(const std::string& cfg_path, std::string policy, const std::string& ckpt,
             const std::string& trace, std::optional<std::uint32_t> n) {
  auto cfg = load(cfg_path);
  if (policy.empty()) policy = cfg.routing.policy;
  const auto topo = build_reference_topology(cfg.topology);
  std::optional<std::vector<nn::CnnModel>> models;
  if (policy == "dnn") models = obtain_models(cfg, opt_path(ckpt));
  std::ofstream trace_out;
  SimHooks hooks;
  if (!trace.empty()) {
    trace_out.open(trace);
    if (!trace_out) throw std::runtime_error(fmt::format("cannot write {}", trace));
    hooks.drop_trace = &trace_out;
  }
  const auto out = run_single(cfg, topo, policy, n.value_or(cfg.traffic.n_sources), 0,
                              models ? &*models : nullptr, hooks);
  const auto& m = out.metrics;
  fmt::print("policy          {}\n", policy);
  fmt::print("n_sources       {}\n", n.value_or(cfg.traffic.n_sources));
  fmt::print("throughput_bps  {:.0f}\n", m.throughput_bps);
  fmt::print("loss_rate       {:.6f}\n", m.loss_rate);
  fmt::print("mean_delay_s    {:.6f}\n", m.mean_delay_s);
  fmt::print("generated_bits  {:.0f}\n", m.generated_bits);
  fmt::print("delivered_bits  {:.0f}\n", m.delivered_bits);
  fmt::print("dropped_bits    {:.0f}\n", m.dropped_bits);
  if (!out.selections.empty()) {
    std::string s;
    for (auto c : out.selections) s += fmt::format(" {}", c);
    fmt::print("selections     {}\n", s);
  }
}

void cmd_sweep(const std::string& cfg_path, const std::string& out_csv, const std::string& plot_dir,
               const std::string& ckpt) {
  const auto cfg = load(cfg_path);
  std::optional<std::vector<nn::CnnModel>> models;
  const auto& pol = cfg.sweep.policies;
  if (std::find(pol.begin(), pol.end(), "dnn") != pol.end()) {
    models = obtain_models(cfg, opt_path(ckpt));
  }
  const auto result = run_sweep(cfg, models ? &*models : nullptr, [](const SweepRow& r) {
    fmt::print(stderr, "{:>4} n={:<5} seed={:<3} thr={:.4g} loss={:.6f}\n", r.policy, r.n_sources, r.seed,
               r.throughput_bps, r.loss_rate);
  });
  fs::path csv = out_csv;
  if (csv.is_relative() && cfg.output_dir != ".") csv = fs::path(cfg.output_dir) / csv;
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  write_csv(result, csv);
  fmt::print("{} rows -> {}\n", result.rows.size(), csv.string());
  if (!plot_dir.empty()) {
    fs::create_directories(plot_dir);
    for (auto m : {PlotMetric::Throughput, PlotMetric::LossRate}) {
      const auto path = fs::path(plot_dir) / (to_string(m) + ".svg");
      write_plot(result, m, path);
      fmt::print("plot -> {}\n", path.string());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAGIN routing simulator"};
  app.require_subcommand(1);

  std::string cfg_path, out_path, dir, policy, ckpt, trace, plot_dir;
  std::optional<std::uint32_t> n_sources;

  auto* topo = app.add_subcommand("topo", "topology tools");
  topo->require_subcommand(1);
  auto* dump = topo->add_subcommand("dump", "write the link list");
  dump->add_option("config", cfg_path, "config file")->required()->check(CLI::ExistingFile);
  dump->add_option("out", out_path, "output file")->required();

  auto* pretrain = app.add_subcommand("pretrain", "pretrain the per-combination models");
  pretrain->add_option("config", cfg_path, "config file")->required()->check(CLI::ExistingFile);
  pretrain->add_option("ckpt_dir", dir, "checkpoint directory")->required();

  auto* run = app.add_subcommand("run", "single simulation");
  run->add_option("config", cfg_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--policy", policy, "routing policy")->check(CLI::IsMember({"sp", "dnn"}));
  run->add_option("--ckpt", ckpt, "checkpoint directory");
  run->add_option("--trace", trace, "drop trace file");
  run->add_option("--n", n_sources, "number of source nodes (default: traffic.n_sources)");

  auto* sweep = app.add_subcommand("sweep", "source-count sweep");
  sweep->add_option("config", cfg_path, "config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_path, "results CSV")->required();
  sweep->add_option("--plot", plot_dir, "directory for SVG plots");
  sweep->add_option("--ckpt", ckpt, "checkpoint directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (dump->parsed()) cmd_topo_dump(cfg_path, out_path);
    else if (pretrain->parsed()) cmd_pretrain(cfg_path, dir);
    else if (run->parsed()) cmd_run(cfg_path, policy, ckpt, trace, n_sources);
    else if (sweep->parsed()) cmd_sweep(cfg_path, out_path, plot_dir, ckpt);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kRuntime;
  }
  return kOk;
}
