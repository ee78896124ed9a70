#include "sagin/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <yaml-cpp/yaml.h>

namespace sagin {

SimConfig ExperimentConfig::sim_config(std::uint64_t seed) const {
  return SimConfig{simulation.duration_s, simulation.warmup_s, simulation.packet_bits,
                   routing.interval_s, seed};
}

nn::Architecture ExperimentConfig::architecture() const {
  nn::Architecture arch;
  arch.rows = 8;
  arch.cols = routing.window + 1;
  arch.conv_channels = neural.conv_channels;
  arch.kernel = neural.kernel;
  arch.hidden = neural.hidden;
  arch.outputs = 2;
  return arch;
}

std::vector<std::uint32_t> ExperimentConfig::sweep_points() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t n = sweep.n_min; n <= sweep.n_max; n += sweep.n_step) {
    out.push_back(n);
    if (sweep.n_step == 0) break;
  }
  return out;
}

namespace {

// One mapping of the document; records which keys were read so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      throw ConfigError(fmt::format("'{}' must be a mapping", path_.empty() ? "<root>" : path_));
    }
  }

  template <class T>
  void get(const std::string& key, T& dst) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node value = node_[key];
    if (!value) return;
    try {
      dst = value.as<T>();
    } catch (const YAML::Exception& e) {
      throw ConfigError(fmt::format("bad value for '{}': {}", qualified(key), e.what()));
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return Section(YAML::Node(), qualified(key));
    return Section(node_[key], qualified(key));
  }

  void finish() const {
    if (!node_ || node_.IsNull()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError(fmt::format("unknown key '{}'", qualified(key)));
    }
  }

 private:
  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("config is not valid YAML: {}", e.what()));
  }
  ExperimentConfig cfg;
  Section doc(root, "");

  {
    Section s = doc.child("topology");
    auto& t = cfg.topology;
    s.get("geo", t.geo);
    s.get("meo", t.meo);
    s.get("leo", t.leo);
    s.get("uav", t.uav);
    s.get("ground", t.ground);
    s.get("buffer_pkts", t.links.buffer_pkts);
    s.get("access_buffer_pkts", t.links.access_buffer_pkts);
    Section cap = s.child("capacity_bps");
    cap.get("isl", t.links.isl_bps);
    cap.get("leo_meo", t.links.leo_meo_bps);
    cap.get("uav_leo", t.links.uav_leo_bps);
    cap.get("ground_uav", t.links.ground_uav_bps);
    cap.finish();
    Section delay = s.child("delay_s");
    delay.get("ground_uav", t.links.ground_uav_s);
    delay.get("uav_leo", t.links.uav_leo_s);
    delay.get("leo_meo", t.links.leo_meo_s);
    delay.get("meo_meo", t.links.meo_meo_s);
    delay.get("meo_cross", t.links.meo_cross_s);
    delay.get("meo_geo", t.links.meo_geo_s);
    delay.get("geo_geo", t.links.geo_geo_s);
    delay.finish();
    s.finish();
  }
  {
    Section s = doc.child("traffic");
    s.get("n_sources", cfg.traffic.n_sources);
    s.get("rate_bps", cfg.traffic.rate_bps);
    s.get("seed", cfg.traffic.seed);
    Section burst = s.child("burst");
    burst.get("enabled", cfg.traffic.burst.enabled);
    burst.get("period_s", cfg.traffic.burst.period_s);
    burst.get("duty", cfg.traffic.burst.duty);
    burst.finish();
    s.finish();
  }
  {
    Section s = doc.child("simulation");
    s.get("duration_s", cfg.simulation.duration_s);
    s.get("warmup_s", cfg.simulation.warmup_s);
    s.get("packet_bits", cfg.simulation.packet_bits);
    s.get("seed", cfg.simulation.seed);
    s.finish();
  }
  {
    Section s = doc.child("routing");
    auto& r = cfg.routing;
    s.get("policy", r.policy);
    s.get("T", r.window);
    s.get("interval_s", r.interval_s);
    s.get("epsilon", r.epsilon);
    s.get("online_training", r.online_training);
    s.get("learning_rate", r.learning_rate);
    s.get("replay_capacity", r.replay_capacity);
    s.get("batch", r.batch);
    Section th = s.child("thresholds");
    th.get("loss", r.thresholds.loss);
    th.get("buffer", r.thresholds.buffer);
    th.finish();
    s.finish();
  }
  {
    Section s = doc.child("neural");
    s.get("conv_channels", cfg.neural.conv_channels);
    s.get("kernel", cfg.neural.kernel);
    s.get("hidden", cfg.neural.hidden);
    s.get("init_seed", cfg.neural.init_seed);
    s.finish();
  }
  {
    Section s = doc.child("pretrain");
    auto& p = cfg.pretrain;
    s.get("enabled", p.enabled);
    s.get("samples", p.samples);
    s.get("epochs", p.epochs);
    s.get("batch", p.batch);
    s.get("learning_rate", p.learning_rate);
    s.get("margin", p.margin);
    s.get("seed", p.seed);
    s.finish();
  }
  {
    Section s = doc.child("sweep");
    auto& w = cfg.sweep;
    s.get("n_min", w.n_min);
    s.get("n_max", w.n_max);
    s.get("n_step", w.n_step);
    s.get("repetitions", w.repetitions);
    s.get("policies", w.policies);
    s.get("threads", w.threads);
    s.finish();
  }
  {
    Section s = doc.child("output");
    s.get("dir", cfg.output_dir);
    s.finish();
  }
  doc.finish();
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
  const auto& t = cfg.topology;
  const auto& l = t.links;
  const auto& r = cfg.routing;
  const auto& p = cfg.pretrain;
  const auto& w = cfg.sweep;
  std::string out;
  auto line = [&out](std::string s) { out += std::move(s) + "\n"; };
  line("topology:");
  line(fmt::format("  geo: {}", t.geo));
  line(fmt::format("  meo: {}", t.meo));
  line(fmt::format("  leo: {}", t.leo));
  line(fmt::format("  uav: {}", t.uav));
  line(fmt::format("  ground: {}", t.ground));
  line("  capacity_bps:");
  line(fmt::format("    isl: {}", l.isl_bps));
  line(fmt::format("    leo_meo: {}", l.leo_meo_bps));
  line(fmt::format("    uav_leo: {}", l.uav_leo_bps));
  line(fmt::format("    ground_uav: {}", l.ground_uav_bps));
  line("  delay_s:");
  line(fmt::format("    ground_uav: {}", l.ground_uav_s));
  line(fmt::format("    uav_leo: {}", l.uav_leo_s));
  line(fmt::format("    leo_meo: {}", l.leo_meo_s));
  line(fmt::format("    meo_meo: {}", l.meo_meo_s));
  line(fmt::format("    meo_cross: {}", l.meo_cross_s));
  line(fmt::format("    meo_geo: {}", l.meo_geo_s));
  line(fmt::format("    geo_geo: {}", l.geo_geo_s));
  line(fmt::format("  buffer_pkts: {}", l.buffer_pkts));
  line(fmt::format("  access_buffer_pkts: {}", l.access_buffer_pkts));
  line("traffic:");
  line(fmt::format("  n_sources: {}", cfg.traffic.n_sources));
  line(fmt::format("  rate_bps: {}", cfg.traffic.rate_bps));
  line(fmt::format("  seed: {}", cfg.traffic.seed));
  line("  burst:");
  line(fmt::format("    enabled: {}", bool_str(cfg.traffic.burst.enabled)));
  line(fmt::format("    period_s: {}", cfg.traffic.burst.period_s));
  line(fmt::format("    duty: {}", cfg.traffic.burst.duty));
  line("simulation:");
  line(fmt::format("  duration_s: {}", cfg.simulation.duration_s));
  line(fmt::format("  warmup_s: {}", cfg.simulation.warmup_s));
  line(fmt::format("  packet_bits: {}", cfg.simulation.packet_bits));
  line(fmt::format("  seed: {}", cfg.simulation.seed));
  line("routing:");
  line(fmt::format("  policy: {}", quoted(r.policy)));
  line(fmt::format("  T: {}", r.window));
  line(fmt::format("  interval_s: {}", r.interval_s));
  line(fmt::format("  epsilon: {}", r.epsilon));
  line(fmt::format("  online_training: {}", bool_str(r.online_training)));
  line(fmt::format("  learning_rate: {}", r.learning_rate));
  line(fmt::format("  replay_capacity: {}", r.replay_capacity));
  line(fmt::format("  batch: {}", r.batch));
  line("  thresholds:");
  line(fmt::format("    loss: {}", r.thresholds.loss));
  line(fmt::format("    buffer: {}", r.thresholds.buffer));
  line("neural:");
  line(fmt::format("  conv_channels: [{}]", fmt::join(cfg.neural.conv_channels, ", ")));
  line(fmt::format("  kernel: {}", cfg.neural.kernel));
  line(fmt::format("  hidden: [{}]", fmt::join(cfg.neural.hidden, ", ")));
  line(fmt::format("  init_seed: {}", cfg.neural.init_seed));
  line("pretrain:");
  line(fmt::format("  enabled: {}", bool_str(p.enabled)));
  line(fmt::format("  samples: {}", p.samples));
  line(fmt::format("  epochs: {}", p.epochs));
  line(fmt::format("  batch: {}", p.batch));
  line(fmt::format("  learning_rate: {}", p.learning_rate));
  line(fmt::format("  margin: {}", p.margin));
  line(fmt::format("  seed: {}", p.seed));
  line("sweep:");
  line(fmt::format("  n_min: {}", w.n_min));
  line(fmt::format("  n_max: {}", w.n_max));
  line(fmt::format("  n_step: {}", w.n_step));
  line(fmt::format("  repetitions: {}", w.repetitions));
  std::vector<std::string> policies;
  for (const auto& pol : w.policies) policies.push_back(quoted(pol));
  line(fmt::format("  policies: [{}]", fmt::join(policies, ", ")));
  line(fmt::format("  threads: {}", w.threads));
  line("output:");
  line(fmt::format("  dir: {}", quoted(cfg.output_dir)));
  return out;
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* seed = std::getenv("SAGIN_SEED"); seed && *seed) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(seed, &end, 10);
    if (end == seed || *end != '\0') throw ConfigError(fmt::format("SAGIN_SEED='{}' is not an integer", seed));
    cfg.simulation.seed = v;
    cfg.traffic.seed = v;
  }
  if (const char* dir = std::getenv("SAGIN_OUT_DIR"); dir && *dir) cfg.output_dir = dir;
}

void validate(const ExperimentConfig& cfg) {
  auto require = [](bool ok, std::string_view what) {
    if (!ok) throw ConfigError(std::string(what));
  };
  require(cfg.simulation.duration_s > 0, "simulation.duration_s must be positive");
  require(cfg.simulation.warmup_s >= 0 && cfg.simulation.warmup_s < cfg.simulation.duration_s,
          "simulation.warmup_s must lie in [0, duration_s)");
  require(cfg.simulation.packet_bits > 0, "simulation.packet_bits must be positive");
  require(cfg.traffic.rate_bps > 0, "traffic.rate_bps must be positive");
  require(!cfg.traffic.burst.enabled ||
              (cfg.traffic.burst.period_s > 0 && cfg.traffic.burst.duty > 0 && cfg.traffic.burst.duty <= 1),
          "traffic.burst needs period_s > 0 and duty in (0, 1]");
  require(cfg.routing.policy == "sp" || cfg.routing.policy == "dnn", "routing.policy must be sp or dnn");
  require(cfg.routing.window > 0, "routing.T must be positive");
  require(cfg.routing.interval_s > 0, "routing.interval_s must be positive");
  require(cfg.routing.epsilon >= 0 && cfg.routing.epsilon <= 1, "routing.epsilon must lie in [0, 1]");
  require(cfg.routing.learning_rate >= 0, "routing.learning_rate must be >= 0");
  require(cfg.routing.replay_capacity > 0 && cfg.routing.batch > 0,
          "routing.replay_capacity and routing.batch must be positive");
  require(!cfg.neural.conv_channels.empty() && cfg.neural.kernel > 0,
          "neural needs at least one conv layer and a positive kernel");
  require(cfg.pretrain.batch > 0 && cfg.pretrain.learning_rate >= 0 && cfg.pretrain.margin >= 0,
          "pretrain batch, learning_rate and margin must be valid");
  require(cfg.sweep.n_min <= cfg.sweep.n_max, "sweep.n_min must not exceed sweep.n_max");
  require(cfg.sweep.n_step > 0, "sweep.n_step must be positive");
  require(cfg.sweep.repetitions > 0, "sweep.repetitions must be positive");
  require(!cfg.sweep.policies.empty(), "sweep.policies must name at least one policy");
  for (const auto& p : cfg.sweep.policies) {
    require(p == "sp" || p == "dnn", "sweep.policies entries must be sp or dnn");
  }
}

}  // namespace sagin
