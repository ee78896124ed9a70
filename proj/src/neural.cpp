#include "sagin/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "sagin/random.hpp"

namespace sagin::nn {

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian doubles");

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : shape(std::move(dims)) {
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  data.assign(n, fill);
}

std::vector<double> choose_label() { return {1.0, 0.0}; }
std::vector<double> reject_label() { return {0.0, 1.0}; }

namespace {

// Valid output range [lo, hi) for a kernel offset d with input extent n.
struct Span1 {
  std::ptrdiff_t lo;
  std::ptrdiff_t hi;
};

Span1 valid_range(std::ptrdiff_t d, std::ptrdiff_t n) {
  return {std::max<std::ptrdiff_t>(0, -d), std::min<std::ptrdiff_t>(n, n - d)};
}

void conv_forward(const ConvLayer& layer, std::size_t h, std::size_t w, const double* in,
                  double* out) {
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const auto k = static_cast<std::ptrdiff_t>(layer.kernel);
  const std::ptrdiff_t pad = (k - 1) / 2;
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    double* dst = out + o * h * w;
    std::fill(dst, dst + h * w, layer.bias[o]);
    for (std::size_t i = 0; i < layer.in_channels; ++i) {
      const double* src = in + i * h * w;
      for (std::ptrdiff_t ky = 0; ky < k; ++ky) {
        const auto ry = valid_range(ky - pad, H);
        for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
          const auto rx = valid_range(kx - pad, W);
          const double wt = layer.weight[((o * layer.in_channels + i) * layer.kernel +
                                          static_cast<std::size_t>(ky)) * layer.kernel +
                                         static_cast<std::size_t>(kx)];
          for (std::ptrdiff_t y = ry.lo; y < ry.hi; ++y) {
            const double* s = src + (y + ky - pad) * W + (kx - pad);
            double* d = dst + y * W;
            for (std::ptrdiff_t x = rx.lo; x < rx.hi; ++x) d[x] += wt * s[x];
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients and, when d_in is non-null, input gradients.
void conv_backward(const ConvLayer& layer, std::size_t h, std::size_t w, const double* in,
                   const double* d_out, ConvLayer& grad, double* d_in) {
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const auto k = static_cast<std::ptrdiff_t>(layer.kernel);
  const std::ptrdiff_t pad = (k - 1) / 2;
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    const double* g = d_out + o * h * w;
    grad.bias[o] += std::accumulate(g, g + h * w, 0.0);
    for (std::size_t i = 0; i < layer.in_channels; ++i) {
      const double* src = in + i * h * w;
      double* dsrc = d_in ? d_in + i * h * w : nullptr;
      for (std::ptrdiff_t ky = 0; ky < k; ++ky) {
        const auto ry = valid_range(ky - pad, H);
        for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
          const auto rx = valid_range(kx - pad, W);
          const std::size_t widx = ((o * layer.in_channels + i) * layer.kernel +
                                    static_cast<std::size_t>(ky)) * layer.kernel +
                                   static_cast<std::size_t>(kx);
          const double wt = layer.weight[widx];
          double acc = 0.0;
          for (std::ptrdiff_t y = ry.lo; y < ry.hi; ++y) {
            const std::ptrdiff_t off = (y + ky - pad) * W + (kx - pad);
            const double* s = src + off;
            const double* gy = g + y * W;
            for (std::ptrdiff_t x = rx.lo; x < rx.hi; ++x) acc += gy[x] * s[x];
            if (dsrc) {
              double* ds = dsrc + off;
              for (std::ptrdiff_t x = rx.lo; x < rx.hi; ++x) ds[x] += wt * gy[x];
            }
          }
          grad.weight[widx] += acc;
        }
      }
    }
  }
}

void dense_forward(const DenseLayer& layer, const double* in, double* out) {
  for (std::size_t o = 0; o < layer.outputs; ++o) {
    const double* row = layer.weight.data() + o * layer.inputs;
    double s = layer.bias[o];
    for (std::size_t i = 0; i < layer.inputs; ++i) s += row[i] * in[i];
    out[o] = s;
  }
}

void dense_backward(const DenseLayer& layer, const double* in, const double* d_out,
                    DenseLayer& grad, double* d_in) {
  if (d_in) std::fill(d_in, d_in + layer.inputs, 0.0);
  for (std::size_t o = 0; o < layer.outputs; ++o) {
    const double g = d_out[o];
    grad.bias[o] += g;
    const double* row = layer.weight.data() + o * layer.inputs;
    double* grow = grad.weight.data() + o * layer.inputs;
    for (std::size_t i = 0; i < layer.inputs; ++i) grow[i] += g * in[i];
    if (d_in) {
      for (std::size_t i = 0; i < layer.inputs; ++i) d_in[i] += g * row[i];
    }
  }
}

void relu_inplace(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// Activations of one forward pass. conv_out[l] and dense_out[l] hold
// post-activation values, except the last dense entry which holds logits.
struct Trace {
  std::vector<std::vector<double>> conv_out;
  std::vector<std::vector<double>> dense_out;
};

std::vector<double> softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
  for (double& x : p) x /= z;
  return p;
}

double log_sum_exp(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  return m + std::log(z);
}

Trace run_forward(const std::vector<ConvLayer>& conv, const std::vector<DenseLayer>& dense,
                  const Architecture& arch, const Tensor& input) {
  Trace t;
  const std::size_t hw = arch.rows * arch.cols;
  const double* cur = input.data.data();
  for (const auto& layer : conv) {
    std::vector<double> out(layer.out_channels * hw);
    conv_forward(layer, arch.rows, arch.cols, cur, out.data());
    relu_inplace(out);
    t.conv_out.push_back(std::move(out));
    cur = t.conv_out.back().data();
  }
  for (std::size_t l = 0; l < dense.size(); ++l) {
    std::vector<double> out(dense[l].outputs);
    dense_forward(dense[l], cur, out.data());
    if (l + 1 < dense.size()) relu_inplace(out);
    t.dense_out.push_back(std::move(out));
    cur = t.dense_out.back().data();
  }
  return t;
}

template <class Layer>
Layer zeros_like(const Layer& layer) {
  Layer z = layer;
  std::fill(z.weight.begin(), z.weight.end(), 0.0);
  std::fill(z.bias.begin(), z.bias.end(), 0.0);
  return z;
}

}  // namespace

CnnModel CnnModel::build(const Architecture& arch, std::uint64_t seed) {
  if (arch.rows == 0 || arch.cols == 0 || arch.kernel == 0 || arch.outputs < 2 ||
      arch.conv_channels.empty()) {
    throw ShapeError("architecture needs positive dims, a kernel, >= 1 conv layer, >= 2 outputs");
  }
  CnnModel m;
  m.arch_ = arch;
  m.seed_ = seed;
  Rng rng(mix_seed(seed, 0xc0ffee));
  auto init = [&](std::vector<double>& w, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : w) x = rng.uniform(-bound, bound);
  };
  std::size_t channels = 1;
  for (std::size_t width : arch.conv_channels) {
    ConvLayer layer{channels, width, arch.kernel, {}, {}};
    layer.weight.resize(width * channels * arch.kernel * arch.kernel);
    layer.bias.assign(width, 0.0);
    init(layer.weight, channels * arch.kernel * arch.kernel);
    m.conv_.push_back(std::move(layer));
    channels = width;
  }
  std::size_t inputs = channels * arch.rows * arch.cols;
  auto widths = arch.hidden;
  widths.push_back(arch.outputs);
  for (std::size_t width : widths) {
    DenseLayer layer{inputs, width, {}, {}};
    layer.weight.resize(width * inputs);
    layer.bias.assign(width, 0.0);
    init(layer.weight, inputs);
    m.dense_.push_back(std::move(layer));
    inputs = width;
  }
  return m;
}

void CnnModel::check_input(const Tensor& input) const {
  const bool ok = input.shape.size() == 3 && input.shape[0] == 1 && input.shape[1] == arch_.rows &&
                  input.shape[2] == arch_.cols && input.data.size() == arch_.rows * arch_.cols;
  if (!ok) {
    throw ShapeError(fmt::format("model expects input {{1, {}, {}}}, got {} values",
                                 arch_.rows, arch_.cols, input.data.size()));
  }
}

std::vector<double> CnnModel::forward(const Tensor& input) const {
  check_input(input);
  return softmax(run_forward(conv_, dense_, arch_, input).dense_out.back());
}

double CnnModel::loss(std::span<const TrainSample> batch) const {
  if (batch.empty()) throw TrainingError("empty batch");
  double total = 0.0;
  for (const auto& s : batch) {
    check_input(s.input);
    const Trace t = run_forward(conv_, dense_, arch_, s.input);
    const auto& logits = t.dense_out.back();
    const double lse = log_sum_exp(logits);
    for (std::size_t c = 0; c < logits.size(); ++c) total -= s.label[c] * (logits[c] - lse);
  }
  return total / static_cast<double>(batch.size());
}

double CnnModel::loss_and_gradients(std::span<const TrainSample> batch, Gradients& grads) const {
  if (batch.empty()) throw TrainingError("empty batch");
  grads.conv.clear();
  grads.dense.clear();
  for (const auto& l : conv_) grads.conv.push_back(zeros_like(l));
  for (const auto& l : dense_) grads.dense.push_back(zeros_like(l));

  const double scale = 1.0 / static_cast<double>(batch.size());
  const std::size_t hw = arch_.rows * arch_.cols;
  double total = 0.0;
  for (const auto& s : batch) {
    check_input(s.input);
    if (s.label.size() != arch_.outputs) {
      throw ShapeError(fmt::format("label has {} entries, model has {} outputs", s.label.size(),
                                   arch_.outputs));
    }
    const Trace t = run_forward(conv_, dense_, arch_, s.input);
    const auto& logits = t.dense_out.back();
    const double lse = log_sum_exp(logits);
    std::vector<double> delta(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) {
      total -= s.label[c] * (logits[c] - lse);
      delta[c] = (std::exp(logits[c] - lse) - s.label[c]) * scale;
    }

    for (std::size_t l = dense_.size(); l-- > 0;) {
      const double* in = l > 0 ? t.dense_out[l - 1].data() : t.conv_out.back().data();
      std::vector<double> d_in(dense_[l].inputs);
      dense_backward(dense_[l], in, delta.data(), grads.dense[l], d_in.data());
      // Rectifier mask of the layer feeding this one.
      const auto& feeding = l > 0 ? t.dense_out[l - 1] : t.conv_out.back();
      for (std::size_t i = 0; i < d_in.size(); ++i) {
        if (feeding[i] <= 0.0) d_in[i] = 0.0;
      }
      delta = std::move(d_in);
    }
    for (std::size_t l = conv_.size(); l-- > 0;) {
      const double* in = l > 0 ? t.conv_out[l - 1].data() : s.input.data.data();
      std::vector<double> d_in(l > 0 ? conv_[l].in_channels * hw : 0, 0.0);
      conv_backward(conv_[l], arch_.rows, arch_.cols, in, delta.data(), grads.conv[l],
                    l > 0 ? d_in.data() : nullptr);
      if (l == 0) break;
      const auto& feeding = t.conv_out[l - 1];
      for (std::size_t i = 0; i < d_in.size(); ++i) {
        if (feeding[i] <= 0.0) d_in[i] = 0.0;
      }
      delta = std::move(d_in);
    }
  }
  return total * scale;
}

double CnnModel::train_step(std::span<const TrainSample> batch, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw TrainingError("learning rate must be finite and >= 0");
  Gradients g;
  const double loss = loss_and_gradients(batch, g);
  if (!std::isfinite(loss)) {
    throw TrainingError(fmt::format("non-finite loss {} on batch of {}", loss, batch.size()));
  }
  auto check = [](const std::vector<double>& v, std::string_view what, std::size_t layer) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) {
        throw TrainingError(fmt::format("non-finite gradient in {} layer {} at {}", what, layer, i));
      }
    }
  };
  for (std::size_t l = 0; l < g.conv.size(); ++l) {
    check(g.conv[l].weight, "conv weight", l);
    check(g.conv[l].bias, "conv bias", l);
  }
  for (std::size_t l = 0; l < g.dense.size(); ++l) {
    check(g.dense[l].weight, "dense weight", l);
    check(g.dense[l].bias, "dense bias", l);
  }
  if (lr == 0.0) return loss;
  auto step = [lr](std::vector<double>& p, const std::vector<double>& d) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * d[i];
  };
  for (std::size_t l = 0; l < conv_.size(); ++l) {
    step(conv_[l].weight, g.conv[l].weight);
    step(conv_[l].bias, g.conv[l].bias);
  }
  for (std::size_t l = 0; l < dense_.size(); ++l) {
    step(dense_[l].weight, g.dense[l].weight);
    step(dense_[l].bias, g.dense[l].bias);
  }
  return loss;
}

std::vector<std::span<double>> CnnModel::parameters() {
  std::vector<std::span<double>> out;
  for (auto& l : conv_) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  for (auto& l : dense_) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::span<const double>> CnnModel::parameters() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : conv_) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  for (const auto& l : dense_) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  return out;
}

bool CnnModel::operator==(const CnnModel& other) const {
  if (!(arch_ == other.arch_) || seed_ != other.seed_) return false;
  const auto a = parameters();
  const auto b = other.parameters();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size() ||
        std::memcmp(a[i].data(), b[i].data(), a[i].size_bytes()) != 0) {
      return false;
    }
  }
  return true;
}

// Checkpoint layout (little-endian):
//   "SAGINCNN" u32 version
//   u64 rows, cols, kernel, outputs, n_conv, conv widths..., n_hidden, hidden widths...
//   u64 seed
//   per parameter block: u64 count, count doubles
namespace {

constexpr char kMagic[8] = {'S', 'A', 'G', 'I', 'N', 'C', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CheckpointError("truncated checkpoint");
  return value;
}

}  // namespace

void CnnModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(fmt::format("cannot open {} for writing", path.string()));
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, arch_.rows);
  put<std::uint64_t>(out, arch_.cols);
  put<std::uint64_t>(out, arch_.kernel);
  put<std::uint64_t>(out, arch_.outputs);
  put<std::uint64_t>(out, arch_.conv_channels.size());
  for (auto c : arch_.conv_channels) put<std::uint64_t>(out, c);
  put<std::uint64_t>(out, arch_.hidden.size());
  for (auto h : arch_.hidden) put<std::uint64_t>(out, h);
  put<std::uint64_t>(out, seed_);
  for (const auto& block : parameters()) {
    put<std::uint64_t>(out, block.size());
    out.write(reinterpret_cast<const char*>(block.data()),
              static_cast<std::streamsize>(block.size_bytes()));
  }
  if (!out) throw CheckpointError(fmt::format("write to {} failed", path.string()));
}

CnnModel CnnModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open {}", path.string()));
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(fmt::format("{} is not a model checkpoint", path.string()));
  }
  if (const auto v = get<std::uint32_t>(in); v != kVersion) {
    throw CheckpointError(fmt::format("unsupported checkpoint version {}", v));
  }
  Architecture arch;
  arch.rows = get<std::uint64_t>(in);
  arch.cols = get<std::uint64_t>(in);
  arch.kernel = get<std::uint64_t>(in);
  arch.outputs = get<std::uint64_t>(in);
  const auto n_conv = get<std::uint64_t>(in);
  if (n_conv > 64) throw CheckpointError("implausible conv layer count");
  arch.conv_channels.resize(n_conv);
  for (auto& c : arch.conv_channels) c = get<std::uint64_t>(in);
  const auto n_hidden = get<std::uint64_t>(in);
  if (n_hidden > 64) throw CheckpointError("implausible hidden layer count");
  arch.hidden.resize(n_hidden);
  for (auto& h : arch.hidden) h = get<std::uint64_t>(in);
  const auto seed = get<std::uint64_t>(in);

  CnnModel m = build(arch, seed);
  for (auto block : m.parameters()) {
    if (get<std::uint64_t>(in) != block.size()) throw CheckpointError("parameter block size mismatch");
    in.read(reinterpret_cast<char*>(block.data()), static_cast<std::streamsize>(block.size_bytes()));
    if (!in) throw CheckpointError("truncated checkpoint");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes in checkpoint");
  return m;
}

}  // namespace sagin::nn
