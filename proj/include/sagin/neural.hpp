#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sagin::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;  // row-major

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

struct Architecture {
  std::size_t rows = 8;
  std::size_t cols = 17;
  std::vector<std::size_t> conv_channels{8, 16, 16};
  std::size_t kernel = 3;
  std::vector<std::size_t> hidden{64, 32};
  std::size_t outputs = 2;

  bool operator==(const Architecture&) const = default;
};

// Same-padded convolution; weight layout [out][in][ky][kx].
struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::vector<double> weight;
  std::vector<double> bias;
};

// Weight layout [out][in].
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weight;
  std::vector<double> bias;
};

struct TrainSample {
  Tensor input;                 // {1, rows, cols}
  std::vector<double> label;    // one-hot
  std::uint32_t combo_id = 0;
};

// Rectified conv stack, flatten, rectified dense stack, softmax output.
class CnnModel {
 public:
  struct Gradients {
    std::vector<ConvLayer> conv;
    std::vector<DenseLayer> dense;
  };

  CnnModel() = default;
  // Weights uniform in +-1/sqrt(fan_in), biases zero.
  static CnnModel build(const Architecture& arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  std::vector<ConvLayer>& conv_layers() { return conv_; }
  const std::vector<ConvLayer>& conv_layers() const { return conv_; }
  std::vector<DenseLayer>& dense_layers() { return dense_; }
  const std::vector<DenseLayer>& dense_layers() const { return dense_; }

  // Softmax probabilities; no side effects.
  std::vector<double> forward(const Tensor& input) const;

  // Mean cross-entropy over the batch and its parameter gradients.
  double loss_and_gradients(std::span<const TrainSample> batch, Gradients& grads) const;
  double loss(std::span<const TrainSample> batch) const;

  // One plain gradient-descent step; returns the pre-update loss.
  double train_step(std::span<const TrainSample> batch, double lr);

  // Every parameter block, conv layers first (weight then bias), then dense.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;

  void save(const std::filesystem::path& path) const;
  static CnnModel load(const std::filesystem::path& path);

  bool operator==(const CnnModel& other) const;

 private:
  void check_input(const Tensor& input) const;

  Architecture arch_;
  std::uint64_t seed_ = 0;
  std::vector<ConvLayer> conv_;
  std::vector<DenseLayer> dense_;
};

std::vector<double> choose_label();  // (1, 0)
std::vector<double> reject_label();  // (0, 1)

}  // namespace sagin::nn
