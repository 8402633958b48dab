#pragma once

// Feed-forward and 1-D convolutional networks with hand-written backprop.
// Layers are value types held in a variant so a Network copies like any other
// value; activations live in the Network and are reused across batches.

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "echoflag/learn/model_spec.hpp"
#include "echoflag/rng.hpp"

namespace echoflag::learn {

struct Shape {
  std::size_t channels = 1;
  std::size_t length = 1;
  std::size_t size() const noexcept { return channels * length; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// batch x channels x length, contiguous per sample.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t batch, Shape shape) { resize(batch, shape); }

  void resize(std::size_t batch, Shape shape) {
    batch_ = batch;
    shape_ = shape;
    data_.assign(batch * shape.size(), 0.0);
  }
  void zero() { std::fill(data_.begin(), data_.end(), 0.0); }

  std::size_t batch() const noexcept { return batch_; }
  Shape shape() const noexcept { return shape_; }
  std::span<double> sample(std::size_t n) noexcept { return {data_.data() + n * shape_.size(), shape_.size()}; }
  std::span<const double> sample(std::size_t n) const noexcept {
    return {data_.data() + n * shape_.size(), shape_.size()};
  }
  double* channel(std::size_t n, std::size_t c) noexcept {
    return data_.data() + n * shape_.size() + c * shape_.length;
  }
  const double* channel(std::size_t n, std::size_t c) const noexcept {
    return data_.data() + n * shape_.size() + c * shape_.length;
  }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

 private:
  std::size_t batch_ = 0;
  Shape shape_{};
  std::vector<double> data_;
};

struct ForwardMode {
  bool batch_statistics;  // batch norm normalizes with batch moments (and updates running moments if `update_running`)
  bool dropout;
  bool update_running;
};

inline constexpr ForwardMode kTrainMode{true, true, true};
inline constexpr ForwardMode kEvalMode{false, false, false};
inline constexpr ForwardMode kMcDropoutMode{false, true, false};
/// Gradient checking: batch statistics, no dropout, running moments frozen.
inline constexpr ForwardMode kCheckMode{true, false, false};

enum class ParamKind { ConvKernel, BatchNormScale, BatchNormShift, DenseWeight, DenseBias };

struct ParamView {
  ParamKind kind;
  std::span<double> value;
  std::span<double> grad;
};

std::string_view param_kind_name(ParamKind kind) noexcept;

// ---------------------------------------------------------------------------
// Layers

struct Dense {
  std::size_t in = 0, out = 0;
  std::vector<double> w, b;    // w[o * in + i]
  std::vector<double> gw, gb;

  Shape output_shape(Shape) const noexcept { return {out, 1}; }
  void forward(const Tensor& x, Tensor& y, ForwardMode, Rng*);
  void backward(const Tensor& x, const Tensor& y, const Tensor& gy, Tensor* gx);
};

/// Zero-padded "same" 1-D convolution without bias (a batch norm follows).
struct Conv1d {
  std::size_t in_channels = 0, out_channels = 0, kernel = 0;
  std::vector<double> w;  // w[(o * in_channels + i) * kernel + j]
  std::vector<double> gw;

  Shape output_shape(Shape s) const noexcept { return {out_channels, s.length}; }
  void forward(const Tensor& x, Tensor& y, ForwardMode, Rng*);
  void backward(const Tensor& x, const Tensor& y, const Tensor& gy, Tensor* gx);
};

/// Per-channel normalization over (batch, position).
struct BatchNorm {
  std::size_t channels = 0;
  double eps = 1e-5;
  double momentum = 0.9;
  std::vector<double> gamma, beta, g_gamma, g_beta;
  std::vector<double> running_mean, running_var;
  std::vector<double> xhat, inv_std;  // caches from the last forward
  bool used_batch_stats = false;

  Shape output_shape(Shape s) const noexcept { return s; }
  void forward(const Tensor& x, Tensor& y, ForwardMode, Rng*);
  void backward(const Tensor& x, const Tensor& y, const Tensor& gy, Tensor* gx);
};

struct Relu {
  Shape output_shape(Shape s) const noexcept { return s; }
  void forward(const Tensor& x, Tensor& y, ForwardMode, Rng*);
  void backward(const Tensor& x, const Tensor& y, const Tensor& gy, Tensor* gx);
};

struct Selu {
  static constexpr double kLambda = 1.0507009873554804934193349852946;
  static constexpr double kAlpha = 1.6732632423543772848170429916717;

  Shape output_shape(Shape s) const noexcept { return s; }
  void forward(const Tensor& x, Tensor& y, ForwardMode, Rng*);
  void backward(const Tensor& x, const Tensor& y, const Tensor& gy, Tensor* gx);
};

/// Width-2 max pooling; an odd trailing element is dropped.
struct MaxPool2 {
  std::vector<std::uint32_t> argmax;

  Shape output_shape(Shape s) const noexcept { return {s.channels, s.length / 2}; }
  void forward(const Tensor& x, Tensor& y, ForwardMode, Rng*);
  void backward(const Tensor& x, const Tensor& y, const Tensor& gy, Tensor* gx);
};

/// Dropout that keeps SELU activations at zero mean / unit variance: dropped
/// units are set to -lambda*alpha, then an affine correction is applied.
struct AlphaDropout {
  double rate = 0.0;
  std::vector<std::uint8_t> mask;
  double scale = 1.0;
  bool active = false;

  Shape output_shape(Shape s) const noexcept { return s; }
  void forward(const Tensor& x, Tensor& y, ForwardMode, Rng*);
  void backward(const Tensor& x, const Tensor& y, const Tensor& gy, Tensor* gx);
};

using Layer = std::variant<Dense, Conv1d, BatchNorm, Relu, Selu, MaxPool2, AlphaDropout>;

// ---------------------------------------------------------------------------

class Network {
 public:
  Network() = default;

  /// Builds the FFNN or CNN described by `spec` with seeded initialization.
  static Network build(const ModelSpec& spec, std::size_t input_length, std::uint64_t seed);

  std::size_t input_length() const noexcept { return input_shape_.size(); }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& layers() noexcept { return layers_; }

  /// Forward pass over `batch` rows of x (one ping per row); returns logits.
  std::span<const double> forward(std::span<const double> x, std::size_t batch, ForwardMode mode,
                                  Rng* rng = nullptr);

  /// Backprop of mean binary cross-entropy for the last forward. Gradients are
  /// accumulated into the parameter grads; returns the loss.
  double backward(std::span<const std::uint8_t> y);

  void zero_grad();
  std::vector<ParamView> params();

  /// Every persistent tensor (parameters, then batch-norm running moments).
  std::vector<std::span<double>> state();
  std::vector<std::span<const double>> state() const;

  /// Deterministic part of the network (all layers before the dropout) in
  /// inference mode; output feeds `forward_head`.
  const Tensor& forward_trunk(std::span<const double> x, std::size_t batch);
  std::span<const double> forward_head(const Tensor& features, ForwardMode mode, Rng* rng);
  std::size_t head_begin() const noexcept { return head_begin_; }

  /// Activation pattern of the last forward: signs at ReLU/SELU inputs and
  /// max-pool winners. Equal signatures mean the loss is smooth between runs.
  std::vector<std::uint8_t> kink_signature() const;

 private:
  std::span<const double> run(std::size_t first, std::size_t last, ForwardMode mode, Rng* rng);

  Shape input_shape_{};
  std::vector<Layer> layers_;
  std::size_t head_begin_ = 0;
  std::vector<Tensor> acts_;   // acts_[i] = input of layer i
  std::vector<Tensor> grads_;  // grads_[i] = dLoss/d acts_[i]
  std::vector<double> logits_;
};

/// Numerically stable BCE on a logit.
double bce_with_logit(double logit, std::uint8_t y) noexcept;
double sigmoid(double z) noexcept;

}  // namespace echoflag::learn
