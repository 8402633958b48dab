#include "echoflag/learn/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "echoflag/error.hpp"
#include "echoflag/simd/kernels.hpp"

namespace echoflag::learn {

std::string_view param_kind_name(ParamKind kind) noexcept {
  switch (kind) {
    case ParamKind::ConvKernel: return "conv_kernel";
    case ParamKind::BatchNormScale: return "batchnorm_scale";
    case ParamKind::BatchNormShift: return "batchnorm_shift";
    case ParamKind::DenseWeight: return "dense_weight";
    case ParamKind::DenseBias: return "dense_bias";
  }
  return "?";
}

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_with_logit(double logit, std::uint8_t y) noexcept {
  return std::max(logit, 0.0) - logit * static_cast<double>(y) + std::log1p(std::exp(-std::abs(logit)));
}

// ---------------------------------------------------------------------------
// Dense

void Dense::forward(const Tensor& x, Tensor& y, ForwardMode, Rng*) {
  const auto& k = simd::kernels();
  for (std::size_t n = 0; n < x.batch(); ++n) {
    const double* xs = x.sample(n).data();
    double* ys = y.sample(n).data();
    for (std::size_t o = 0; o < out; ++o) ys[o] = b[o] + k.dot(w.data() + o * in, xs, in);
  }
}

void Dense::backward(const Tensor& x, const Tensor&, const Tensor& gy, Tensor* gx) {
  const auto& k = simd::kernels();
  for (std::size_t n = 0; n < x.batch(); ++n) {
    const double* xs = x.sample(n).data();
    const double* g = gy.sample(n).data();
    double* gxs = gx ? gx->sample(n).data() : nullptr;
    for (std::size_t o = 0; o < out; ++o) {
      if (g[o] == 0.0) continue;
      gb[o] += g[o];
      k.axpy(g[o], xs, gw.data() + o * in, in);
      if (gxs) k.axpy(g[o], w.data() + o * in, gxs, in);
    }
  }
}

// ---------------------------------------------------------------------------
// Conv1d

namespace {

struct Overlap {
  std::size_t t0, t1;  // output positions [t0, t1) read input at t + shift
  std::ptrdiff_t shift;
};

inline Overlap overlap(std::size_t length, std::size_t kernel, std::size_t j) {
  const auto pad = static_cast<std::ptrdiff_t>((kernel - 1) / 2);
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(j) - pad;
  const auto len = static_cast<std::ptrdiff_t>(length);
  const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -s);
  const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(len, len - s);
  if (t1 <= t0) return {0, 0, s};
  return {static_cast<std::size_t>(t0), static_cast<std::size_t>(t1), s};
}

}  // namespace

void Conv1d::forward(const Tensor& x, Tensor& y, ForwardMode, Rng*) {
  const auto& k = simd::kernels();
  const std::size_t len = x.shape().length;
  y.zero();
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t o = 0; o < out_channels; ++o) {
      double* yo = y.channel(n, o);
      for (std::size_t i = 0; i < in_channels; ++i) {
        const double* xi = x.channel(n, i);
        const double* wk = w.data() + (o * in_channels + i) * kernel;
        for (std::size_t j = 0; j < kernel; ++j) {
          const Overlap ov = overlap(len, kernel, j);
          if (ov.t1 > ov.t0) k.axpy(wk[j], xi + ov.t0 + ov.shift, yo + ov.t0, ov.t1 - ov.t0);
        }
      }
    }
  }
}

void Conv1d::backward(const Tensor& x, const Tensor&, const Tensor& gy, Tensor* gx) {
  const auto& k = simd::kernels();
  const std::size_t len = x.shape().length;
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t o = 0; o < out_channels; ++o) {
      const double* go = gy.channel(n, o);
      for (std::size_t i = 0; i < in_channels; ++i) {
        const double* xi = x.channel(n, i);
        double* gxi = gx ? gx->channel(n, i) : nullptr;
        const std::size_t base = (o * in_channels + i) * kernel;
        for (std::size_t j = 0; j < kernel; ++j) {
          const Overlap ov = overlap(len, kernel, j);
          if (ov.t1 <= ov.t0) continue;
          const std::size_t m = ov.t1 - ov.t0;
          gw[base + j] += k.dot(go + ov.t0, xi + ov.t0 + ov.shift, m);
          if (gxi) k.axpy(w[base + j], go + ov.t0, gxi + ov.t0 + ov.shift, m);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// BatchNorm

void BatchNorm::forward(const Tensor& x, Tensor& y, ForwardMode mode, Rng*) {
  const std::size_t batch = x.batch();
  const std::size_t len = x.shape().length;
  const double count = static_cast<double>(batch * len);
  xhat.resize(x.data().size());
  inv_std.resize(channels);
  used_batch_stats = mode.batch_statistics;
  for (std::size_t c = 0; c < channels; ++c) {
    double mean, var;
    if (mode.batch_statistics) {
      double s = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const double* xc = x.channel(n, c);
        for (std::size_t t = 0; t < len; ++t) s += xc[t];
      }
      mean = s / count;
      double v = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const double* xc = x.channel(n, c);
        for (std::size_t t = 0; t < len; ++t) v += (xc[t] - mean) * (xc[t] - mean);
      }
      var = v / count;
      if (mode.update_running) {
        const double unbiased = count > 1 ? v / (count - 1) : var;
        running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mean;
        running_var[c] = momentum * running_var[c] + (1.0 - momentum) * unbiased;
      }
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[c] = is;
    for (std::size_t n = 0; n < batch; ++n) {
      const double* xc = x.channel(n, c);
      double* yc = y.channel(n, c);
      double* hc = xhat.data() + n * x.shape().size() + c * len;
      for (std::size_t t = 0; t < len; ++t) {
        hc[t] = (xc[t] - mean) * is;
        yc[t] = gamma[c] * hc[t] + beta[c];
      }
    }
  }
}

void BatchNorm::backward(const Tensor& x, const Tensor&, const Tensor& gy, Tensor* gx) {
  const std::size_t batch = x.batch();
  const std::size_t len = x.shape().length;
  const double count = static_cast<double>(batch * len);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum_g = 0.0, sum_gh = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      const double* gc = gy.channel(n, c);
      const double* hc = xhat.data() + n * x.shape().size() + c * len;
      for (std::size_t t = 0; t < len; ++t) {
        sum_g += gc[t];
        sum_gh += gc[t] * hc[t];
      }
    }
    g_beta[c] += sum_g;
    g_gamma[c] += sum_gh;
    if (!gx) continue;
    const double scale = gamma[c] * inv_std[c];
    for (std::size_t n = 0; n < batch; ++n) {
      const double* gc = gy.channel(n, c);
      const double* hc = xhat.data() + n * x.shape().size() + c * len;
      double* out = gx->channel(n, c);
      if (used_batch_stats) {
        // dx = gamma/sigma * (g - mean(g) - xhat * mean(g * xhat))
        const double mg = sum_g / count, mgh = sum_gh / count;
        for (std::size_t t = 0; t < len; ++t) out[t] += scale * (gc[t] - mg - hc[t] * mgh);
      } else {
        for (std::size_t t = 0; t < len; ++t) out[t] += scale * gc[t];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Activations, pooling, dropout

void Relu::forward(const Tensor& x, Tensor& y, ForwardMode, Rng*) {
  const auto in = x.data();
  auto out = y.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void Relu::backward(const Tensor& x, const Tensor&, const Tensor& gy, Tensor* gx) {
  if (!gx) return;
  const auto in = x.data();
  const auto g = gy.data();
  auto out = gx->data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] += in[i] > 0.0 ? g[i] : 0.0;
}

void Selu::forward(const Tensor& x, Tensor& y, ForwardMode, Rng*) {
  const auto in = x.data();
  auto out = y.data();
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = in[i] > 0.0 ? kLambda * in[i] : kLambda * kAlpha * std::expm1(in[i]);
}

void Selu::backward(const Tensor& x, const Tensor& y, const Tensor& gy, Tensor* gx) {
  if (!gx) return;
  const auto in = x.data();
  const auto fy = y.data();
  const auto g = gy.data();
  auto out = gx->data();
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] += g[i] * (in[i] > 0.0 ? kLambda : fy[i] + kLambda * kAlpha);
}

void MaxPool2::forward(const Tensor& x, Tensor& y, ForwardMode, Rng*) {
  const Shape in = x.shape();
  const std::size_t half = in.length / 2;
  argmax.resize(y.data().size());
  std::size_t k = 0;
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < in.channels; ++c) {
      const double* xc = x.channel(n, c);
      double* yc = y.channel(n, c);
      for (std::size_t t = 0; t < half; ++t, ++k) {
        const std::size_t a = 2 * t;
        const std::size_t pick = xc[a + 1] > xc[a] ? a + 1 : a;
        yc[t] = xc[pick];
        argmax[k] = static_cast<std::uint32_t>(pick);
      }
    }
}

void MaxPool2::backward(const Tensor& x, const Tensor&, const Tensor& gy, Tensor* gx) {
  if (!gx) return;
  const Shape in = x.shape();
  const std::size_t half = in.length / 2;
  std::size_t k = 0;
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < in.channels; ++c) {
      const double* gc = gy.channel(n, c);
      double* out = gx->channel(n, c);
      for (std::size_t t = 0; t < half; ++t, ++k) out[argmax[k]] += gc[t];
    }
}

namespace {
constexpr double kMaxDropRate = 0.999;
constexpr double kSeluSaturation = -Selu::kLambda * Selu::kAlpha;
}  // namespace

void AlphaDropout::forward(const Tensor& x, Tensor& y, ForwardMode mode, Rng* rng) {
  const double p = std::min(rate, kMaxDropRate);
  active = mode.dropout && p > 0.0;
  const auto in = x.data();
  auto out = y.data();
  if (!active) {
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  if (rng == nullptr) throw std::invalid_argument("dropout requires a random generator");
  const double q = 1.0 - p;
  scale = 1.0 / std::sqrt(q * (1.0 + p * kSeluSaturation * kSeluSaturation));
  const double shift = -scale * kSeluSaturation * p;
  mask.resize(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const bool keep = rng->uniform() >= p;
    mask[i] = keep;
    out[i] = scale * (keep ? in[i] : kSeluSaturation) + shift;
  }
}

void AlphaDropout::backward(const Tensor& x, const Tensor&, const Tensor& gy, Tensor* gx) {
  if (!gx) return;
  const auto g = gy.data();
  auto out = gx->data();
  if (!active) {
    for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i];
    return;
  }
  for (std::size_t i = 0; i < x.data().size(); ++i) out[i] += mask[i] ? scale * g[i] : 0.0;
}

// ---------------------------------------------------------------------------
// Network

namespace {

Dense make_dense(std::size_t in, std::size_t out, Rng& rng) {
  Dense d;
  d.in = in;
  d.out = out;
  d.w.resize(in * out);
  const double sd = 1.0 / std::sqrt(static_cast<double>(in));  // LeCun normal for SELU
  for (auto& v : d.w) v = rng.normal(0.0, sd);
  d.b.assign(out, 0.0);
  d.gw.assign(d.w.size(), 0.0);
  d.gb.assign(out, 0.0);
  return d;
}

Conv1d make_conv(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng) {
  Conv1d c;
  c.in_channels = in;
  c.out_channels = out;
  c.kernel = kernel;
  c.w.resize(in * out * kernel);
  const double limit = std::sqrt(6.0 / static_cast<double>((in + out) * kernel));  // Glorot uniform
  for (auto& v : c.w) v = rng.uniform(-limit, limit);
  c.gw.assign(c.w.size(), 0.0);
  return c;
}

BatchNorm make_bn(std::size_t channels) {
  BatchNorm bn;
  bn.channels = channels;
  bn.gamma.assign(channels, 1.0);
  bn.beta.assign(channels, 0.0);
  bn.g_gamma.assign(channels, 0.0);
  bn.g_beta.assign(channels, 0.0);
  bn.running_mean.assign(channels, 0.0);
  bn.running_var.assign(channels, 1.0);
  return bn;
}

void append_head(std::vector<Layer>& layers, std::size_t in, const std::array<std::int64_t, 3>& hidden,
                 double dropout, Rng& rng, std::size_t& head_begin) {
  std::size_t width = in;
  for (const auto h : hidden) {
    layers.emplace_back(make_dense(width, static_cast<std::size_t>(h), rng));
    layers.emplace_back(Selu{});
    width = static_cast<std::size_t>(h);
  }
  head_begin = layers.size();
  AlphaDropout drop;
  drop.rate = dropout;
  layers.emplace_back(std::move(drop));
  layers.emplace_back(make_dense(width, 1, rng));
}

}  // namespace

namespace {

// Structural sanity only: search-space ranges are enforced by validate(), and
// shrunken architectures (e.g. for gradient checks) are legitimate here.
void check_buildable(const std::array<std::int64_t, 3>& hidden, double dropout) {
  for (auto h : hidden)
    if (h < 1) throw Error(ErrorCode::InvalidConfig, "hidden width must be positive");
  if (!(dropout >= 0.0 && dropout <= 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout outside [0, 1]");
}

}  // namespace

Network Network::build(const ModelSpec& spec, std::size_t input_length, std::uint64_t seed) {
  if (input_length == 0) throw Error(ErrorCode::DimensionMismatch, "empty input");
  Network net;
  net.input_shape_ = {1, input_length};
  Rng rng(seed);
  if (const auto* f = std::get_if<FfnnSpec>(&spec)) {
    check_buildable(f->hidden, f->dropout3);
    append_head(net.layers_, input_length, f->hidden, f->dropout3, rng, net.head_begin_);
  } else if (const auto* c = std::get_if<CnnSpec>(&spec)) {
    check_buildable(c->hidden, c->dropout3);
    for (auto k : c->kernels)
      if (k < 1) throw Error(ErrorCode::InvalidConfig, "kernel size must be positive");
    if (input_length < 8)
      throw Error(ErrorCode::DimensionMismatch, "CNN needs at least 8 input cells, got " +
                                                    std::to_string(input_length));
    std::size_t channels = 1, length = input_length;
    for (std::size_t b = 0; b < 3; ++b) {
      const auto out = static_cast<std::size_t>(kConvChannels[b]);
      net.layers_.emplace_back(make_conv(channels, out, static_cast<std::size_t>(c->kernels[b]), rng));
      net.layers_.emplace_back(make_bn(out));
      net.layers_.emplace_back(Relu{});
      net.layers_.emplace_back(MaxPool2{});
      channels = out;
      length /= 2;
    }
    append_head(net.layers_, channels * length, c->hidden, c->dropout3, rng, net.head_begin_);
  } else {
    throw Error(ErrorCode::InvalidConfig, "Network::build needs an FFNN or CNN spec");
  }
  net.acts_.resize(net.layers_.size() + 1);
  net.grads_.resize(net.layers_.size() + 1);
  return net;
}

std::span<const double> Network::run(std::size_t first, std::size_t last, ForwardMode mode, Rng* rng) {
  for (std::size_t i = first; i < last; ++i) {
    const Tensor& in = acts_[i];
    Tensor& out = acts_[i + 1];
    std::visit(
        [&](auto& layer) {
          const Shape s = layer.output_shape(in.shape());
          if (out.batch() != in.batch() || out.shape() != s) out.resize(in.batch(), s);
          layer.forward(in, out, mode, rng);
        },
        layers_[i]);
  }
  return acts_[last].data();
}

std::span<const double> Network::forward(std::span<const double> x, std::size_t batch, ForwardMode mode,
                                         Rng* rng) {
  if (x.size() != batch * input_length())
    throw Error(ErrorCode::DimensionMismatch, "network expects " + std::to_string(input_length()) +
                                                  " cells per ping");
  Tensor& in = acts_[0];
  if (in.batch() != batch || in.shape() != input_shape_) in.resize(batch, input_shape_);
  std::copy(x.begin(), x.end(), in.data().begin());
  return run(0, layers_.size(), mode, rng);
}

double Network::backward(std::span<const std::uint8_t> y) {
  const Tensor& out = acts_.back();
  const std::size_t batch = out.batch();
  if (y.size() != batch) throw Error(ErrorCode::DimensionMismatch, "label count != batch");
  Tensor& g = grads_.back();
  if (g.batch() != batch || g.shape() != out.shape()) g.resize(batch, out.shape());
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    const double z = out.data()[n];
    loss += bce_with_logit(z, y[n]);
    g.data()[n] = (sigmoid(z) - static_cast<double>(y[n])) * inv;
  }
  for (std::size_t i = layers_.size(); i-- > 0;) {
    Tensor* gx = nullptr;
    if (i > 0) {
      gx = &grads_[i];
      if (gx->batch() != batch || gx->shape() != acts_[i].shape()) gx->resize(batch, acts_[i].shape());
      else gx->zero();
    }
    std::visit([&](auto& layer) { layer.backward(acts_[i], acts_[i + 1], grads_[i + 1], gx); }, layers_[i]);
  }
  return loss * inv;
}

void Network::zero_grad() {
  for (auto& p : params()) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

std::vector<ParamView> Network::params() {
  std::vector<ParamView> out;
  for (auto& layer : layers_) {
    if (auto* d = std::get_if<Dense>(&layer)) {
      out.push_back({ParamKind::DenseWeight, d->w, d->gw});
      out.push_back({ParamKind::DenseBias, d->b, d->gb});
    } else if (auto* c = std::get_if<Conv1d>(&layer)) {
      out.push_back({ParamKind::ConvKernel, c->w, c->gw});
    } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
      out.push_back({ParamKind::BatchNormScale, bn->gamma, bn->g_gamma});
      out.push_back({ParamKind::BatchNormShift, bn->beta, bn->g_beta});
    }
  }
  return out;
}

std::vector<std::span<double>> Network::state() {
  std::vector<std::span<double>> out;
  for (auto& p : params()) out.push_back(p.value);
  for (auto& layer : layers_)
    if (auto* bn = std::get_if<BatchNorm>(&layer)) {
      out.emplace_back(bn->running_mean);
      out.emplace_back(bn->running_var);
    }
  return out;
}

std::vector<std::span<const double>> Network::state() const {
  auto spans = const_cast<Network*>(this)->state();
  return {spans.begin(), spans.end()};
}

const Tensor& Network::forward_trunk(std::span<const double> x, std::size_t batch) {
  if (x.size() != batch * input_length())
    throw Error(ErrorCode::DimensionMismatch, "network expects " + std::to_string(input_length()) +
                                                  " cells per ping");
  Tensor& in = acts_[0];
  if (in.batch() != batch || in.shape() != input_shape_) in.resize(batch, input_shape_);
  std::copy(x.begin(), x.end(), in.data().begin());
  run(0, head_begin_, kEvalMode, nullptr);
  return acts_[head_begin_];
}

std::span<const double> Network::forward_head(const Tensor& features, ForwardMode mode, Rng* rng) {
  if (&features != &acts_[head_begin_]) acts_[head_begin_] = features;
  return run(head_begin_, layers_.size(), mode, rng);
}

std::vector<std::uint8_t> Network::kink_signature() const {
  std::vector<std::uint8_t> sig;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (std::holds_alternative<Relu>(layers_[i]) || std::holds_alternative<Selu>(layers_[i])) {
      for (double v : acts_[i].data()) sig.push_back(v > 0.0);
    } else if (const auto* mp = std::get_if<MaxPool2>(&layers_[i])) {
      for (auto a : mp->argmax) sig.push_back(static_cast<std::uint8_t>(a & 1U));
    }
  }
  return sig;
}

}  // namespace echoflag::learn
