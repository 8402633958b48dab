#include "echoflag/learn/svm.hpp"

#include <cmath>
#include <numeric>

#include "echoflag/rng.hpp"
#include "echoflag/simd/kernels.hpp"

namespace echoflag::learn {

double LinearSvm::margin(std::span<const double> x) const noexcept {
  return simd::kernels().dot(w_.data(), x.data(), w_.size()) + b_;
}

double LinearSvm::predict(std::span<const double> x) const noexcept {
  const double z = platt_a_ * margin(x) + platt_b_;
  return z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

LinearSvm LinearSvm::train(const SvmSpec& spec, const Dataset& data, std::size_t epochs, std::uint64_t seed) {
  const auto& k = simd::kernels();
  const std::size_t n = data.size();
  const std::size_t d = data.input_length();
  LinearSvm svm;
  svm.w_.assign(d, 0.0);
  // w is kept as scale * v so the shrink step is O(1).
  std::vector<double>& v = svm.w_;
  double scale = 1.0;
  double bias = 0.0;
  const double alpha = spec.alpha;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (const std::size_t i : order) {
      const double eta = kEta0 / (1.0 + alpha * kEta0 * static_cast<double>(t));
      const auto x = data.x.ping(i);
      const double y = data.y[i] ? 1.0 : -1.0;
      const double m = scale * k.dot(v.data(), x.data(), d) + bias;
      scale *= 1.0 - eta * alpha;
      if (scale < 1e-9) {
        for (auto& w : v) w *= scale;
        scale = 1.0;
      }
      if (y * m < 1.0) {
        k.axpy(eta * y / scale, x.data(), v.data(), d);
        bias += eta * y;
      }
      ++t;
    }
  }
  for (auto& w : v) w *= scale;
  svm.b_ = bias;

  std::vector<double> margins(n);
  for (std::size_t i = 0; i < n; ++i) margins[i] = svm.margin(data.x.ping(i));
  std::tie(svm.platt_a_, svm.platt_b_) = fit_platt(margins, data.y);
  return svm;
}

std::pair<double, double> fit_platt(std::span<const double> margins, std::span<const std::uint8_t> labels) {
  const std::size_t n = margins.size();
  double prior1 = 0, prior0 = 0;
  for (auto y : labels) (y ? prior1 : prior0) += 1.0;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = labels[i] ? hi : lo;

  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double aa, double bb) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = margins[i] * aa + bb;
      f += z >= 0 ? target[i] * z + std::log1p(std::exp(-z)) : (target[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };
  constexpr double kSigma = 1e-12;
  double fval = objective(a, b);
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = margins[i] * a + b;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += margins[i] * margins[i] * d2;
      h22 += d2;
      h21 += margins[i] * d2;
      const double d1 = target[i] - p;
      g1 += margins[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    bool moved = false;
    while (step >= 1e-10) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  return {a, b};
}

}  // namespace echoflag::learn
