#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "echoflag/learn/dataset.hpp"
#include "echoflag/learn/model_spec.hpp"

namespace echoflag::learn {

/// Linear SVM: hinge loss + (alpha/2)|w|^2 minimized by per-example SGD with
/// step eta0 / (1 + alpha * eta0 * t). Margins are mapped to probabilities by
/// a logistic (Platt) fit on the training margins.
class LinearSvm {
 public:
  static constexpr double kEta0 = 0.01;

  LinearSvm() = default;

  static LinearSvm train(const SvmSpec& spec, const Dataset& data, std::size_t epochs, std::uint64_t seed);

  double margin(std::span<const double> x) const noexcept;
  double predict(std::span<const double> x) const noexcept;

  std::vector<double>& weights() noexcept { return w_; }
  const std::vector<double>& weights() const noexcept { return w_; }
  double& bias() noexcept { return b_; }
  double bias() const noexcept { return b_; }
  /// p = 1 / (1 + exp(platt_a * margin + platt_b))
  double& platt_a() noexcept { return platt_a_; }
  double& platt_b() noexcept { return platt_b_; }
  double platt_a() const noexcept { return platt_a_; }
  double platt_b() const noexcept { return platt_b_; }

 private:
  std::vector<double> w_;
  double b_ = 0.0;
  double platt_a_ = -1.0;
  double platt_b_ = 0.0;
};

/// Platt's sigmoid fit (Newton with backtracking, Lin/Lin/Weng formulation).
/// Returns (A, B) for p = 1 / (1 + exp(A f + B)).
std::pair<double, double> fit_platt(std::span<const double> margins, std::span<const std::uint8_t> labels);

}  // namespace echoflag::learn
