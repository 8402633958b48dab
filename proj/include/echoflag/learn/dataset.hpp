#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "echoflag/echogram.hpp"

namespace echoflag::learn {

/// Standardized pings with binary targets (1 = strong correction, 0 = weak).
struct Dataset {
  PingMatrix x;
  std::vector<std::uint8_t> y;
  std::vector<std::size_t> ids;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t input_length() const noexcept { return x.length; }
  bool empty() const noexcept { return y.empty(); }

  /// Throws DimensionMismatch when the fields disagree or a label is not 0/1.
  void validate() const;
  bool has_both_classes() const noexcept;
  std::size_t positives() const noexcept;

  Dataset subset(std::span<const std::size_t> rows) const;
};

/// Concatenates datasets with equal input length.
Dataset concatenate(std::span<const Dataset* const> parts);

double accuracy(std::span<const double> probabilities, std::span<const std::uint8_t> labels,
                double threshold = 0.5);

/// Mean binary cross-entropy of probabilities (clamped away from 0 and 1).
double binary_cross_entropy(std::span<const double> probabilities, std::span<const std::uint8_t> labels);

}  // namespace echoflag::learn
