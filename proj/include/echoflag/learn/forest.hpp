#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "echoflag/learn/dataset.hpp"
#include "echoflag/learn/model_spec.hpp"

namespace echoflag::learn {

/// CART classification tree grown on a bootstrap sample with Gini splits and
/// sqrt(d) candidate features per node. Thresholds are float-representable so
/// a tree survives a round trip through the f32 model blob unchanged.
struct DecisionTree {
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    float threshold = 0.0F;     // x[feature] <= threshold goes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    float positive_fraction = 0.0F;
  };
  std::vector<Node> nodes;

  /// Class vote of the leaf reached by x (1 iff its positive fraction > 0.5).
  std::uint8_t vote(std::span<const double> x) const noexcept;
  const Node& leaf(std::span<const double> x) const noexcept;
};

class RandomForest {
 public:
  RandomForest() = default;

  static RandomForest train(const ForestSpec& spec, const Dataset& data, std::uint64_t seed);

  /// Fraction of trees voting for the strong-correction class.
  double predict(std::span<const double> x) const noexcept;

  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  std::vector<DecisionTree>& trees() noexcept { return trees_; }

 private:
  std::vector<DecisionTree> trees_;
};

}  // namespace echoflag::learn
