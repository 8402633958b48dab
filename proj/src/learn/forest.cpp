#include "echoflag/learn/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "echoflag/rng.hpp"

namespace echoflag::learn {

const DecisionTree::Node& DecisionTree::leaf(std::span<const double> x) const noexcept {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= static_cast<double>(n.threshold)
                                     ? n.left
                                     : n.right);
  }
  return nodes[i];
}

std::uint8_t DecisionTree::vote(std::span<const double> x) const noexcept {
  return leaf(x).positive_fraction > 0.5F ? 1 : 0;
}

double RandomForest::predict(std::span<const double> x) const noexcept {
  if (trees_.empty()) return 0.0;
  std::size_t votes = 0;
  for (const auto& t : trees_) votes += t.vote(x);
  return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

namespace {

/// A float f with lo <= f < hi, if one exists.
std::optional<float> float_threshold(double lo, double hi) {
  float f = static_cast<float>(lo + (hi - lo) / 2.0);
  if (static_cast<double>(f) < lo) f = std::nextafter(f, std::numeric_limits<float>::infinity());
  if (static_cast<double>(f) >= hi) f = std::nextafter(f, -std::numeric_limits<float>::infinity());
  if (static_cast<double>(f) >= lo && static_cast<double>(f) < hi) return f;
  return std::nullopt;
}

struct SplitCandidate {
  double impurity = std::numeric_limits<double>::infinity();
  std::int32_t feature = -1;
  float threshold = 0.0F;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, std::size_t min_leaf, std::size_t features_per_split, Rng& rng)
      : data_(data), min_leaf_(min_leaf), mtry_(features_per_split), rng_(rng) {
    feature_pool_.resize(data.input_length());
    std::iota(feature_pool_.begin(), feature_pool_.end(), 0U);
  }

  DecisionTree build(std::vector<std::uint32_t> sample) {
    DecisionTree tree;
    struct Pending {
      std::size_t node;
      std::vector<std::uint32_t> rows;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, std::move(sample)});
    while (!stack.empty()) {
      Pending p = std::move(stack.back());
      stack.pop_back();
      const std::size_t n = p.rows.size();
      std::size_t pos = 0;
      for (auto r : p.rows) pos += data_.y[r];
      tree.nodes[p.node].positive_fraction = static_cast<float>(static_cast<double>(pos) / static_cast<double>(n));
      if (pos == 0 || pos == n || n < 2 * min_leaf_) continue;
      const SplitCandidate best = best_split(p.rows, pos);
      if (best.feature < 0) continue;
      std::vector<std::uint32_t> left, right;
      for (auto r : p.rows)
        (data_.x.ping(r)[static_cast<std::size_t>(best.feature)] <= static_cast<double>(best.threshold) ? left
                                                                                                       : right)
            .push_back(r);
      const auto li = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[p.node];
      node.feature = best.feature;
      node.threshold = best.threshold;
      node.left = li;
      node.right = li + 1;
      stack.push_back({static_cast<std::size_t>(li + 1), std::move(right)});
      stack.push_back({static_cast<std::size_t>(li), std::move(left)});
    }
    return tree;
  }

 private:
  SplitCandidate best_split(const std::vector<std::uint32_t>& rows, std::size_t total_pos) {
    const std::size_t n = rows.size();
    SplitCandidate best;
    // Partial Fisher-Yates draw of mtry distinct features.
    const std::size_t d = feature_pool_.size();
    const std::size_t m = std::min(mtry_, d);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng_.below(d - k));
      std::swap(feature_pool_[k], feature_pool_[j]);
    }
    for (std::size_t k = 0; k < m; ++k) {
      const std::uint32_t f = feature_pool_[k];
      column_.resize(n);
      for (std::size_t i = 0; i < n; ++i) column_[i] = {data_.x.ping(rows[i])[f], data_.y[rows[i]]};
      std::sort(column_.begin(), column_.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t left_pos = 0;
      for (std::size_t left_n = 1; left_n < n; ++left_n) {
        left_pos += column_[left_n - 1].second;
        if (left_n < min_leaf_) continue;
        if (n - left_n < min_leaf_) break;
        const double lo = column_[left_n - 1].first, hi = column_[left_n].first;
        if (!(lo < hi)) continue;
        const double ln = static_cast<double>(left_n), rn = static_cast<double>(n - left_n);
        const double lp = static_cast<double>(left_pos) / ln;
        const double rp = static_cast<double>(total_pos - left_pos) / rn;
        // Weighted Gini: sum over children of size * 2p(1-p).
        const double impurity = ln * 2.0 * lp * (1.0 - lp) + rn * 2.0 * rp * (1.0 - rp);
        if (impurity < best.impurity) {
          if (auto t = float_threshold(lo, hi)) {
            best.impurity = impurity;
            best.feature = static_cast<std::int32_t>(f);
            best.threshold = *t;
          }
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  std::size_t min_leaf_;
  std::size_t mtry_;
  Rng& rng_;
  std::vector<std::uint32_t> feature_pool_;
  std::vector<std::pair<double, std::uint8_t>> column_;
};

}  // namespace

RandomForest RandomForest::train(const ForestSpec& spec, const Dataset& data, std::uint64_t seed) {
  RandomForest forest;
  const std::size_t n = data.size();
  const auto mtry = static_cast<std::size_t>(
      std::max(1.0, std::floor(std::sqrt(static_cast<double>(data.input_length())))));
  forest.trees_.reserve(static_cast<std::size_t>(spec.n_trees));
  for (std::int64_t t = 0; t < spec.n_trees; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::uint32_t> sample(n);
    for (auto& s : sample) s = static_cast<std::uint32_t>(rng.below(n));
    TreeBuilder builder(data, static_cast<std::size_t>(spec.min_samples_leaf), mtry, rng);
    forest.trees_.push_back(builder.build(std::move(sample)));
  }
  return forest;
}

}  // namespace echoflag::learn
