#include "echoflag/learn/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "echoflag/error.hpp"

namespace echoflag::learn {

void Dataset::validate() const {
  if (x.count != y.size() || ids.size() != y.size() || x.values.size() != x.count * x.length)
    throw Error(ErrorCode::DimensionMismatch, "dataset fields disagree in length");
  for (auto v : y)
    if (v > 1) throw Error(ErrorCode::DimensionMismatch, "label outside {0,1}");
}

bool Dataset::has_both_classes() const noexcept {
  const auto p = positives();
  return p > 0 && p < size();
}

std::size_t Dataset::positives() const noexcept {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), std::uint8_t{1}));
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x = PingMatrix(rows.size(), x.length);
  out.y.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = x.ping(rows[i]);
    std::copy(src.begin(), src.end(), out.x.ping(i).begin());
    out.y.push_back(y[rows[i]]);
    out.ids.push_back(ids[rows[i]]);
  }
  return out;
}

Dataset concatenate(std::span<const Dataset* const> parts) {
  Dataset out;
  std::size_t total = 0;
  std::size_t length = 0;
  bool first = true;
  for (const auto* p : parts) {
    if (p->empty()) continue;
    if (!first && p->input_length() != length)
      throw Error(ErrorCode::DimensionMismatch, "datasets differ in input length");
    length = p->input_length();
    first = false;
    total += p->size();
  }
  out.x.count = total;
  out.x.length = length;
  out.x.values.reserve(total * length);
  for (const auto* p : parts) {
    if (p->empty()) continue;
    out.x.values.insert(out.x.values.end(), p->x.values.begin(), p->x.values.end());
    out.y.insert(out.y.end(), p->y.begin(), p->y.end());
    out.ids.insert(out.ids.end(), p->ids.begin(), p->ids.end());
  }
  return out;
}

double accuracy(std::span<const double> probabilities, std::span<const std::uint8_t> labels, double threshold) {
  if (labels.empty()) throw Error(ErrorCode::EmptyTestSet, "accuracy of an empty set");
  if (probabilities.size() != labels.size())
    throw Error(ErrorCode::DimensionMismatch, "prediction and label counts differ");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    hits += static_cast<std::uint8_t>(probabilities[i] >= threshold) == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double binary_cross_entropy(std::span<const double> probabilities, std::span<const std::uint8_t> labels) {
  if (labels.empty()) throw Error(ErrorCode::EmptyTestSet, "loss of an empty set");
  if (probabilities.size() != labels.size())
    throw Error(ErrorCode::DimensionMismatch, "prediction and label counts differ");
  constexpr double kClamp = 1e-7;
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probabilities[i], kClamp, 1.0 - kClamp);
    sum -= labels[i] ? std::log(p) : std::log1p(-p);
  }
  return sum / static_cast<double>(labels.size());
}

}  // namespace echoflag::learn
