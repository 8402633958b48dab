#include "echoflag/echogram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "echoflag/error.hpp"
#include "echoflag/simd/kernels.hpp"

namespace echoflag {

Echogram::Echogram(std::size_t rows, std::size_t cols, double depth_origin_m, double depth_step_m,
                   std::vector<float> sv, std::string survey_id)
    : rows_(rows),
      cols_(cols),
      depth_origin_m_(depth_origin_m),
      depth_step_m_(depth_step_m),
      sv_(std::move(sv)),
      survey_id_(std::move(survey_id)) {
  if (cols != 0 && rows > std::numeric_limits<std::size_t>::max() / cols)
    throw Error(ErrorCode::DimensionOverflow, "rows*cols overflows");
  if (sv_.size() != rows * cols)
    throw Error(ErrorCode::DimensionMismatch, "sv has " + std::to_string(sv_.size()) +
                                                  " values, expected rows*cols = " +
                                                  std::to_string(rows * cols));
  if (!(depth_step_m > 0.0) || !std::isfinite(depth_step_m))
    throw Error(ErrorCode::InvalidConfig, "depth step must be positive");
}

std::vector<double> Echogram::depth_axis() const {
  std::vector<double> axis(rows_);
  for (std::size_t r = 0; r < rows_; ++r) axis[r] = depth(r);
  return axis;
}

std::size_t Echogram::row_for_depth(double depth_m) const noexcept {
  if (rows_ == 0) return 0;
  const double pos = std::round((depth_m - depth_origin_m_) / depth_step_m_);
  if (!(pos > 0.0)) return 0;
  if (pos >= static_cast<double>(rows_ - 1)) return rows_ - 1;
  return static_cast<std::size_t>(pos);
}

std::vector<float> Echogram::ping(std::size_t col) const {
  std::vector<float> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = sv_[r * cols_ + col];
  return out;
}

Echogram trim_rows(const Echogram& e, std::size_t n_top) {
  if (n_top >= e.rows())
    throw Error(ErrorCode::TrimTooLarge,
                "cannot trim " + std::to_string(n_top) + " of " + std::to_string(e.rows()) + " rows");
  if (n_top == 0) return e;
  const auto first = e.values().begin() + static_cast<std::ptrdiff_t>(n_top * e.cols());
  std::vector<float> sv(first, e.values().end());
  return Echogram(e.rows() - n_top, e.cols(), e.depth(n_top), e.depth_step_m(), std::move(sv),
                  e.survey_id());
}

PingPartition filter_no_bottom(const Echogram& e, float threshold_db) {
  std::vector<std::uint8_t> hit(e.cols());
  if (e.cols() > 0)
    simd::kernels().column_exceeds(e.values().data(), e.rows(), e.cols(), 0, e.cols(), threshold_db,
                                   hit.data());
  PingPartition part;
  for (std::size_t c = 0; c < e.cols(); ++c) (hit[c] ? part.kept : part.dropped).push_back(c);
  return part;
}

Echogram replace_nan(Echogram e, float fill_db) {
  auto v = e.values();
  simd::kernels().replace_nan(v.data(), v.size(), fill_db);
  return e;
}

PingMatrix extract_pings(const Echogram& e, std::span<const std::size_t> indices) {
  PingMatrix m(indices.size(), e.rows());
  for (std::size_t r = 0; r < e.rows(); ++r) {
    const auto row = e.row(r);
    for (std::size_t i = 0; i < indices.size(); ++i)
      m.values[i * m.length + r] = static_cast<double>(row[indices[i]]);
  }
  return m;
}

StandardizationStats compute_standardization(const PingMatrix& pings) {
  if (pings.count == 0) throw Error(ErrorCode::EmptyInput, "no pings to standardize");
  const std::size_t n = pings.count;
  const std::size_t len = pings.length;
  StandardizationStats stats{std::vector<double>(len, 0.0), std::vector<double>(len, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = pings.ping(i);
    for (std::size_t r = 0; r < len; ++r) stats.mean[r] += p[r];
  }
  for (auto& m : stats.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = pings.ping(i);
    for (std::size_t r = 0; r < len; ++r) {
      const double d = p[r] - stats.mean[r];
      stats.stddev[r] += d * d;
    }
  }
  for (auto& s : stats.stddev) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 0.0)) s = 1.0;
  }
  return stats;
}

void apply_standardization(PingMatrix& pings, const StandardizationStats& stats) {
  if (stats.size() != pings.length)
    throw Error(ErrorCode::DimensionMismatch, "stats length " + std::to_string(stats.size()) +
                                                  " != ping length " + std::to_string(pings.length));
  for (std::size_t i = 0; i < pings.count; ++i) {
    auto p = pings.ping(i);
    for (std::size_t r = 0; r < pings.length; ++r) p[r] = (p[r] - stats.mean[r]) / stats.stddev[r];
  }
}

std::pair<PingMatrix, StandardizationStats> standardize(
    const PingMatrix& pings, const std::optional<StandardizationStats>& stats) {
  if (pings.count == 0) throw Error(ErrorCode::EmptyInput, "no pings to standardize");
  StandardizationStats used = stats ? *stats : compute_standardization(pings);
  PingMatrix out = pings;
  apply_standardization(out, used);
  return {std::move(out), std::move(used)};
}

FormattedEchogram format_echogram(const Echogram& raw, const FormatConfig& cfg) {
  auto trimmed = trim_rows(raw, cfg.trim_rows);
  auto partition = filter_no_bottom(trimmed, cfg.bottom_signature_db);
  return {replace_nan(std::move(trimmed), cfg.nan_fill_db), std::move(partition)};
}

std::pair<Echogram, StandardizationStats> standardize_echogram(
    const Echogram& e, std::span<const std::size_t> kept, const std::optional<StandardizationStats>& stats) {
  StandardizationStats used = stats ? *stats : compute_standardization(extract_pings(e, kept));
  if (used.size() != e.rows())
    throw Error(ErrorCode::DimensionMismatch, "stats length " + std::to_string(used.size()) +
                                                  " != rows " + std::to_string(e.rows()));
  std::vector<float> sv(e.values().begin(), e.values().end());
  for (std::size_t r = 0; r < e.rows(); ++r)
    for (std::size_t c = 0; c < e.cols(); ++c) {
      auto& v = sv[r * e.cols() + c];
      v = static_cast<float>((static_cast<double>(v) - used.mean[r]) / used.stddev[r]);
    }
  return {Echogram(e.rows(), e.cols(), e.depth_origin_m(), e.depth_step_m(), std::move(sv), e.survey_id()),
          std::move(used)};
}

}  // namespace echoflag
