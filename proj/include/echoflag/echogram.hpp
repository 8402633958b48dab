#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace echoflag {

inline constexpr float kNanFillDb = -200.0F;
inline constexpr float kBottomSignatureDb = -32.0F;
inline constexpr double kDefaultDepthStepM = 0.20;

/// Depth cells x pings matrix of volume backscattering strength (dB), row-major.
/// The depth axis is uniform: depth(r) = origin + r * step.
class Echogram {
 public:
  Echogram() = default;
  Echogram(std::size_t rows, std::size_t cols, double depth_origin_m, double depth_step_m,
           std::vector<float> sv, std::string survey_id = {});

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double depth_origin_m() const noexcept { return depth_origin_m_; }
  double depth_step_m() const noexcept { return depth_step_m_; }
  const std::string& survey_id() const noexcept { return survey_id_; }
  void set_survey_id(std::string id) { survey_id_ = std::move(id); }

  double depth(std::size_t row) const noexcept {
    return depth_origin_m_ + static_cast<double>(row) * depth_step_m_;
  }
  double max_depth_m() const noexcept { return rows_ == 0 ? depth_origin_m_ : depth(rows_ - 1); }
  std::vector<double> depth_axis() const;

  /// round((depth - origin) / step), clamped to [0, rows - 1].
  std::size_t row_for_depth(double depth_m) const noexcept;

  float at(std::size_t row, std::size_t col) const noexcept { return sv_[row * cols_ + col]; }
  float& at(std::size_t row, std::size_t col) noexcept { return sv_[row * cols_ + col]; }

  std::span<const float> values() const noexcept { return sv_; }
  std::span<float> values() noexcept { return sv_; }
  std::span<const float> row(std::size_t r) const noexcept { return {sv_.data() + r * cols_, cols_}; }

  /// Copy of one ping (column), top to bottom.
  std::vector<float> ping(std::size_t col) const;

  friend bool operator==(const Echogram&, const Echogram&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  double depth_origin_m_ = 0.0;
  double depth_step_m_ = kDefaultDepthStepM;
  std::vector<float> sv_;
  std::string survey_id_;
};

/// Automatic and expert bottom depth per ping (meters). NaN marks "unset".
struct BottomRecord {
  std::vector<double> bottom_m;
  std::vector<double> clean_bottom_m;

  std::size_t size() const noexcept { return clean_bottom_m.size(); }
  friend bool operator==(const BottomRecord&, const BottomRecord&) = default;
};

enum class PingLabel : std::uint8_t { NoBottom, WeakCorrection, StrongCorrection };

struct PingPartition {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> dropped;
};

/// Dense pings x cells matrix in double precision (one ping per row).
struct PingMatrix {
  std::size_t count = 0;
  std::size_t length = 0;
  std::vector<double> values;

  PingMatrix() = default;
  PingMatrix(std::size_t count, std::size_t length) : count(count), length(length), values(count * length) {}

  std::span<double> ping(std::size_t i) noexcept { return {values.data() + i * length, length}; }
  std::span<const double> ping(std::size_t i) const noexcept { return {values.data() + i * length, length}; }
  friend bool operator==(const PingMatrix&, const PingMatrix&) = default;
};

/// Per-depth-row mean and population standard deviation.
struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t size() const noexcept { return mean.size(); }
  friend bool operator==(const StandardizationStats&, const StandardizationStats&) = default;
};

// ---------------------------------------------------------------------------
// .echg codec: "ECHG", u32 version, u32 rows, u32 cols, f64 depth_step_m,
// f64 depth_origin_m, rows*cols f32 (row-major), all little-endian.

inline constexpr std::uint32_t kEchogramFormatVersion = 1;

std::vector<std::uint8_t> encode_echogram(const Echogram& e);
Echogram decode_echogram(std::span<const std::uint8_t> bytes);
void save_echogram(const Echogram& e, const std::filesystem::path& path);
Echogram load_echogram(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Formatting pipeline.

/// Drops the first n_top depth rows; the remaining rows keep their physical depth.
Echogram trim_rows(const Echogram& e, std::size_t n_top);

/// A ping is kept iff some non-NaN cell exceeds threshold_db.
PingPartition filter_no_bottom(const Echogram& e, float threshold_db = kBottomSignatureDb);

Echogram replace_nan(Echogram e, float fill_db = kNanFillDb);

/// Columns `indices` of e, as double-precision pings.
PingMatrix extract_pings(const Echogram& e, std::span<const std::size_t> indices);

StandardizationStats compute_standardization(const PingMatrix& pings);

/// Per-row z-score. With stats omitted they are computed from `pings`;
/// supplied stats are applied unchanged (validation and test data).
std::pair<PingMatrix, StandardizationStats> standardize(
    const PingMatrix& pings, const std::optional<StandardizationStats>& stats = std::nullopt);

void apply_standardization(PingMatrix& pings, const StandardizationStats& stats);

struct FormatConfig {
  std::size_t trim_rows = 16;
  float bottom_signature_db = kBottomSignatureDb;
  float nan_fill_db = kNanFillDb;
};

struct FormattedEchogram {
  Echogram echogram;  // trimmed, NaN filled; every ping kept in place
  PingPartition partition;
};

/// trim_rows, then filter_no_bottom on the trimmed data, then replace_nan.
FormattedEchogram format_echogram(const Echogram& raw, const FormatConfig& cfg = {});

/// Per-row z-score of every ping, with stats computed from the `kept` pings
/// unless supplied. Returns the standardized echogram and the stats used.
std::pair<Echogram, StandardizationStats> standardize_echogram(
    const Echogram& e, std::span<const std::size_t> kept,
    const std::optional<StandardizationStats>& stats = std::nullopt);

// ---------------------------------------------------------------------------
// CSV interfaces.

std::string format_stats_csv(const StandardizationStats& s);
void write_stats_csv(const StandardizationStats& s, const std::filesystem::path& path);
StandardizationStats read_stats_csv(const std::filesystem::path& path);

/// ping_index,kept (1/0).
std::string format_partition_csv(const PingPartition& p, std::size_t cols);

void write_bottom_csv(const BottomRecord& b, const std::filesystem::path& path);
BottomRecord read_bottom_csv(const std::filesystem::path& path);
std::string format_bottom_csv(const BottomRecord& b);

std::string_view label_name(PingLabel label) noexcept;
PingLabel parse_label(std::string_view name);
void write_labels_csv(std::span<const PingLabel> labels, const std::filesystem::path& path);
std::vector<PingLabel> read_labels_csv(const std::filesystem::path& path);
std::string format_labels_csv(std::span<const PingLabel> labels);

}  // namespace echoflag
