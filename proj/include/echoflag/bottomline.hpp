#pragma once

// Max-gradient bottom detection, weak/strong labeling against the expert
// bottom, and the one-epoch label-threshold sweep.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "echoflag/echogram.hpp"
#include "echoflag/learn/dataset.hpp"
#include "echoflag/learn/model.hpp"

namespace echoflag::bottomline {

inline constexpr double kDefaultThresholdM = 3.31;

struct SweepGrid {
  double lo = 1.00;
  double hi = 5.00;
  double step = 0.01;

  /// lo, lo + step, ... up to hi (inclusive, to 1e-9), rounded to 1e-6 m.
  std::vector<double> points() const;
};

struct LabelingConfig {
  double threshold_m = kDefaultThresholdM;
  SweepGrid sweep{};

  void validate() const;
};

/// Per ping: depth of the row r >= 1 maximizing sv[r] - sv[r-1]; NaN reads as
/// -200 dB and ties go to the shallowest row.
std::vector<double> detect_bottom(const Echogram& e);

/// Weak when |clean - bottom| < threshold, strong otherwise; pings listed in
/// `dropped` (or with an unset depth) are NoBottom.
std::vector<PingLabel> label_pings(const BottomRecord& b, std::span<const std::size_t> dropped,
                                   double threshold_m = kDefaultThresholdM);

struct SweepEntry {
  double threshold_m;
  double accuracy;  // NaN when the candidate could not be trained
};

struct SweepResult {
  double selected_m = 0.0;
  std::vector<SweepEntry> table;
};

/// Builds (train, validation) datasets labeled at a candidate threshold.
using DatasetBuilder = std::function<std::pair<learn::Dataset, learn::Dataset>(double threshold_m)>;

/// Trains `spec` for exactly one epoch from `base.seed` at every grid point and
/// returns the threshold with the best validation accuracy (ties: smallest).
SweepResult select_threshold(const DatasetBuilder& build, const learn::ModelSpec& spec, const LabelingConfig& cfg,
                             learn::TrainConfig base = {});

std::string format_sweep_csv(std::span<const SweepEntry> table);
void write_sweep_csv(std::span<const SweepEntry> table, const std::filesystem::path& path);

}  // namespace echoflag::bottomline
