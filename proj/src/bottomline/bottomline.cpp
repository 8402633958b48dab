#include "echoflag/bottomline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "echoflag/error.hpp"
#include <fmt/format.h>

#include "echoflag/io.hpp"
#include "echoflag/simd/kernels.hpp"

namespace echoflag::bottomline {

std::vector<double> SweepGrid::points() const {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidConfig, "sweep step must be positive");
  std::vector<double> out;
  if (!(lo <= hi)) return out;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e6) / 1e6);
  return out;
}

void LabelingConfig::validate() const {
  if (!(threshold_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "threshold must be positive");
  if (!(sweep.step > 0.0)) throw Error(ErrorCode::InvalidConfig, "sweep step must be positive");
  if (!(sweep.lo <= sweep.hi)) throw Error(ErrorCode::EmptySweep, "sweep lo exceeds hi");
}

std::vector<double> detect_bottom(const Echogram& e) {
  std::vector<double> out(e.cols(), std::numeric_limits<double>::quiet_NaN());
  if (e.rows() < 2 || e.cols() == 0) return out;
  std::vector<std::uint32_t> rows(e.cols());
  simd::kernels().max_gradient_rows(e.values().data(), e.rows(), e.cols(), 0, e.cols(), kNanFillDb, rows.data());
  for (std::size_t c = 0; c < e.cols(); ++c) out[c] = e.depth(rows[c]);
  return out;
}

std::vector<PingLabel> label_pings(const BottomRecord& b, std::span<const std::size_t> dropped,
                                   double threshold_m) {
  if (b.bottom_m.size() != b.clean_bottom_m.size())
    throw Error(ErrorCode::MisalignedRecords, "bottom and clean bottom differ in length");
  const std::size_t n = b.size();
  std::vector<PingLabel> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(b.clean_bottom_m[i] - b.bottom_m[i]);
    if (std::isnan(d))
      out[i] = PingLabel::NoBottom;
    else
      out[i] = d >= threshold_m ? PingLabel::StrongCorrection : PingLabel::WeakCorrection;
  }
  for (auto i : dropped) {
    if (i >= n) throw Error(ErrorCode::MisalignedRecords, "dropped ping index out of range");
    out[i] = PingLabel::NoBottom;
  }
  return out;
}

SweepResult select_threshold(const DatasetBuilder& build, const learn::ModelSpec& spec, const LabelingConfig& cfg,
                             learn::TrainConfig base) {
  const auto grid = cfg.sweep.points();
  if (grid.empty()) throw Error(ErrorCode::EmptySweep, "threshold sweep grid is empty");
  base.epochs = 1;
  SweepResult result;
  double best = -1.0;
  for (const double t : grid) {
    auto [train_set, val_set] = build(t);
    double acc = std::numeric_limits<double>::quiet_NaN();
    try {
      const auto model = learn::train(spec, train_set, &val_set, base);
      acc = learn::accuracy(learn::predict_proba(model, val_set.x), val_set.y);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingleClassDataset && e.code() != ErrorCode::EmptyTestSet) throw;
    }
    result.table.push_back({t, acc});
    if (acc > best) {
      best = acc;
      result.selected_m = t;
    }
  }
  if (best < 0.0) throw Error(ErrorCode::EmptySweep, "no sweep candidate could be evaluated");
  return result;
}

std::string format_sweep_csv(std::span<const SweepEntry> table) {
  std::string out = "threshold,accuracy\n";
  for (const auto& e : table) out += fmt::format("{}", e.threshold_m) + ',' + io::fixed(e.accuracy, 6) + '\n';
  return out;
}

void write_sweep_csv(std::span<const SweepEntry> table, const std::filesystem::path& path) {
  io::write_text(path, format_sweep_csv(table));
}

}  // namespace echoflag::bottomline
