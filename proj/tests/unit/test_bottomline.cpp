#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "echoflag/bottomline.hpp"
#include "echoflag/error.hpp"
#include "echoflag/rng.hpp"

namespace echoflag::bottomline {
namespace {

constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

TEST(Detect, SingleStepEdge) {
  Echogram e(4, 1, 0.0, 0.2, {-200, -200, -20, -20});
  const auto d = detect_bottom(e);
  ASSERT_EQ(d.size(), 1U);
  EXPECT_DOUBLE_EQ(d[0], 0.4);
}

TEST(Detect, NanReadsAsFloorAndTiesGoShallow) {
  Echogram e(5, 2, 1.0, 0.5, {kNaN, -100, -50, -50, kNaN, -100, -50, -50, -50, -50});
  const auto d = detect_bottom(e);
  // ping 0: -200, -50, -200, -50, -50 -> rows 1 and 3 tie at +150, first wins
  EXPECT_DOUBLE_EQ(d[0], 1.5);
  // ping 1: -100, -50, -100, -50, -50 -> rows 1 and 3 tie at +50
  EXPECT_DOUBLE_EQ(d[1], 1.5);
}

TEST(Detect, SharpLayerAboveBottomWins) {
  // Plankton layer whose top edge (+100 dB) is sharper than the bottom's (+60 dB).
  std::vector<float> col(40, -150.0F);
  for (std::size_t r = 10; r < 14; ++r) col[r] = -50.0F;
  for (std::size_t r = 14; r < 25; ++r) col[r] = -80.0F;
  for (std::size_t r = 25; r < 40; ++r) col[r] = -20.0F;
  Echogram e(40, 1, 0.0, 0.2, col);
  EXPECT_DOUBLE_EQ(detect_bottom(e)[0], 2.0);
}

TEST(Label, ThresholdExamples) {
  BottomRecord b{{100.0, 100.0, 100.0}, {100.0, 103.31, 96.70}};
  const auto l = label_pings(b, {});
  EXPECT_EQ(l[0], PingLabel::WeakCorrection);
  EXPECT_EQ(l[1], PingLabel::StrongCorrection);
  EXPECT_EQ(l[2], PingLabel::WeakCorrection);
}

TEST(Label, DroppedAndUnsetAreNoBottom) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  BottomRecord b{{10.0, nan, 10.0, 10.0}, {10.0, 10.0, nan, 20.0}};
  const std::vector<std::size_t> dropped{3};
  const auto l = label_pings(b, dropped);
  EXPECT_EQ(l[0], PingLabel::WeakCorrection);
  EXPECT_EQ(l[1], PingLabel::NoBottom);
  EXPECT_EQ(l[2], PingLabel::NoBottom);
  EXPECT_EQ(l[3], PingLabel::NoBottom);
  BottomRecord bad{{1.0}, {1.0, 2.0}};
  EXPECT_THROW(label_pings(bad, {}), Error);
}

TEST(SweepGrid, Points) {
  EXPECT_EQ((SweepGrid{3.31, 3.31, 0.01}.points()), (std::vector<double>{3.31}));
  const auto p = SweepGrid{}.points();
  ASSERT_EQ(p.size(), 401U);
  EXPECT_DOUBLE_EQ(p.front(), 1.0);
  EXPECT_DOUBLE_EQ(p.back(), 5.0);
  EXPECT_DOUBLE_EQ(p[231], 3.31);
  EXPECT_TRUE((SweepGrid{2.0, 1.0, 0.1}.points().empty()));
}

// Pings are a separable function of the detection error: strong pings carry
// a bright feature whose position encodes a 2.0 m displacement.
struct Constructed {
  BottomRecord bottom;
  PingMatrix x;
};

Constructed separable_case(std::size_t n, std::uint64_t seed, double displacement = 2.0) {
  Rng rng(seed);
  Constructed c;
  c.x = PingMatrix(n, 8);
  for (std::size_t i = 0; i < n; ++i) {
    const bool strong = rng.bernoulli(0.3);
    const double clean = 20.0 + rng.uniform();
    c.bottom.clean_bottom_m.push_back(clean);
    c.bottom.bottom_m.push_back(strong ? clean - displacement : clean - 0.1 * rng.uniform());
    auto p = c.x.ping(i);
    for (auto& v : p) v = 0.1 * rng.normal();
    p[0] += strong ? 3.0 : -3.0;
  }
  return c;
}

TEST(SelectThreshold, SingletonGrid) {
  const auto c = separable_case(200, 1, 4.0);
  const auto build = [&](double t) {
    const auto labels = label_pings(c.bottom, {}, t);
    learn::Dataset d;
    d.x = c.x;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      d.y.push_back(labels[i] == PingLabel::StrongCorrection ? 1 : 0);
      d.ids.push_back(i);
    }
    return std::pair{d, d};
  };
  LabelingConfig cfg;
  cfg.sweep = {3.31, 3.31, 0.01};
  const auto r = select_threshold(build, learn::SvmSpec{}, cfg);
  EXPECT_DOUBLE_EQ(r.selected_m, 3.31);
  ASSERT_EQ(r.table.size(), 1U);
}

TEST(SelectThreshold, SeparableCasePicksLowestPerfectThreshold) {
  const auto c = separable_case(400, 2);
  const auto build = [&](double t) {
    const auto labels = label_pings(c.bottom, {}, t);
    learn::Dataset d;
    d.x = c.x;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      d.y.push_back(labels[i] == PingLabel::StrongCorrection ? 1 : 0);
      d.ids.push_back(i);
    }
    return std::pair{d, d};
  };
  LabelingConfig cfg;
  cfg.sweep = {1.0, 3.0, 0.5};
  const auto r = select_threshold(build, learn::SvmSpec{}, cfg);
  EXPECT_LE(r.selected_m, 2.0);
  double best = -1.0;
  for (const auto& e : r.table) best = std::max(best, e.accuracy);
  for (const auto& e : r.table)
    if (e.threshold_m == r.selected_m) {
      EXPECT_EQ(e.accuracy, best);
    }
  for (const auto& e : r.table)
    if (e.threshold_m < r.selected_m) {
      EXPECT_LT(e.accuracy, best);
    }
  EXPECT_EQ(format_sweep_csv(r.table).substr(0, 19), "threshold,accuracy\n");
}

TEST(SelectThreshold, EmptyGrid) {
  LabelingConfig cfg;
  cfg.sweep = {2.0, 1.0, 0.1};
  const auto build = [](double) { return std::pair<learn::Dataset, learn::Dataset>{}; };
  try {
    select_threshold(build, learn::SvmSpec{}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySweep);
  }
}

}  // namespace
}  // namespace echoflag::bottomline
