#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "echoflag/bottomline.hpp"
#include "echoflag/error.hpp"
#include "echoflag/harness.hpp"
#include "echoflag/synthgen.hpp"

namespace echoflag::synthgen {
namespace {

SurveyConfig artifact_free(std::size_t cols, std::uint64_t seed) {
  SurveyConfig c;
  c.cols = cols;
  c.seed = seed;
  c.strong_correction_rate = 0.0;
  c.artifact_mix = {0.0, 0.0, 0.0};
  c.detached_layer_rate = 0.0;
  c.diffuse_layer_rate = 0.0;
  return c;
}

TEST(Generate, Deterministic) {
  SurveyConfig c;
  c.rows = 256;
  c.cols = 1000;
  c.seed = 7;
  const auto a = generate(c);
  const auto b = generate(c);
  // Raw surveys hold NaN padding, so compare encodings rather than values.
  EXPECT_EQ(encode_echogram(a.echogram), encode_echogram(b.echogram));
  EXPECT_EQ(format_bottom_csv(a.bottom), format_bottom_csv(b.bottom));
  EXPECT_EQ(format_truth_csv(a.truth), format_truth_csv(b.truth));
  c.seed = 8;
  EXPECT_NE(encode_echogram(generate(c).echogram), encode_echogram(a.echogram));
}

TEST(Generate, ArtifactFreeBottomIsDetectable) {
  const auto s = generate(artifact_free(3000, 11));
  const auto det = bottomline::detect_bottom(s.echogram);
  std::size_t present = 0, hit = 0;
  for (std::size_t i = 0; i < det.size(); ++i) {
    if (!s.truth.bottom_present[i]) continue;
    ++present;
    if (std::abs(det[i] - s.truth.true_bottom_m[i]) <= s.echogram.depth_step_m() + 1e-9) ++hit;
  }
  ASSERT_GT(present, 2500U);
  EXPECT_GE(static_cast<double>(hit) / static_cast<double>(present), 0.99);
}

TEST(Generate, NoBottomRate) {
  auto c = artifact_free(10000, 3);
  c.no_bottom_rate = 0.10;
  const auto s = generate(c);
  std::size_t absent = 0;
  for (auto p : s.truth.bottom_present) absent += p ? 0 : 1;
  const double frac = static_cast<double>(absent) / 10000.0;
  EXPECT_GE(frac, 0.08);
  EXPECT_LE(frac, 0.12);
}

TEST(Generate, BottomlessPingsAreExactlyTheDroppedOnes) {
  auto c = artifact_free(100, 5);
  c.no_bottom_rate = 0.10;
  const auto s = generate(c);
  const auto part = filter_no_bottom(trim_rows(s.echogram, 16));
  std::vector<std::size_t> absent;
  for (std::size_t i = 0; i < 100; ++i)
    if (!s.truth.bottom_present[i]) absent.push_back(i);
  EXPECT_FALSE(absent.empty());
  EXPECT_EQ(part.dropped, absent);
}

TEST(Generate, StrongLabelsFollowConfiguredRate) {
  auto c = artifact_free(4000, 9);
  c.strong_correction_rate = 0.0;
  auto s = harness::prepare_survey(generate(c).echogram, generate(c).bottom);
  EXPECT_EQ(s.data.positives(), 0U);
}

TEST(DomainPair, RealizedStrongRates) {
  const auto d = harness::prepare_domain_pair(21, 10000, 10000);
  const auto rate = [](const learn::Dataset& x) {
    return static_cast<double>(x.positives()) / static_cast<double>(x.size());
  };
  EXPECT_NEAR(rate(d.a.data), 0.13, 0.2 * 0.13);
  EXPECT_NEAR(rate(d.b.data), 0.01, 0.2 * 0.01);
}

TEST(DomainPair, SymmetricWhenSettingsMatch) {
  DomainPairOptions opts;
  opts.strong_rate_b = opts.strong_rate_a;
  const auto [a, b] = make_domain_pair(4, 4, 3000, 3000, opts);
  const auto hist = [](const Survey& s) {
    std::map<PingLabel, std::size_t> h;
    for (auto l : harness::prepare_survey(s.echogram, s.bottom).labels) ++h[l];
    return h;
  };
  EXPECT_EQ(hist(a), hist(b));
}

TEST(DomainPair, NanOffsetStylesDiffer) {
  const auto [a, b] = make_domain_pair(1, 2, 4000, 4000);
  const auto offsets = [](const Survey& s) {
    std::vector<double> v;
    for (std::size_t i = 0; i < s.truth.nan_start_m.size(); ++i)
      if (!std::isnan(s.truth.nan_start_m[i]) && !std::isnan(s.truth.true_bottom_m[i]))
        v.push_back(s.truth.nan_start_m[i] - s.truth.true_bottom_m[i]);
    return v;
  };
  const auto xa = offsets(a), xb = offsets(b);
  ASSERT_GT(xa.size(), 100U);
  ASSERT_GT(xb.size(), 100U);
  const auto moments = [](const std::vector<double>& v) {
    double m = 0.0, s2 = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) s2 += (x - m) * (x - m);
    return std::pair{m, s2 / static_cast<double>(v.size() - 1)};
  };
  const auto [ma, va] = moments(xa);
  const auto [mb, vb] = moments(xb);
  // Welch t statistic; 2.576 is the two-sided 1% normal quantile.
  const double t = (mb - ma) / std::sqrt(va / static_cast<double>(xa.size()) + vb / static_cast<double>(xb.size()));
  EXPECT_GT(std::abs(t), 2.576);
}

TEST(Config, RoundTripAndErrors) {
  SurveyConfig c;
  c.cols = 1234;
  c.seed = 99;
  c.nan_style = NanStyle::B;
  c.strong_correction_rate = 0.05;
  const auto back = parse_config(format_config(c));
  EXPECT_EQ(format_config(back), format_config(c));
  EXPECT_EQ(back.cols, 1234U);
  EXPECT_EQ(back.nan_style, NanStyle::B);
  EXPECT_EQ(parse_config("# comment\nseed = 5\n").seed, 5U);
  EXPECT_THROW(parse_config("bogus=1\n"), Error);
  EXPECT_THROW(parse_config("nan_style=C\n"), Error);
  EXPECT_THROW(parse_config("strong_correction_rate=2\n").validate(), Error);
}

}  // namespace
}  // namespace echoflag::synthgen
