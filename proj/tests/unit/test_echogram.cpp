#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "echoflag/echogram.hpp"
#include "echoflag/error.hpp"
#include "echoflag/io.hpp"
#include "support.hpp"

namespace echoflag {
namespace {

constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

Echogram ramp(std::size_t rows, std::size_t cols) {
  std::vector<float> sv(rows * cols);
  for (std::size_t i = 0; i < sv.size(); ++i) sv[i] = -100.0F + static_cast<float>(i % 97);
  return Echogram(rows, cols, 0.0, 0.2, std::move(sv));
}

TEST(Codec, RoundTripIsByteIdentical) {
  testing::TempDir dir;
  const auto e = ramp(7, 5);
  save_echogram(e, dir / "a.echg");
  const auto back = load_echogram(dir / "a.echg");
  EXPECT_EQ(back.rows(), 7U);
  EXPECT_EQ(back.cols(), 5U);
  save_echogram(back, dir / "b.echg");
  EXPECT_EQ(io::read_bytes(dir / "a.echg"), io::read_bytes(dir / "b.echg"));
}

TEST(Codec, HeaderEcho) {
  io::ByteWriter w;
  w.raw("ECHG");
  w.u32(kEchogramFormatVersion);
  w.u32(3);
  w.u32(2);
  w.f64(0.2);
  w.f64(1.5);
  for (int i = 0; i < 6; ++i) w.f32(static_cast<float>(i));
  const auto e = decode_echogram(w.bytes());
  EXPECT_EQ(e.rows(), 3U);
  EXPECT_EQ(e.cols(), 2U);
  EXPECT_DOUBLE_EQ(e.depth_step_m(), 0.2);
  EXPECT_DOUBLE_EQ(e.depth_origin_m(), 1.5);
  EXPECT_EQ(e.at(2, 1), 5.0F);
  EXPECT_EQ(encode_echogram(e), w.bytes());
}

TEST(Codec, TruncatedPayload) {
  io::ByteWriter w;
  w.raw("ECHG");
  w.u32(kEchogramFormatVersion);
  w.u32(3);
  w.u32(2);
  w.f64(0.2);
  w.f64(0.0);
  for (int i = 0; i < 5; ++i) w.f32(0.0F);
  try {
    decode_echogram(w.bytes());
    FAIL() << "expected TruncatedPayload";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncatedPayload);
  }
}

TEST(Codec, BadMagic) {
  const std::vector<std::uint8_t> bytes{'N', 'O', 'P', 'E', 0, 0, 0, 0};
  try {
    decode_echogram(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadMagic);
  }
}

TEST(Trim, KeepsPhysicalDepth) {
  EXPECT_EQ(trim_rows(ramp(2581, 2), 31).rows(), 2550U);
  EXPECT_EQ(trim_rows(ramp(2567, 2), 17).rows(), 2550U);
  const auto e = ramp(10, 3);
  const auto t = trim_rows(e, 4);
  EXPECT_DOUBLE_EQ(t.depth(0), e.depth(4));
  EXPECT_EQ(t.at(0, 1), e.at(4, 1));
  EXPECT_EQ(trim_rows(e, 0), e);
  EXPECT_THROW(trim_rows(e, 10), Error);
}

TEST(FilterNoBottom, ThresholdIsStrict) {
  // ping 0 all -90, ping 1 one -20 cell, ping 2 exactly at the threshold
  Echogram e(3, 3, 0.0, 0.2, {-90, -90, -90, -90, -20, kBottomSignatureDb, -90, -90, -90});
  const auto p = filter_no_bottom(e);
  EXPECT_EQ(p.kept, (std::vector<std::size_t>{1}));
  EXPECT_EQ(p.dropped, (std::vector<std::size_t>{0, 2}));
}

TEST(ReplaceNan, Fill) {
  Echogram e(1, 2, 0.0, 0.2, {kNaN, -50});
  const auto r = replace_nan(e);
  EXPECT_EQ(r.at(0, 0), -200.0F);
  EXPECT_EQ(r.at(0, 1), -50.0F);
  const auto clean = ramp(4, 4);
  EXPECT_EQ(replace_nan(clean), clean);
  Echogram col(3, 1, 0.0, 0.2, {kNaN, kNaN, kNaN});
  const auto filled = replace_nan(col);
  for (float v : filled.values()) EXPECT_EQ(v, -200.0F);
}

TEST(Standardize, PopulationConvention) {
  PingMatrix m(2, 2);
  m.values = {0, 2, 2, 0};
  const auto [z, s] = standardize(m);
  EXPECT_EQ(z.values, (std::vector<double>{-1, 1, 1, -1}));
  EXPECT_EQ(s.mean, (std::vector<double>{1, 1}));
  EXPECT_EQ(s.stddev, (std::vector<double>{1, 1}));
}

TEST(Standardize, ConstantRow) {
  PingMatrix m(3, 1);
  m.values = {5, 5, 5};
  const auto [z, s] = standardize(m);
  EXPECT_EQ(z.values, (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(s.stddev[0], 1.0);
}

TEST(Standardize, ReusedStatsMatchSinglePass) {
  PingMatrix m(4, 3);
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = std::sin(static_cast<double>(i));
  const auto [z1, s1] = standardize(m);
  const auto [z2, s2] = standardize(m, s1);
  EXPECT_EQ(z1, z2);
  EXPECT_EQ(s1, s2);
  PingMatrix bad(1, 2);
  EXPECT_THROW(apply_standardization(bad, s1), Error);
}

TEST(FormatEchogram, ComposesPipeline) {
  auto raw = ramp(30, 6);
  raw.at(20, 2) = kNaN;
  for (std::size_t r = 0; r < 30; ++r) raw.at(r, 4) = -90.0F;
  const auto f = format_echogram(raw, {.trim_rows = 5});
  EXPECT_EQ(f.echogram, replace_nan(trim_rows(raw, 5)));
  EXPECT_EQ(f.partition.dropped, filter_no_bottom(trim_rows(raw, 5)).dropped);
  EXPECT_EQ(f.partition.dropped, (std::vector<std::size_t>{4}));
}

TEST(FormatEchogram, StandardizeUsesKeptPings) {
  const auto e = ramp(4, 5);
  const std::vector<std::size_t> kept{0, 1, 3};
  const auto [z, stats] = standardize_echogram(e, kept);
  EXPECT_EQ(stats, compute_standardization(extract_pings(e, kept)));
  for (std::size_t r = 0; r < 4; ++r)
    EXPECT_FLOAT_EQ(z.at(r, 2), static_cast<float>((e.at(r, 2) - stats.mean[r]) / stats.stddev[r]));
}

TEST(Csv, BottomRoundTrip) {
  testing::TempDir dir;
  BottomRecord b{{1.5, std::nan(""), 3.25}, {1.0, 2.0, std::nan("")}};
  write_bottom_csv(b, dir / "b.csv");
  const auto back = read_bottom_csv(dir / "b.csv");
  ASSERT_EQ(back.size(), 3U);
  EXPECT_EQ(back.bottom_m[0], 1.5);
  EXPECT_TRUE(std::isnan(back.bottom_m[1]));
  EXPECT_TRUE(std::isnan(back.clean_bottom_m[2]));
}

TEST(Csv, LabelsAndStatsRoundTrip) {
  testing::TempDir dir;
  const std::vector<PingLabel> labels{PingLabel::NoBottom, PingLabel::StrongCorrection, PingLabel::WeakCorrection};
  write_labels_csv(labels, dir / "l.csv");
  EXPECT_EQ(read_labels_csv(dir / "l.csv"), labels);
  StandardizationStats s{{-80.5, -70.25}, {3.5, 1.0}};
  write_stats_csv(s, dir / "s.csv");
  EXPECT_EQ(read_stats_csv(dir / "s.csv"), s);
}

TEST(Csv, MalformedBottom) {
  testing::TempDir dir;
  io::write_text(dir / "b.csv", "ping_index,bottom_m,clean_bottom_m\n1,2,3\n");
  EXPECT_THROW(read_bottom_csv(dir / "b.csv"), Error);
  io::write_text(dir / "c.csv", "nope\n");
  EXPECT_THROW(read_bottom_csv(dir / "c.csv"), Error);
}

}  // namespace
}  // namespace echoflag
