#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "echoflag/rng.hpp"
#include "echoflag/simd/kernels.hpp"

namespace echoflag::simd {
namespace {

// Every available table against the scalar reference.
class KernelEquivalence : public ::testing::TestWithParam<Isa> {
 protected:
  void SetUp() override {
    if (!isa_available(GetParam())) GTEST_SKIP() << isa_name(GetParam()) << " not available";
  }
  const KernelTable& ref() const { return kernels_for(Isa::Scalar); }
  const KernelTable& alt() const { return kernels_for(GetParam()); }
};

std::vector<float> noisy_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> sv(rows * cols);
  for (auto& v : sv) {
    const double u = rng.uniform();
    v = u < 0.05 ? std::numeric_limits<float>::quiet_NaN() : static_cast<float>(rng.uniform(-160.0, -10.0));
  }
  // Ties: repeat a column pattern so several rows share the max gradient.
  for (std::size_t r = 0; r < rows; ++r) sv[r * cols] = (r % 2 == 0) ? -100.0F : -50.0F;
  return sv;
}

TEST_P(KernelEquivalence, MaxGradientRowsBitIdentical) {
  for (std::size_t cols : {1U, 7U, 8U, 9U, 33U, 257U}) {
    const std::size_t rows = 40;
    const auto sv = noisy_matrix(rows, cols, cols);
    std::vector<std::uint32_t> a(cols), b(cols);
    ref().max_gradient_rows(sv.data(), rows, cols, 0, cols, -200.0F, a.data());
    alt().max_gradient_rows(sv.data(), rows, cols, 0, cols, -200.0F, b.data());
    EXPECT_EQ(a, b) << "cols=" << cols;
    if (cols > 3) {
      std::vector<std::uint32_t> part(cols - 3);
      alt().max_gradient_rows(sv.data(), rows, cols, 3, cols, -200.0F, part.data());
      EXPECT_TRUE(std::equal(part.begin(), part.end(), a.begin() + 3));
    }
  }
}

TEST_P(KernelEquivalence, ColumnExceedsBitIdentical) {
  for (std::size_t cols : {1U, 8U, 15U, 64U, 100U}) {
    const auto sv = noisy_matrix(12, cols, 100 + cols);
    std::vector<std::uint8_t> a(cols), b(cols);
    ref().column_exceeds(sv.data(), 12, cols, 0, cols, -32.0F, a.data());
    alt().column_exceeds(sv.data(), 12, cols, 0, cols, -32.0F, b.data());
    EXPECT_EQ(a, b);
  }
}

TEST_P(KernelEquivalence, ReplaceNanBitIdentical) {
  for (std::size_t n : {0U, 1U, 7U, 8U, 31U, 1000U}) {
    auto a = noisy_matrix(1, n == 0 ? 1 : n, n);
    a.resize(n);
    auto b = a;
    ref().replace_nan(a.data(), n, -200.0F);
    alt().replace_nan(b.data(), n, -200.0F);
    EXPECT_EQ(0, std::memcmp(a.data(), b.data(), n * sizeof(float)));
    for (float v : b) EXPECT_FALSE(std::isnan(v));
  }
}

TEST_P(KernelEquivalence, DotAndAxpyWithinRounding) {
  Rng rng(5);
  for (std::size_t n : {0U, 1U, 3U, 4U, 5U, 17U, 1001U}) {
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(x[i] * y[i]);
    EXPECT_NEAR(ref().dot(x.data(), y.data(), n), alt().dot(x.data(), y.data(), n), 1e-13 * (mag + 1.0));
    auto y1 = y, y2 = y;
    ref().axpy(0.37, x.data(), y1.data(), n);
    alt().axpy(0.37, x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-15 * (std::abs(y1[i]) + 1.0));
  }
}

INSTANTIATE_TEST_SUITE_P(AllIsas, KernelEquivalence, ::testing::Values(Isa::Scalar, Isa::Avx2),
                         [](const auto& info) { return std::string(isa_name(info.param)); });

TEST(Dispatch, ResolvesToAnAvailableIsa) {
  EXPECT_TRUE(isa_available(kernels().isa));
  EXPECT_TRUE(isa_available(Isa::Scalar));
}

}  // namespace
}  // namespace echoflag::simd
