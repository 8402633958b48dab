#include "echoflag/simd/kernels.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace echoflag::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline float fill_nan(float v, float fill) { return std::isnan(v) ? fill : v; }

void max_gradient_rows_scalar(const float* sv, std::size_t rows, std::size_t cols,
                              std::size_t c0, std::size_t c1, float nan_fill,
                              std::uint32_t* out_row) {
  const std::size_t width = c1 - c0;
  if (rows < 2) {
    for (std::size_t j = 0; j < width; ++j) out_row[j] = 0;
    return;
  }
  std::vector<float> best(width, -std::numeric_limits<float>::infinity());
  for (std::size_t j = 0; j < width; ++j) out_row[j] = 1;
  for (std::size_t r = 1; r < rows; ++r) {
    const float* prev = sv + (r - 1) * cols + c0;
    const float* cur = sv + r * cols + c0;
    for (std::size_t j = 0; j < width; ++j) {
      const float g = fill_nan(cur[j], nan_fill) - fill_nan(prev[j], nan_fill);
      if (g > best[j]) {
        best[j] = g;
        out_row[j] = static_cast<std::uint32_t>(r);
      }
    }
  }
}

void column_exceeds_scalar(const float* sv, std::size_t rows, std::size_t cols,
                           std::size_t c0, std::size_t c1, float threshold,
                           std::uint8_t* out) {
  const std::size_t width = c1 - c0;
  for (std::size_t j = 0; j < width; ++j) out[j] = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = sv + r * cols + c0;
    for (std::size_t j = 0; j < width; ++j) out[j] |= static_cast<std::uint8_t>(row[j] > threshold);
  }
}

void replace_nan_scalar(float* data, std::size_t n, float fill) {
  for (std::size_t i = 0; i < n; ++i)
    if (std::isnan(data[i])) data[i] = fill;
}

}  // namespace

namespace detail {
const KernelTable kScalarKernels{
    Isa::Scalar,         dot_scalar, axpy_scalar, max_gradient_rows_scalar, column_exceeds_scalar,
    replace_nan_scalar,
};
}  // namespace detail

}  // namespace echoflag::simd
