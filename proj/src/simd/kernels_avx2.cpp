// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include "echoflag/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace echoflag::simd {
namespace {

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  const __m128d lo = _mm256_castpd256_pd128(acc0);
  const __m128d hi = _mm256_extractf128_pd(acc0, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

inline __m256 fill_nan8(__m256 v, __m256 fill) {
  return _mm256_blendv_ps(v, fill, _mm256_cmp_ps(v, v, _CMP_UNORD_Q));
}

inline float fill_nan1(float v, float fill) { return std::isnan(v) ? fill : v; }

void max_gradient_rows_avx2(const float* sv, std::size_t rows, std::size_t cols,
                            std::size_t c0, std::size_t c1, float nan_fill,
                            std::uint32_t* out_row) {
  const std::size_t width = c1 - c0;
  if (rows < 2) {
    for (std::size_t j = 0; j < width; ++j) out_row[j] = 0;
    return;
  }
  const __m256 fill = _mm256_set1_ps(nan_fill);
  std::size_t j = 0;
  for (; j + 8 <= width; j += 8) {
    const float* base = sv + c0 + j;
    __m256 best = _mm256_set1_ps(-std::numeric_limits<float>::infinity());
    __m256i best_row = _mm256_set1_epi32(1);
    __m256 prev = fill_nan8(_mm256_loadu_ps(base), fill);
    for (std::size_t r = 1; r < rows; ++r) {
      const __m256 cur = fill_nan8(_mm256_loadu_ps(base + r * cols), fill);
      const __m256 g = _mm256_sub_ps(cur, prev);
      const __m256 better = _mm256_cmp_ps(g, best, _CMP_GT_OQ);
      best = _mm256_blendv_ps(best, g, better);
      best_row = _mm256_blendv_epi8(best_row, _mm256_set1_epi32(static_cast<int>(r)),
                                    _mm256_castps_si256(better));
      prev = cur;
    }
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out_row + j), best_row);
  }
  for (; j < width; ++j) {
    float best = -std::numeric_limits<float>::infinity();
    std::uint32_t best_row = 1;
    float prev = fill_nan1(sv[c0 + j], nan_fill);
    for (std::size_t r = 1; r < rows; ++r) {
      const float cur = fill_nan1(sv[r * cols + c0 + j], nan_fill);
      const float g = cur - prev;
      if (g > best) {
        best = g;
        best_row = static_cast<std::uint32_t>(r);
      }
      prev = cur;
    }
    out_row[j] = best_row;
  }
}

void column_exceeds_avx2(const float* sv, std::size_t rows, std::size_t cols, std::size_t c0,
                         std::size_t c1, float threshold, std::uint8_t* out) {
  const std::size_t width = c1 - c0;
  const __m256 thr = _mm256_set1_ps(threshold);
  std::size_t j = 0;
  for (; j + 8 <= width; j += 8) {
    const float* base = sv + c0 + j;
    __m256 any = _mm256_setzero_ps();
    for (std::size_t r = 0; r < rows; ++r)
      any = _mm256_or_ps(any, _mm256_cmp_ps(_mm256_loadu_ps(base + r * cols), thr, _CMP_GT_OQ));
    const int mask = _mm256_movemask_ps(any);
    for (int k = 0; k < 8; ++k) out[j + k] = static_cast<std::uint8_t>((mask >> k) & 1);
  }
  for (; j < width; ++j) {
    std::uint8_t any = 0;
    for (std::size_t r = 0; r < rows; ++r) any |= static_cast<std::uint8_t>(sv[r * cols + c0 + j] > threshold);
    out[j] = any;
  }
}

void replace_nan_avx2(float* data, std::size_t n, float fill) {
  const __m256 vf = _mm256_set1_ps(fill);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(data + i, fill_nan8(_mm256_loadu_ps(data + i), vf));
  for (; i < n; ++i)
    if (std::isnan(data[i])) data[i] = fill;
}

}  // namespace

namespace detail {
const KernelTable kAvx2Kernels{
    Isa::Avx2, dot_avx2, axpy_avx2, max_gradient_rows_avx2, column_exceeds_avx2, replace_nan_avx2,
};
}  // namespace detail

}  // namespace echoflag::simd
