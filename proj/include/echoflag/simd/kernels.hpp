#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference version and,
// on x86-64, an AVX2/FMA version; the table is chosen once at runtime from
// CPUID and can be forced with ECHOFLAG_SIMD=scalar|avx2.
//
// Echogram kernels sweep the row-major matrix one depth row at a time and
// vectorize across pings, so both variants perform identical float operations
// and produce bit-identical results. The double-precision dot product uses a
// different summation order per variant and agrees only to rounding.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace echoflag::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;

  double (*dot)(const double* a, const double* b, std::size_t n);

  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  /// For pings [c0, c1) of a rows x cols row-major matrix, writes the row r >= 1
  /// maximizing sv[r] - sv[r-1] (first occurrence wins). NaN cells read as nan_fill.
  void (*max_gradient_rows)(const float* sv, std::size_t rows, std::size_t cols,
                            std::size_t c0, std::size_t c1, float nan_fill,
                            std::uint32_t* out_row);

  /// out[c - c0] = 1 iff some cell of ping c is strictly greater than threshold.
  void (*column_exceeds)(const float* sv, std::size_t rows, std::size_t cols,
                         std::size_t c0, std::size_t c1, float threshold,
                         std::uint8_t* out);

  /// Overwrites NaN entries with fill; other values are untouched.
  void (*replace_nan)(float* data, std::size_t n, float fill);
};

bool isa_available(Isa isa) noexcept;
std::string_view isa_name(Isa isa) noexcept;

/// Kernel table for a specific ISA. Throws std::invalid_argument when the CPU
/// (or the build) lacks it.
const KernelTable& kernels_for(Isa isa);

/// Dispatched table, resolved on first use.
const KernelTable& kernels() noexcept;

namespace detail {
extern const KernelTable kScalarKernels;
#if defined(ECHOFLAG_HAVE_AVX2)
extern const KernelTable kAvx2Kernels;
#endif
}  // namespace detail

}  // namespace echoflag::simd
