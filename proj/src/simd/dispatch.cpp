#include <cstdlib>
#include <stdexcept>
#include <string>

#include "echoflag/simd/kernels.hpp"

namespace echoflag::simd {

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(ECHOFLAG_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_available(isa)) throw std::invalid_argument("ISA not available: " + std::string(isa_name(isa)));
#if defined(ECHOFLAG_HAVE_AVX2)
  if (isa == Isa::Avx2) return detail::kAvx2Kernels;
#endif
  return detail::kScalarKernels;
}

namespace {

const KernelTable& resolve() noexcept {
  if (const char* forced = std::getenv("ECHOFLAG_SIMD")) {
    const std::string_view want(forced);
    if (want == "scalar") return detail::kScalarKernels;
#if defined(ECHOFLAG_HAVE_AVX2)
    if (want == "avx2" && isa_available(Isa::Avx2)) return detail::kAvx2Kernels;
#endif
  }
#if defined(ECHOFLAG_HAVE_AVX2)
  if (isa_available(Isa::Avx2)) return detail::kAvx2Kernels;
#endif
  return detail::kScalarKernels;
}

}  // namespace

const KernelTable& kernels() noexcept {
  static const KernelTable& table = resolve();
  return table;
}

}  // namespace echoflag::simd
