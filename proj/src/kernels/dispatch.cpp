#include <atomic>
#include <cstdlib>
#include <string>

#include "survforest/error.hpp"
#include "survforest/kernels.hpp"

namespace survforest::simd {

bool supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) throw InvalidArgument("instruction set not supported on this machine: " + std::string(name(isa)));
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::Avx2:
      return detail::kAvx2Table;
#endif
#if defined(__aarch64__)
    case Isa::Neon:
      return detail::kNeonTable;
#endif
    default:
      return detail::kScalarTable;
  }
}

std::string_view name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "unknown";
}

namespace {

Isa detect() {
  if (const char* env = std::getenv("SURVFOREST_ISA")) {
    const std::string_view requested(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
      if (requested == name(isa) && supported(isa)) return isa;
    }
  }
  if (supported(Isa::Avx2)) return Isa::Avx2;
  if (supported(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

std::atomic<Isa>& selected() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

Isa active_isa() { return selected().load(std::memory_order_relaxed); }

const KernelTable& active() { return table(active_isa()); }

void force(Isa isa) {
  if (!supported(isa)) throw InvalidArgument("instruction set not supported on this machine: " + std::string(name(isa)));
  selected().store(isa, std::memory_order_relaxed);
}

}  // namespace survforest::simd
