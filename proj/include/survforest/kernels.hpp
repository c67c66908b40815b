#pragma once

// Data-parallel inner loops of the split sweep and of forest aggregation.
//
// Every kernel has a scalar reference implementation; AVX2 (x86-64) and NEON
// (aarch64) variants are selected once at runtime. Reductions in the vector
// variants associate differently from the scalar loop, so results agree to
// rounding, not bit for bit. The environment variable SURVFOREST_ISA
// (scalar|avx2|neon) pins the selection.

#include <cstddef>
#include <string_view>

namespace survforest::simd {

enum class Isa { Scalar, Avx2, Neon };

struct LogrankSums {
  double observed_minus_expected = 0.0;
  double variance = 0.0;
};

struct KernelTable {
  // acc[k] += value for k < count.
  void (*add_constant)(double* acc, double value, std::size_t count);
  // acc[k] += src[k] for k < count.
  void (*add)(double* acc, const double* src, std::size_t count);
  // acc[k] *= factor for k < count.
  void (*scale)(double* acc, double factor, std::size_t count);
  // Two-sample log-rank moments over event times k < count. The left child
  // has (at_risk_left, events_left); node totals are (at_risk, events).
  LogrankSums (*logrank_sums)(const double* at_risk_left, const double* events_left, const double* at_risk,
                              const double* events, std::size_t count);
  // max_{k<count} | sum_{j<=k} events_left/at_risk_left - events_right/at_risk_right |
  // with the right child given by totals minus left. Callers guarantee both
  // at-risk sums are positive for every k < count.
  double (*sup_abs_hazard_gap)(const double* at_risk_left, const double* events_left, const double* at_risk,
                               const double* events, std::size_t count);
};

const KernelTable& table(Isa isa);
bool supported(Isa isa);
const KernelTable& active();
Isa active_isa();
std::string_view name(Isa isa);

/// Overrides the runtime choice (tests). Throws InvalidArgument if unsupported.
void force(Isa isa);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2Table;
#endif
#if defined(__aarch64__)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace survforest::simd
