// AVX2/FMA kernels. Functions carry a target attribute instead of building the
// translation unit with -mavx2 so no AVX2 code leaks into shared inline
// instantiations used on machines without it.

#include "survforest/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#define SURVFOREST_AVX2 __attribute__((target("avx2,fma")))

namespace survforest::simd::detail {

namespace {

SURVFOREST_AVX2 double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

SURVFOREST_AVX2 double horizontal_max(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

SURVFOREST_AVX2 void add_constant(double* acc, double value, std::size_t count) {
  const __m256d v = _mm256_set1_pd(value);
  std::size_t k = 0;
  for (; k + 8 <= count; k += 8) {
    _mm256_storeu_pd(acc + k, _mm256_add_pd(_mm256_loadu_pd(acc + k), v));
    _mm256_storeu_pd(acc + k + 4, _mm256_add_pd(_mm256_loadu_pd(acc + k + 4), v));
  }
  for (; k + 4 <= count; k += 4) _mm256_storeu_pd(acc + k, _mm256_add_pd(_mm256_loadu_pd(acc + k), v));
  for (; k < count; ++k) acc[k] += value;
}

SURVFOREST_AVX2 void add(double* acc, const double* src, std::size_t count) {
  std::size_t k = 0;
  for (; k + 4 <= count; k += 4) {
    _mm256_storeu_pd(acc + k, _mm256_add_pd(_mm256_loadu_pd(acc + k), _mm256_loadu_pd(src + k)));
  }
  for (; k < count; ++k) acc[k] += src[k];
}

SURVFOREST_AVX2 void scale(double* acc, double factor, std::size_t count) {
  const __m256d f = _mm256_set1_pd(factor);
  std::size_t k = 0;
  for (; k + 4 <= count; k += 4) _mm256_storeu_pd(acc + k, _mm256_mul_pd(_mm256_loadu_pd(acc + k), f));
  for (; k < count; ++k) acc[k] *= factor;
}

SURVFOREST_AVX2 LogrankSums logrank_sums(const double* yl, const double* dl, const double* y, const double* d,
                                         std::size_t count) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d oe = _mm256_setzero_pd();
  __m256d var = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= count; k += 4) {
    const __m256d vyl = _mm256_loadu_pd(yl + k);
    const __m256d vdl = _mm256_loadu_pd(dl + k);
    const __m256d vy = _mm256_loadu_pd(y + k);
    const __m256d vd = _mm256_loadu_pd(d + k);
    oe = _mm256_add_pd(oe, _mm256_sub_pd(vdl, _mm256_div_pd(_mm256_mul_pd(vyl, vd), vy)));

    const __m256d mask = _mm256_cmp_pd(vy, one, _CMP_GT_OQ);
    const __m256d vyr = _mm256_sub_pd(vy, vyl);
    const __m256d num = _mm256_mul_pd(_mm256_mul_pd(vyl, vyr), _mm256_mul_pd(vd, _mm256_sub_pd(vy, vd)));
    const __m256d den = _mm256_mul_pd(_mm256_mul_pd(vy, vy), _mm256_sub_pd(vy, one));
    const __m256d term = _mm256_div_pd(num, _mm256_blendv_pd(one, den, mask));
    var = _mm256_add_pd(var, _mm256_and_pd(term, mask));
  }
  LogrankSums sums{horizontal_sum(oe), horizontal_sum(var)};
  for (; k < count; ++k) {
    const double yr = y[k] - yl[k];
    sums.observed_minus_expected += dl[k] - yl[k] * d[k] / y[k];
    if (y[k] > 1.0) sums.variance += yl[k] * yr * d[k] * (y[k] - d[k]) / (y[k] * y[k] * (y[k] - 1.0));
  }
  return sums;
}

// In-register inclusive prefix sum of four lanes.
SURVFOREST_AVX2 __m256d prefix_sum(__m256d v) {
  const __m256d zero = _mm256_setzero_pd();
  // [0, v0, v1, v2]
  v = _mm256_add_pd(v, _mm256_blend_pd(_mm256_permute4x64_pd(v, _MM_SHUFFLE(2, 1, 0, 0)), zero, 0b0001));
  // [0, 0, v0, v1]
  v = _mm256_add_pd(v, _mm256_blend_pd(_mm256_permute4x64_pd(v, _MM_SHUFFLE(1, 0, 0, 0)), zero, 0b0011));
  return v;
}

SURVFOREST_AVX2 double sup_abs_hazard_gap(const double* yl, const double* dl, const double* y, const double* d,
                                          std::size_t count) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d carry = _mm256_setzero_pd();
  __m256d best = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= count; k += 4) {
    const __m256d vyl = _mm256_loadu_pd(yl + k);
    const __m256d vdl = _mm256_loadu_pd(dl + k);
    const __m256d vy = _mm256_loadu_pd(y + k);
    const __m256d vd = _mm256_loadu_pd(d + k);
    const __m256d inc =
        _mm256_sub_pd(_mm256_div_pd(vdl, vyl), _mm256_div_pd(_mm256_sub_pd(vd, vdl), _mm256_sub_pd(vy, vyl)));
    const __m256d running = _mm256_add_pd(prefix_sum(inc), carry);
    best = _mm256_max_pd(best, _mm256_andnot_pd(sign, running));
    carry = _mm256_permute4x64_pd(running, _MM_SHUFFLE(3, 3, 3, 3));
  }
  double cumulative = _mm256_cvtsd_f64(carry);
  double result = horizontal_max(best);
  for (; k < count; ++k) {
    cumulative += dl[k] / yl[k] - (d[k] - dl[k]) / (y[k] - yl[k]);
    const double a = cumulative < 0.0 ? -cumulative : cumulative;
    if (a > result) result = a;
  }
  return result;
}

}  // namespace

const KernelTable kAvx2Table{add_constant, add, scale, logrank_sums, sup_abs_hazard_gap};

}  // namespace survforest::simd::detail

#endif
