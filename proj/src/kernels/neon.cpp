#include "survforest/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace survforest::simd::detail {

namespace {

void add_constant(double* acc, double value, std::size_t count) {
  const float64x2_t v = vdupq_n_f64(value);
  std::size_t k = 0;
  for (; k + 2 <= count; k += 2) vst1q_f64(acc + k, vaddq_f64(vld1q_f64(acc + k), v));
  for (; k < count; ++k) acc[k] += value;
}

void add(double* acc, const double* src, std::size_t count) {
  std::size_t k = 0;
  for (; k + 2 <= count; k += 2) vst1q_f64(acc + k, vaddq_f64(vld1q_f64(acc + k), vld1q_f64(src + k)));
  for (; k < count; ++k) acc[k] += src[k];
}

void scale(double* acc, double factor, std::size_t count) {
  std::size_t k = 0;
  for (; k + 2 <= count; k += 2) vst1q_f64(acc + k, vmulq_n_f64(vld1q_f64(acc + k), factor));
  for (; k < count; ++k) acc[k] *= factor;
}

LogrankSums logrank_sums(const double* yl, const double* dl, const double* y, const double* d, std::size_t count) {
  const float64x2_t one = vdupq_n_f64(1.0);
  float64x2_t oe = vdupq_n_f64(0.0);
  float64x2_t var = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 2 <= count; k += 2) {
    const float64x2_t vyl = vld1q_f64(yl + k);
    const float64x2_t vdl = vld1q_f64(dl + k);
    const float64x2_t vy = vld1q_f64(y + k);
    const float64x2_t vd = vld1q_f64(d + k);
    oe = vaddq_f64(oe, vsubq_f64(vdl, vdivq_f64(vmulq_f64(vyl, vd), vy)));
    const uint64x2_t mask = vcgtq_f64(vy, one);
    const float64x2_t num = vmulq_f64(vmulq_f64(vyl, vsubq_f64(vy, vyl)), vmulq_f64(vd, vsubq_f64(vy, vd)));
    const float64x2_t den = vmulq_f64(vmulq_f64(vy, vy), vsubq_f64(vy, one));
    const float64x2_t term = vdivq_f64(num, vbslq_f64(mask, den, one));
    var = vaddq_f64(var, vreinterpretq_f64_u64(vandq_u64(vreinterpretq_u64_f64(term), mask)));
  }
  LogrankSums sums{vaddvq_f64(oe), vaddvq_f64(var)};
  for (; k < count; ++k) {
    const double yr = y[k] - yl[k];
    sums.observed_minus_expected += dl[k] - yl[k] * d[k] / y[k];
    if (y[k] > 1.0) sums.variance += yl[k] * yr * d[k] * (y[k] - d[k]) / (y[k] * y[k] * (y[k] - 1.0));
  }
  return sums;
}

double sup_abs_hazard_gap(const double* yl, const double* dl, const double* y, const double* d, std::size_t count) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  float64x2_t carry = zero;
  float64x2_t best = zero;
  std::size_t k = 0;
  for (; k + 2 <= count; k += 2) {
    const float64x2_t vyl = vld1q_f64(yl + k);
    const float64x2_t vdl = vld1q_f64(dl + k);
    const float64x2_t vy = vld1q_f64(y + k);
    const float64x2_t vd = vld1q_f64(d + k);
    float64x2_t inc = vsubq_f64(vdivq_f64(vdl, vyl), vdivq_f64(vsubq_f64(vd, vdl), vsubq_f64(vy, vyl)));
    inc = vaddq_f64(inc, vextq_f64(zero, inc, 1));
    const float64x2_t running = vaddq_f64(inc, carry);
    best = vmaxq_f64(best, vabsq_f64(running));
    carry = vdupq_laneq_f64(running, 1);
  }
  double cumulative = vgetq_lane_f64(carry, 0);
  double result = vmaxvq_f64(best);
  for (; k < count; ++k) {
    cumulative += dl[k] / yl[k] - (d[k] - dl[k]) / (y[k] - yl[k]);
    const double a = cumulative < 0.0 ? -cumulative : cumulative;
    if (a > result) result = a;
  }
  return result;
}

}  // namespace

const KernelTable kNeonTable{add_constant, add, scale, logrank_sums, sup_abs_hazard_gap};

}  // namespace survforest::simd::detail

#endif
