#include <algorithm>
#include <cmath>

#include "survforest/kernels.hpp"

namespace survforest::simd::detail {

namespace {

void add_constant(double* acc, double value, std::size_t count) {
  for (std::size_t k = 0; k < count; ++k) acc[k] += value;
}

void add(double* acc, const double* src, std::size_t count) {
  for (std::size_t k = 0; k < count; ++k) acc[k] += src[k];
}

void scale(double* acc, double factor, std::size_t count) {
  for (std::size_t k = 0; k < count; ++k) acc[k] *= factor;
}

LogrankSums logrank_sums(const double* yl, const double* dl, const double* y, const double* d, std::size_t count) {
  LogrankSums sums;
  for (std::size_t k = 0; k < count; ++k) {
    const double yr = y[k] - yl[k];
    sums.observed_minus_expected += dl[k] - yl[k] * d[k] / y[k];
    if (y[k] > 1.0) {
      sums.variance += yl[k] * yr * d[k] * (y[k] - d[k]) / (y[k] * y[k] * (y[k] - 1.0));
    }
  }
  return sums;
}

double sup_abs_hazard_gap(const double* yl, const double* dl, const double* y, const double* d, std::size_t count) {
  double cumulative = 0.0;
  double best = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    cumulative += dl[k] / yl[k] - (d[k] - dl[k]) / (y[k] - yl[k]);
    best = std::max(best, std::abs(cumulative));
  }
  return best;
}

}  // namespace

const KernelTable kScalarTable{add_constant, add, scale, logrank_sums, sup_abs_hazard_gap};

}  // namespace survforest::simd::detail
