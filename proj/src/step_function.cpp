#include "survforest/step_function.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "survforest/error.hpp"

namespace survforest {

StepFunction::StepFunction(std::vector<double> knots, std::vector<double> values, double pre_value)
    : knots_(std::move(knots)), values_(std::move(values)), pre_value_(pre_value) {
  if (knots_.size() != values_.size()) {
    throw InvalidArgument("step function: knots and values differ in length");
  }
  if (!std::isfinite(pre_value_)) {
    throw InvalidArgument("step function: non-finite pre_value");
  }
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i]) || !std::isfinite(values_[i])) {
      throw InvalidArgument("step function: non-finite knot or value at index " + std::to_string(i));
    }
    if (i > 0 && !(knots_[i - 1] < knots_[i])) {
      throw InvalidArgument("step function: knots not strictly increasing at index " + std::to_string(i));
    }
  }
}

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  if (it == knots_.begin()) return pre_value_;
  return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
  auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
  if (it == knots_.begin()) return pre_value_;
  return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

std::vector<double> StepFunction::sample(std::span<const double> grid) const {
  std::vector<double> out(grid.size());
  std::size_t k = 0;
  double current = pre_value_;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (g > 0 && grid[g] < grid[g - 1]) {
      throw InvalidArgument("step function: sampling grid must be ascending");
    }
    while (k < knots_.size() && knots_[k] <= grid[g]) {
      current = values_[k];
      ++k;
    }
    out[g] = current;
  }
  return out;
}

HazardCurve::HazardCurve(std::vector<double> knots, std::vector<double> values)
    : StepFunction(std::move(knots), std::move(values), 0.0) {
  double prev = 0.0;
  for (double v : this->values()) {
    if (v < prev) throw InvalidArgument("hazard curve: values must be non-negative and non-decreasing");
    prev = v;
  }
}

SurvivalCurve::SurvivalCurve(std::vector<double> knots, std::vector<double> values)
    : StepFunction(std::move(knots), std::move(values), 1.0) {
  double prev = 1.0;
  for (double v : this->values()) {
    if (v > prev || v < 0.0) throw InvalidArgument("survival curve: values must lie in [0,1] and be non-increasing");
    prev = v;
  }
}

std::vector<double> uniform_grid(double upper, std::size_t points) {
  if (points < 2 || !(upper > 0.0) || !std::isfinite(upper)) {
    throw InvalidArgument("uniform grid needs >= 2 points and a finite positive upper bound");
  }
  std::vector<double> grid(points);
  const double step = upper / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = step * static_cast<double>(i);
  grid.back() = upper;
  return grid;
}

double interpolate(const StepFunction& curve, double t) {
  const auto& x = curve.knots();
  const auto& y = curve.values();
  if (x.empty()) return curve.pre_value();
  if (t <= x.front()) {
    if (x.front() <= 0.0) return y.front();
    return y.front() * std::max(t, 0.0) / x.front();
  }
  if (t >= x.back()) return y.back();
  auto it = std::upper_bound(x.begin(), x.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - x.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - x[lo]) / (x[hi] - x[lo]);
  return y[lo] + w * (y[hi] - y[lo]);
}

}  // namespace survforest
