#pragma once

#include <span>
#include <utility>
#include <vector>

namespace survforest {

/// Right-continuous piecewise-constant curve.
///
/// The value at t is the value attached to the largest knot <= t, or
/// pre_value when t precedes the first knot. Beyond the last knot the last
/// value is held.
class StepFunction {
 public:
  StepFunction() = default;
  /// Throws InvalidArgument unless knots are finite, strictly increasing and
  /// match values in length.
  StepFunction(std::vector<double> knots, std::vector<double> values, double pre_value);

  double operator()(double t) const;

  /// Evaluates the curve on an ascending grid with a single merge pass.
  std::vector<double> sample(std::span<const double> grid) const;

  const std::vector<double>& knots() const& { return knots_; }
  const std::vector<double>& values() const& { return values_; }
  // By value on temporaries, so `for (double v : curve_of(x).values())` is safe.
  std::vector<double> knots() && { return std::move(knots_); }
  std::vector<double> values() && { return std::move(values_); }
  double pre_value() const { return pre_value_; }
  std::size_t size() const { return knots_.size(); }
  bool empty() const { return knots_.empty(); }

  /// Value immediately before t (left limit).
  double left_limit(double t) const;

  friend bool operator==(const StepFunction&, const StepFunction&) = default;

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  double pre_value_ = 0.0;
};

/// Cumulative hazard: starts at 0, non-decreasing, non-negative.
class HazardCurve : public StepFunction {
 public:
  HazardCurve() = default;
  HazardCurve(std::vector<double> knots, std::vector<double> values);

  /// The identically-zero hazard.
  static HazardCurve zero() { return HazardCurve{}; }
};

/// Survival curve: starts at 1, non-increasing, values in [0, 1].
class SurvivalCurve : public StepFunction {
 public:
  SurvivalCurve() : StepFunction({}, {}, 1.0) {}
  SurvivalCurve(std::vector<double> knots, std::vector<double> values);
};

/// Ascending grid with `points` equispaced nodes on [0, upper], both ends included.
std::vector<double> uniform_grid(double upper, std::size_t points);

/// Linear interpolation through (knots, values) with (0, 0) prepended when the
/// first knot is positive. Used for continuous oracle curves sampled on a grid.
double interpolate(const StepFunction& curve, double t);

}  // namespace survforest
