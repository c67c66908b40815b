#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "survforest/lifetime_law.hpp"
#include "survforest/step_function.hpp"

namespace survforest {

/// Observed time Y = min(T, C) with its failure indicator.
struct Observation {
  double time;
  bool event;
};

/// One observation together with its covariate vector.
struct SurvivalRecord {
  double time;
  bool event;
  std::vector<double> covariates;
};

/// Default floor applied to 1 - G before inverse weighting.
inline constexpr double kDefaultIpcwEpsilon = 0.05;

/// Nelson-Aalen cumulative hazard. Ties are aggregated at a single knot.
/// Throws InvalidArgument("empty node") on empty input.
HazardCurve nelson_aalen(std::span<const Observation> samples);

/// Kaplan-Meier product-limit survival curve.
SurvivalCurve kaplan_meier(std::span<const Observation> samples);

/// exp(-chf) on the same knots.
SurvivalCurve na_survival(const HazardCurve& chf);

/// Returns 1 - G(s | sample i) (before clamping) for sample index i at time s.
using SampleCensorSurvival = std::function<double(std::size_t sample, double time)>;

/// Inverse-probability-of-censoring weighted Nelson-Aalen estimator.
///
/// Every at-risk and event contribution of sample i at event time s is
/// weighted by 1 / max(epsilon, 1 - G(s | X_i)).
HazardCurve weighted_nelson_aalen(std::span<const Observation> samples, const SampleCensorSurvival& censor_survival,
                                  double epsilon = kDefaultIpcwEpsilon);

/// Same estimator with the censoring survival given as a function of (time, covariates).
HazardCurve weighted_nelson_aalen(std::span<const SurvivalRecord> samples,
                                  const std::function<double(double, std::span<const double>)>& censor_survival,
                                  double epsilon = kDefaultIpcwEpsilon);

/// Censoring-contaminated population CHF
///   int_0^t sum_i [1-G_i(s)] dF_i(s) / sum_i [1-G_i(s)][1-F_i(s)]
/// integrated by the trapezoid rule on `grid` (ascending, starting at or after 0).
/// Knots of the result are the grid points. Test oracle only.
HazardCurve contaminated_chf(std::span<const LifetimeLaw> failure_laws, std::span<const LifetimeLaw> censor_laws,
                             std::span<const double> grid);

/// Mixture CHF  int_0^t sum_i dF_i / sum_i (1 - F_i), i.e. -log of the mean survival.
HazardCurve average_chf(std::span<const LifetimeLaw> failure_laws, std::span<const double> grid);

/// Default oracle quadrature resolution.
inline constexpr std::size_t kOracleGridPoints = 4096;

/// How the comparison horizon tau is chosen from training data.
struct TauPolicy {
  enum class Mode { Quantile, Fixed, MinAtRisk };
  Mode mode = Mode::Quantile;
  double value = 0.9;  ///< q for Quantile, tau for Fixed, r for MinAtRisk

  static TauPolicy quantile(double q) { return {Mode::Quantile, q}; }
  static TauPolicy fixed(double tau) { return {Mode::Fixed, tau}; }
  static TauPolicy min_at_risk(double r) { return {Mode::MinAtRisk, r}; }

  /// Throws InvalidArgument when the parameter is out of range.
  void validate() const;

  /// Quantile: empirical (inverted-CDF) q-quantile of observed times.
  /// MinAtRisk: largest observed time that still has >= r samples at risk.
  double resolve(std::span<const Observation> samples) const;

  friend bool operator==(const TauPolicy&, const TauPolicy&) = default;
};

}  // namespace survforest
