#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "survforest/dataset.hpp"
#include "survforest/lifetime_law.hpp"
#include "survforest/rng.hpp"

namespace survforest {

/// Motivating and Scenario1 share the d = 3 exponential model; Scenario2 is
/// the d = 10 log-normal model.
enum class ScenarioId { Motivating, Scenario1, Scenario2 };
enum class CensoringType { Dependent, Independent };

struct ScenarioSpec {
  ScenarioId id = ScenarioId::Scenario1;
  CensoringType censoring = CensoringType::Dependent;
  std::size_t n = 400;
  double rho = 0.8;  ///< corr(X1, X2); ignored by Scenario2

  void validate() const;
  std::size_t dim() const { return id == ScenarioId::Scenario2 ? 10 : 3; }
  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

std::string to_string(ScenarioId id);
std::string to_string(CensoringType c);
/// Accepts "motivating", "scenario1", "scenario2" (also "s1", "s2").
ScenarioId parse_scenario_id(const std::string& name);
/// Accepts "dependent" / "independent".
CensoringType parse_censoring_type(const std::string& name);

/// Simulated data with the latent times kept apart from the dataset.
struct GeneratedSample {
  Dataset dataset;
  std::vector<double> failure_times;
  std::vector<double> censoring_times;
};

/// Covariates, failure times and censoring times come from three independent
/// substreams seeded by one draw from `rng`.
GeneratedSample generate(const ScenarioSpec& spec, Rng& rng);

/// One covariate vector from the scenario's covariate law.
std::vector<double> draw_covariates(const ScenarioSpec& spec, Rng& rng);

LifetimeLaw failure_law(const ScenarioSpec& spec, std::span<const double> x);
LifetimeLaw censoring_law(const ScenarioSpec& spec, std::span<const double> x);

/// S(t | x) under the scenario.
double true_survival(const ScenarioSpec& spec, std::span<const double> x, double t);

/// Axis-aligned box; infinite bounds allowed. A point is inside when
/// lower <= x < upper in every coordinate, matching tree routing.
struct Region {
  std::vector<double> lower;
  std::vector<double> upper;

  static Region full(std::size_t dim);
  bool contains(std::span<const double> x) const;
};

/// Per-sample conditional laws of the samples in a node.
struct NodeLaws {
  std::vector<LifetimeLaw> failure;
  std::vector<LifetimeLaw> censoring;
};

/// Laws for the covariate rows (row-major, spec.dim() per row) that lie in
/// `region`; rows outside the region are skipped.
NodeLaws node_oracle_laws(const ScenarioSpec& spec, const Region& region, std::span<const double> covariates);

/// Draws `n` covariate vectors conditioned on the region by rejection and the
/// matching failure / censoring times. Throws InvalidArgument when the region
/// is too unlikely to sample.
GeneratedSample generate_in_region(const ScenarioSpec& spec, const Region& region, std::size_t n, Rng& rng);

}  // namespace survforest
