#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "survforest/forest.hpp"
#include "survforest/names.hpp"
#include "survforest/scenarios.hpp"

namespace survforest {

/// Mean over test rows and grid times of (predicted - true survival)^2, times `scale`.
double mse_survival(const Forest& forest, const Dataset& test, const ScenarioSpec& spec, std::span<const double> grid,
                    double scale = 1.0);

/// `points` times at equispaced levels F(tau) * i / points (i = 1..points) of
/// the marginal failure distribution over the given covariate rows.
std::vector<double> marginal_quantile_grid(const ScenarioSpec& spec, const Dataset& covariates, double tau,
                                           std::size_t points = 100);

/// Exact sup_{t<tau} |estimate(t) - truth(t)| for a continuous non-decreasing
/// truth: the step estimate is compared at each of its knots (value and left
/// limit) and at tau.
double sup_gap(const StepFunction& estimate, const std::function<double(double)>& truth, double tau);

// ---- selection frequencies at the root node ----

struct Table1Options {
  SplitKind rule = SplitKind::LogRank;
  std::size_t n = 1000;
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  AlphaConstraint alpha{0.01, 1};
  TauPolicy tau;
  /// Censoring estimator for the bias-corrected rule; unset picks the censoring
  /// forest under covariate-dependent censoring, else global KM.
  std::optional<CensoringKind> censoring;
  double ipcw_epsilon = kDefaultIpcwEpsilon;
  std::size_t threads = 0;
};

struct SelectionFrequencyReport {
  ScenarioSpec spec;
  SplitKind rule = SplitKind::LogRank;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::vector<std::size_t> counts;  ///< per variable
  std::size_t no_split = 0;         ///< replications without an admissible split

  /// counts / (reps - no_split); sums to 1 when any replication split.
  std::vector<double> proportions() const;
};

/// For each replication: generates n samples and records the variable of the
/// best root split over all variables (mtry = d, full cutpoint search).
SelectionFrequencyReport table1_harness(const ScenarioSpec& spec, const Table1Options& options);

// ---- MSE of the four bias-correction configurations ----

/// Splitting rule (first letter) crossed with terminal estimator (second):
/// C = bias corrected, N = not corrected.
enum class Table2Config { CC, CN, NC, NN };
inline constexpr std::array<Table2Config, 4> kTable2Configs{Table2Config::CC, Table2Config::CN, Table2Config::NC,
                                                            Table2Config::NN};
std::string to_string(Table2Config c);

struct Table2Options {
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  std::size_t n_train = 400;
  std::size_t n_test = 800;
  std::size_t n_trees = 100;
  std::size_t grid_points = 100;
  double scale = 1.0;
  double ipcw_epsilon = kDefaultIpcwEpsilon;
  TauPolicy tau;
  /// Splitting rule of the uncorrected (N-*) configurations.
  SplitKind uncorrected_rule = SplitKind::MarginalChf;
  /// Minimum events per node; unset picks 10 for Scenario 1 and 25 for Scenario 2.
  std::optional<std::size_t> min_events;
  /// Censoring estimator for the corrected configurations; unset picks the
  /// censoring forest when censoring depends on covariates, else global KM.
  std::optional<CensoringKind> censoring;
  std::size_t threads = 0;
};

/// Forest settings used for one configuration (seed excluded).
ForestConfig table2_forest_config(const ScenarioSpec& spec, const Table2Options& options, Table2Config config);
CensoringKind table2_censoring_kind(const ScenarioSpec& spec, const Table2Options& options);

struct MseSummary {
  double mean = 0.0;
  double sd = 0.0;  ///< sample standard deviation; 0 for a single replication
};

struct MseReport {
  ScenarioSpec spec;
  Table2Options options;
  CensoringKind censoring = CensoringKind::GlobalKM;
  std::vector<std::array<double, 4>> per_rep;  ///< indexed like kTable2Configs
  std::size_t audit_violations = 0;

  MseSummary summary(Table2Config c) const;
};

MseReport table2_harness(const ScenarioSpec& spec, const Table2Options& options);

// ---- concentration of the node estimator on its contaminated target ----

struct ConcentrationOptions {
  std::vector<std::size_t> n_grid{100, 316, 1000, 3162, 10000};
  std::size_t runs = 100;
  std::uint64_t seed = 1;
  double tau_quantile = 0.8;  ///< of observed times in a large pilot sample from the region
  std::size_t oracle_points = 2048;
  std::size_t threads = 0;
};

struct ConcentrationReport {
  ScenarioSpec spec;
  Region region;
  ConcentrationOptions options;
  double tau = 0.0;
  std::vector<std::vector<double>> gaps;  ///< runs x n_grid

  std::vector<double> mean_gaps() const;
  /// Least-squares slope of log(mean gap) on log(n).
  double slope() const;
  /// Share of runs whose gap at the largest n is below the gap at the smallest n.
  double fraction_decreasing() const;
};

/// For each run and n: draws n samples in the region, and measures
/// sup_{t<tau} |NA(t) - contaminated CHF of those samples' laws (t)|.
ConcentrationReport concentration_harness(const ScenarioSpec& spec, const Region& region,
                                          const ConcentrationOptions& options);

// ---- IPCW estimator with the true censoring law on a two-group node ----

struct IpcwCheckOptions {
  std::size_t n = 5000;
  std::size_t runs = 200;
  std::uint64_t seed = 1;
  std::array<double, 2> failure_rates{1.0, 1.0};
  std::array<double, 2> censoring_rates{0.2, 3.0};
  double tau_quantile = 0.9;
  double epsilon = 1e-3;
  std::size_t threads = 0;
};

struct IpcwCheckReport {
  IpcwCheckOptions options;
  std::vector<double> weighted_gap;    ///< sup distance of the true-G weighted estimator
  std::vector<double> unweighted_gap;  ///< sup distance of plain Nelson-Aalen

  double fraction_weighted_closer() const;
};

/// Samples fall in either group with probability 1/2; the target is the
/// mixture CHF -log(mean of the two failure survivals).
IpcwCheckReport ipcw_node_check(const IpcwCheckOptions& options);

// ---- report rendering ----

std::string to_json(const SelectionFrequencyReport& report);
std::string to_json(std::span<const SelectionFrequencyReport> reports);
std::string to_json(const MseReport& report);
std::string to_json(const ConcentrationReport& report);
std::string to_json(const IpcwCheckReport& report);
/// Rows are censoring types, columns variables, as in a selection-frequency table.
std::string to_text(std::span<const SelectionFrequencyReport> reports);
std::string to_text(const MseReport& report);
std::string to_text(const ConcentrationReport& report);
std::string to_text(const IpcwCheckReport& report);

}  // namespace survforest
