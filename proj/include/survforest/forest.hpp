#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "survforest/censoring.hpp"
#include "survforest/tree.hpp"

namespace survforest {

struct ForestConfig {
  std::size_t n_trees = 100;
  SplitRule split_rule;
  TerminalEstimator terminal = TerminalEstimator::NelsonAalen;
  StopPolicy stop;
  std::size_t mtry = 0;  ///< 0 selects ceil(sqrt(d))
  AlphaConstraint alpha_constraint;
  TauPolicy tau_policy;
  bool bootstrap = true;
  std::uint64_t seed = 1;
  CensoringKind censoring = CensoringKind::GlobalKM;  ///< used only by corrected configurations
  double ipcw_epsilon = kDefaultIpcwEpsilon;

  /// Throws ConfigError on an out-of-range field; dim = 0 skips the mtry check.
  void validate(std::size_t dim = 0) const;
  std::size_t resolved_mtry(std::size_t dim) const;
  bool needs_censoring_model() const;

  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

/// Execution knobs that never change results.
struct ExecutionOptions {
  std::size_t threads = 0;  ///< 0 = hardware concurrency
};

class Forest {
 public:
  Forest(std::vector<Tree> trees, ForestConfig config, std::shared_ptr<const CensoringModel> censor_model,
         std::size_t dim, double tau, std::vector<double> grid);

  const std::vector<Tree>& trees() const { return trees_; }
  const ForestConfig& config() const { return config_; }
  const CensoringModel& censor_model() const { return *censor_model_; }
  const std::shared_ptr<const CensoringModel>& censor_model_ptr() const { return censor_model_; }
  std::size_t dim() const { return dim_; }
  double tau() const { return tau_; }
  /// Sorted unique training event times <= tau.
  const std::vector<double>& grid() const { return grid_; }

  /// Per-tree training rows (empty for loaded models).
  const std::vector<std::vector<std::size_t>>& in_bag() const { return in_bag_; }
  void set_in_bag(std::vector<std::vector<std::size_t>> rows) { in_bag_ = std::move(rows); }

  /// Tree-level growing parameters implied by the configuration.
  TreeConfig tree_config() const;

  /// Averaged CHF at a single time.
  double chf_at(std::span<const double> x, double t) const;

 private:
  std::vector<Tree> trees_;
  ForestConfig config_;
  std::shared_ptr<const CensoringModel> censor_model_;
  std::size_t dim_;
  double tau_;
  std::vector<double> grid_;
  std::vector<std::vector<std::size_t>> in_bag_;
};

/// Grows config.n_trees trees. Fits the censoring model on the full data when
/// the configuration needs one.
Forest fit_forest(const Dataset& data, const ForestConfig& config, const ExecutionOptions& exec = {});

/// Same, reusing an already fitted censoring model.
Forest fit_forest(const Dataset& data, const ForestConfig& config, std::shared_ptr<const CensoringModel> censor_model,
                  const ExecutionOptions& exec = {});

/// Mean of the per-tree CHFs on `grid`.
HazardCurve predict_chf(const Forest& forest, std::span<const double> x, std::span<const double> grid);
inline HazardCurve predict_chf(const Forest& forest, std::span<const double> x) {
  return predict_chf(forest, x, forest.grid());
}

/// exp(-predict_chf): CHFs are averaged first, then exponentiated.
SurvivalCurve predict_survival(const Forest& forest, std::span<const double> x, std::span<const double> grid);
inline SurvivalCurve predict_survival(const Forest& forest, std::span<const double> x) {
  return predict_survival(forest, x, forest.grid());
}

/// Audits every tree against its in-bag rows (or stored counts when the
/// forest was loaded). Returns the total number of violations.
std::size_t audit_forest(const Forest& forest, const Dataset* training_data = nullptr);

/// Thread count after resolving 0 to the hardware concurrency.
std::size_t resolve_threads(std::size_t requested);

}  // namespace survforest
