#include "survforest/forest.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <thread>

#include "survforest/error.hpp"
#include "survforest/parallel.hpp"

namespace survforest {

void ForestConfig::validate(std::size_t dim) const {
  if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (dim > 0 && mtry > dim) {
    throw ConfigError("mtry " + std::to_string(mtry) + " exceeds the covariate dimension " + std::to_string(dim));
  }
  if (!(ipcw_epsilon > 0.0) || ipcw_epsilon > 1.0) throw ConfigError("ipcw_epsilon must lie in (0, 1]");
  if (needs_censoring_model() && censoring == CensoringKind::None) {
    throw ConfigError("a bias-corrected rule or terminal estimator needs a censoring model");
  }
  try {
    split_rule.validate();
    stop.validate();
    alpha_constraint.validate();
    tau_policy.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

std::size_t ForestConfig::resolved_mtry(std::size_t dim) const {
  if (mtry > 0) return mtry;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim)))));
}

bool ForestConfig::needs_censoring_model() const {
  return split_rule.kind == SplitKind::BiasCorrectedChf || terminal == TerminalEstimator::WeightedNelsonAalen;
}

Forest::Forest(std::vector<Tree> trees, ForestConfig config, std::shared_ptr<const CensoringModel> censor_model,
               std::size_t dim, double tau, std::vector<double> grid)
    : trees_(std::move(trees)),
      config_(std::move(config)),
      censor_model_(censor_model ? std::move(censor_model) : std::make_shared<const CensoringModel>()),
      dim_(dim),
      tau_(tau),
      grid_(std::move(grid)) {
  if (trees_.empty()) throw InvalidArgument("a forest needs at least one tree");
  if (!std::is_sorted(grid_.begin(), grid_.end()) ||
      std::adjacent_find(grid_.begin(), grid_.end()) != grid_.end()) {
    throw InvalidArgument("forest grid must be strictly increasing");
  }
}

TreeConfig Forest::tree_config() const {
  return {config_.split_rule, config_.resolved_mtry(dim_), config_.alpha_constraint, config_.stop, config_.terminal,
          tau_};
}

double Forest::chf_at(std::span<const double> x, double t) const {
  if (x.size() != dim_) throw DimensionMismatch("expected " + std::to_string(dim_) + " covariates, got " + std::to_string(x.size()));
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.chf(x)(t);
  return sum / static_cast<double>(trees_.size());
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

Forest fit_forest(const Dataset& data, const ForestConfig& config, const ExecutionOptions& exec) {
  config.validate(data.dim());
  data.require_fittable();
  std::shared_ptr<const CensoringModel> censor_model;
  if (config.needs_censoring_model()) {
    if (config.censoring == CensoringKind::Known) {
      throw ConfigError("a known censoring law must be passed to fit_forest explicitly");
    }
    if (config.censoring == CensoringKind::GlobalKM) {
      censor_model = std::make_shared<const CensoringModel>(fit_censoring_km(data));
    } else {
      ForestConfig censor_config = config;
      censor_config.split_rule = SplitRule{};
      censor_config.terminal = TerminalEstimator::NelsonAalen;
      censor_config.censoring = CensoringKind::None;
      censor_config.seed = derive_seed(config.seed, {stream::kCensorForest});
      censor_model = std::make_shared<const CensoringModel>(fit_censoring_forest(data, censor_config, exec.threads));
    }
  }
  return fit_forest(data, config, std::move(censor_model), exec);
}

Forest fit_forest(const Dataset& data, const ForestConfig& config, std::shared_ptr<const CensoringModel> censor_model,
                  const ExecutionOptions& exec) {
  config.validate(data.dim());
  data.require_fittable();
  // An uncorrected configuration never consults G, so none is stored with it.
  if (!censor_model || !config.needs_censoring_model()) censor_model = std::make_shared<const CensoringModel>();
  if (config.needs_censoring_model() && censor_model->kind() == CensoringKind::None) {
    throw ConfigError("a bias-corrected configuration was given no censoring model");
  }

  const auto obs = data.observations();
  const double tau = config.tau_policy.resolve(obs);
  std::vector<double> grid;
  for (const auto& o : obs) {
    if (o.event && o.time <= tau) grid.push_back(o.time);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::optional<IpcwWeights> weights;
  if (config.needs_censoring_model()) weights.emplace(data, *censor_model, config.ipcw_epsilon);

  const TreeConfig tree_config{config.split_rule, config.resolved_mtry(data.dim()), config.alpha_constraint,
                               config.stop,       config.terminal,                  tau};
  const std::size_t n = data.size();
  std::vector<Tree> trees(config.n_trees);
  std::vector<std::vector<std::size_t>> in_bag(config.n_trees);
  parallel_for(config.n_trees, resolve_threads(exec.threads), [&](std::size_t b) {
    Rng rng = make_rng(config.seed, {stream::kTree, b});
    std::vector<std::size_t> rows(n);
    if (config.bootstrap) {
      for (auto& r : rows) r = uniform_index(rng, n);
    } else {
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    }
    trees[b] = grow_tree(NodeSamples{data, rows}, tree_config, weights ? &*weights : nullptr, rng);
    in_bag[b] = std::move(rows);
  });

  Forest forest(std::move(trees), config, std::move(censor_model), data.dim(), tau, std::move(grid));
  forest.set_in_bag(std::move(in_bag));
  return forest;
}

HazardCurve predict_chf(const Forest& forest, std::span<const double> x, std::span<const double> grid) {
  if (x.size() != forest.dim()) {
    throw DimensionMismatch("expected " + std::to_string(forest.dim()) + " covariates, got " + std::to_string(x.size()));
  }
  std::vector<double> sum(grid.size(), 0.0);
  for (const auto& tree : forest.trees()) {
    const auto values = tree.chf(x).sample(grid);
    for (std::size_t k = 0; k < grid.size(); ++k) sum[k] += values[k];
  }
  const auto count = static_cast<double>(forest.trees().size());
  for (auto& v : sum) v /= count;
  return HazardCurve(std::vector<double>(grid.begin(), grid.end()), std::move(sum));
}

SurvivalCurve predict_survival(const Forest& forest, std::span<const double> x, std::span<const double> grid) {
  return na_survival(predict_chf(forest, x, grid));
}

std::size_t audit_forest(const Forest& forest, const Dataset* training_data) {
  const TreeConfig config = forest.tree_config();
  const bool with_rows = training_data != nullptr && forest.in_bag().size() == forest.trees().size();
  std::size_t violations = 0;
  for (std::size_t b = 0; b < forest.trees().size(); ++b) {
    const auto& tree = forest.trees()[b];
    violations += with_rows ? audit_tree(tree, NodeSamples{*training_data, forest.in_bag()[b]}, config).size()
                            : audit_tree(tree, config, forest.dim()).size();
  }
  return violations;
}

}  // namespace survforest
