#include "survforest/censoring.hpp"

#include <algorithm>
#include <cmath>

#include "survforest/error.hpp"
#include "survforest/forest.hpp"

namespace survforest {

CensoringModel::CensoringModel(Variant v) : model_(std::move(v)) {
  if (const auto* f = std::get_if<CensorForest>(&model_); f != nullptr && !f->forest) {
    throw InvalidArgument("censoring forest model without a forest");
  }
  if (const auto* k = std::get_if<KnownLaw>(&model_); k != nullptr && !k->survival) {
    throw InvalidArgument("known censoring law without a survival function");
  }
}

CensoringKind CensoringModel::kind() const {
  switch (model_.index()) {
    case 0: return CensoringKind::None;
    case 1: return CensoringKind::GlobalKM;
    case 2: return CensoringKind::CensorForest;
    default: return CensoringKind::Known;
  }
}

double CensoringModel::survival_at(double s, std::span<const double> x) const {
  if (std::holds_alternative<NoCensoring>(model_)) return 1.0;
  if (const auto* km = std::get_if<GlobalKM>(&model_)) return km->curve(s);
  if (const auto* known = std::get_if<KnownLaw>(&model_)) return known->survival(s, x);
  const auto& forest = *std::get<CensorForest>(model_).forest;
  return std::exp(-forest.chf_at(x, s));
}

CensoringModel fit_censoring_km(const Dataset& data) {
  if (data.empty()) throw InvalidArgument("empty dataset");
  auto obs = data.observations();
  for (auto& o : obs) o.event = !o.event;
  return CensoringModel(CensoringModel::GlobalKM{kaplan_meier(obs)});
}

CensoringModel fit_censoring_forest(const Dataset& data, const ForestConfig& config, std::size_t threads) {
  if (config.split_rule.kind == SplitKind::BiasCorrectedChf || config.terminal != TerminalEstimator::NelsonAalen) {
    throw ConfigError("the censoring forest must use an uncorrected rule and Nelson-Aalen terminals");
  }
  if (data.empty()) throw InvalidArgument("empty dataset");
  // Without any censored observation the censoring survival is identically 1.
  if (data.event_count() == data.size()) return CensoringModel(CensoringModel::GlobalKM{SurvivalCurve()});
  auto forest = std::make_shared<const Forest>(fit_forest(data.with_flipped_events(), config,
                                                          std::make_shared<const CensoringModel>(),
                                                          ExecutionOptions{threads}));
  return CensoringModel(CensoringModel::CensorForest{std::move(forest)});
}

IpcwWeights::IpcwWeights(const Dataset& data, const CensoringModel& model, double epsilon)
    : epsilon_(epsilon), covariate_free_(model.covariate_free()) {
  if (!(epsilon > 0.0) || epsilon > 1.0) throw InvalidArgument("ipcw epsilon must lie in (0, 1]");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.event(i)) event_times_.push_back(data.time(i));
  }
  std::sort(event_times_.begin(), event_times_.end());
  event_times_.erase(std::unique(event_times_.begin(), event_times_.end()), event_times_.end());

  if (covariate_free_) {
    survival_.resize(event_times_.size());
    for (std::size_t k = 0; k < event_times_.size(); ++k) survival_[k] = model.survival_at(event_times_[k], {});
    return;
  }
  survival_.resize(data.size() * event_times_.size());
  if (event_times_.empty()) return;
  if (model.kind() == CensoringKind::Known) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (std::size_t k = 0; k < event_times_.size(); ++k) {
        survival_[i * event_times_.size() + k] = model.survival_at(event_times_[k], data.row(i));
      }
    }
    return;
  }
  const auto& forest = *std::get<CensoringModel::CensorForest>(model.variant()).forest;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto chf = predict_chf(forest, data.row(i), event_times_);
    for (std::size_t k = 0; k < event_times_.size(); ++k) {
      survival_[i * event_times_.size() + k] = std::exp(-chf.values()[k]);
    }
  }
}

std::size_t IpcwWeights::time_index(double t) const {
  const auto it = std::lower_bound(event_times_.begin(), event_times_.end(), t);
  if (it == event_times_.end() || *it != t) throw InvalidArgument("time is not a training event time");
  return static_cast<std::size_t>(it - event_times_.begin());
}

double IpcwWeights::weight(std::size_t row, std::size_t k) const { return 1.0 / std::max(epsilon_, survival(row, k)); }

}  // namespace survforest
