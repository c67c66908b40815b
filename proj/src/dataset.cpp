#include "survforest/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "survforest/error.hpp"

namespace survforest {

Dataset::Dataset(std::size_t dim, std::vector<std::string> feature_names)
    : dim_(dim), feature_names_(std::move(feature_names)) {
  if (!feature_names_.empty() && feature_names_.size() != dim_) {
    throw InvalidArgument("feature name count does not match dimension");
  }
}

Dataset::Dataset(std::span<const SurvivalRecord> records, std::vector<std::string> feature_names)
    : Dataset(records.empty() ? feature_names.size() : records.front().covariates.size(), std::move(feature_names)) {
  for (const auto& r : records) add(r);
}

void Dataset::add(double time, bool event, std::span<const double> covariates) {
  if (covariates.size() != dim_) {
    throw DimensionMismatch("record has " + std::to_string(covariates.size()) + " covariates, dataset dimension is " +
                            std::to_string(dim_));
  }
  if (!std::isfinite(time) || time < 0.0) throw InvalidArgument("observed time must be finite and non-negative");
  times_.push_back(time);
  events_.push_back(event ? 1 : 0);
  covariates_.insert(covariates_.end(), covariates.begin(), covariates.end());
}

std::vector<Observation> Dataset::observations() const {
  std::vector<Observation> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = observation(i);
  return out;
}

SurvivalRecord Dataset::record(std::size_t i) const {
  const auto r = row(i);
  return {times_[i], events_[i] != 0, std::vector<double>(r.begin(), r.end())};
}

std::size_t Dataset::event_count() const {
  return static_cast<std::size_t>(std::count(events_.begin(), events_.end(), 1));
}

Dataset Dataset::with_flipped_events() const {
  Dataset flipped = *this;
  for (auto& e : flipped.events_) e = e ? 0 : 1;
  return flipped;
}

void Dataset::require_fittable() const {
  if (empty()) throw InvalidArgument("empty dataset");
  if (dim_ == 0) throw InvalidArgument("dataset has no covariates");
  if (event_count() == 0) throw DataError("dataset has no observed events");
}

}  // namespace survforest
