#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "survforest/estimators.hpp"

namespace survforest {

/// Right-censored training data, stored row-major.
///
/// Invariants: every row has `dim()` covariates; times are finite and
/// non-negative. Row order is preserved from ingestion.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t dim, std::vector<std::string> feature_names = {});
  Dataset(std::span<const SurvivalRecord> records, std::vector<std::string> feature_names = {});

  void add(double time, bool event, std::span<const double> covariates);
  void add(const SurvivalRecord& record) { add(record.time, record.event, record.covariates); }

  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  std::size_t dim() const { return dim_; }

  double time(std::size_t i) const { return times_[i]; }
  bool event(std::size_t i) const { return events_[i] != 0; }
  double x(std::size_t i, std::size_t j) const { return covariates_[i * dim_ + j]; }
  std::span<const double> row(std::size_t i) const { return {covariates_.data() + i * dim_, dim_}; }

  Observation observation(std::size_t i) const { return {times_[i], events_[i] != 0}; }
  std::vector<Observation> observations() const;
  SurvivalRecord record(std::size_t i) const;
  std::size_t event_count() const;

  const std::vector<std::string>& feature_names() const { return feature_names_; }

  /// Same rows with the event indicator complemented (censoring as the event).
  Dataset with_flipped_events() const;

  /// Throws InvalidArgument("empty dataset") / DataError when a fit entry point
  /// cannot use the data (no rows or no events).
  void require_fittable() const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> times_;
  std::vector<unsigned char> events_;
  std::vector<double> covariates_;
  std::vector<std::string> feature_names_;
};

}  // namespace survforest
