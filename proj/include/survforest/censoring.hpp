#pragma once

#include <functional>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "survforest/dataset.hpp"
#include "survforest/step_function.hpp"

namespace survforest {

class Forest;
struct ForestConfig;

/// How the conditional censoring distribution G(s | x) is estimated.
enum class CensoringKind { None, GlobalKM, CensorForest, Known };

/// Fitted estimate of G(s | x). Immutable after construction.
class CensoringModel {
 public:
  struct NoCensoring {};
  struct GlobalKM {
    SurvivalCurve curve;  ///< Kaplan-Meier of the censoring times, 1 - G(s)
  };
  struct CensorForest {
    std::shared_ptr<const Forest> forest;  ///< forest grown on flipped indicators
  };
  /// A closed-form law supplied by the caller (simulation oracles). Not persistable.
  struct KnownLaw {
    std::function<double(double, std::span<const double>)> survival;
  };
  using Variant = std::variant<NoCensoring, GlobalKM, CensorForest, KnownLaw>;

  CensoringModel() = default;
  explicit CensoringModel(Variant v);

  CensoringKind kind() const;
  const Variant& variant() const { return model_; }

  /// 1 - G(s | x), before any clamping. Non-increasing in s, in [0, 1].
  double survival_at(double s, std::span<const double> x) const;

  /// True when 1 - G does not depend on x.
  bool covariate_free() const {
    return kind() == CensoringKind::None || kind() == CensoringKind::GlobalKM;
  }

 private:
  Variant model_;
};

/// Kaplan-Meier on (Y_i, 1 - delta_i); ignores covariates.
CensoringModel fit_censoring_km(const Dataset& data);

/// Forest grown with event indicator 1 - delta. The configuration must use the
/// uncorrected marginal rule and Nelson-Aalen terminals.
CensoringModel fit_censoring_forest(const Dataset& data, const ForestConfig& config, std::size_t threads = 1);

/// Free-function form of CensoringModel::survival_at.
inline double censor_survival_at(const CensoringModel& model, double s, std::span<const double> x) {
  return model.survival_at(s, x);
}

/// Censoring survival 1 - G(t_k | X_i) tabulated for every training row i and
/// every distinct training event time t_k, plus the clamp used to turn it
/// into an inverse weight.
class IpcwWeights {
 public:
  IpcwWeights(const Dataset& data, const CensoringModel& model, double epsilon);

  double epsilon() const { return epsilon_; }
  bool covariate_free() const { return covariate_free_; }
  const std::vector<double>& event_times() const { return event_times_; }

  /// Index of `t` in event_times(); t must be a training event time.
  std::size_t time_index(double t) const;

  /// 1 - G(t_k | X_row), unclamped.
  double survival(std::size_t row, std::size_t k) const {
    return covariate_free_ ? survival_[k] : survival_[row * event_times_.size() + k];
  }
  /// 1 / max(epsilon, 1 - G(t_k | X_row)).
  double weight(std::size_t row, std::size_t k) const;

 private:
  double epsilon_;
  bool covariate_free_;
  std::vector<double> event_times_;
  std::vector<double> survival_;  // one shared row, or rows x times
};

}  // namespace survforest
