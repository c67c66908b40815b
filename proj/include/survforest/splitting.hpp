#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "survforest/dataset.hpp"
#include "survforest/rng.hpp"

namespace survforest {

class CensoringModel;
class IpcwWeights;

/// Statistic maximized when choosing a split.
enum class SplitKind {
  LogRank,           ///< squared standardized two-sample log-rank statistic
  Random,            ///< uniform variable, uniform admissible cutpoint
  MarginalChf,       ///< sup_{t<tau} |NA_right(t) - NA_left(t)|
  BiasCorrectedChf,  ///< same with the IPCW-weighted Nelson-Aalen estimator
};

struct SplitRule {
  SplitKind kind = SplitKind::MarginalChf;
  /// Practical: argmax over mtry drawn variables. Theoretical: sequential
  /// screening of single variables against `threshold`, with variables already
  /// used on the path always accepted.
  bool theoretical = false;
  double threshold = 0.0;

  void validate() const;
  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

/// Minimum child size for an admissible split.
struct AlphaConstraint {
  double alpha = 0.0;                ///< fraction of the parent's samples, in [0, 0.5)
  std::size_t min_child_events = 1;  ///< observed events per child

  void validate() const;
  /// max(ceil(alpha * n_node), 1)
  std::size_t min_child_samples(std::size_t node_size) const;
  friend bool operator==(const AlphaConstraint&, const AlphaConstraint&) = default;
};

/// Child-size floor used by the sweep (alpha constraint merged with stop policy).
struct ChildMinimum {
  std::size_t samples = 1;
  std::size_t events = 1;
};

struct SplitCandidate {
  std::size_t variable = 0;  ///< zero-based covariate index
  double cutpoint = 0.0;     ///< x < cutpoint goes left, x >= cutpoint goes right
  double score = 0.0;
  std::size_t left_count = 0;
  std::size_t right_count = 0;
  bool fallback = false;  ///< theoretical mode fell through to a uniformly random variable

  friend bool operator==(const SplitCandidate&, const SplitCandidate&) = default;
};

/// A view of the samples that fall in one node. Rows index into `data` and
/// may repeat (bootstrap duplicates).
struct NodeSamples {
  const Dataset& data;
  std::span<const std::size_t> rows;

  std::vector<Observation> observations() const;
};

/// Every row of a dataset as a node.
std::vector<std::size_t> all_rows(const Dataset& data);

/// Midpoints between consecutive distinct values of covariate `variable`
/// whose induced children satisfy the constraint.
std::vector<double> candidate_cutpoints(const NodeSamples& node, std::size_t variable, const AlphaConstraint& constraint);
std::vector<double> candidate_cutpoints(const NodeSamples& node, std::size_t variable, const ChildMinimum& minimum);

/// Reference (non-sweep) evaluations of the statistics at one cutpoint. Each
/// fits the child estimators from scratch.
double delta1(const NodeSamples& node, std::size_t variable, double cutpoint, double tau);
double delta2(const NodeSamples& node, std::size_t variable, double cutpoint, double tau, const CensoringModel& censor_model,
              double epsilon);
double logrank_stat(const NodeSamples& node, std::size_t variable, double cutpoint);

/// sup_{t<tau} |a(t) - b(t)| over the union of knots below tau, stopping
/// where either child has no sample at risk.
double sup_chf_gap(const HazardCurve& a, const HazardCurve& b, double tau, double last_at_risk_a, double last_at_risk_b);

/// Everything best_split needs besides the node and the RNG.
struct SplitSettings {
  SplitRule rule;
  std::size_t mtry = 1;
  ChildMinimum minimum;
  double tau = std::numeric_limits<double>::infinity();
  /// Required for BiasCorrectedChf.
  const IpcwWeights* weights = nullptr;
};

/// Chooses a split for the node, or nullopt when no drawn variable has an
/// admissible cutpoint. `used_on_path[j]` marks variables split on by
/// ancestors (theoretical mode only; may be empty).
std::optional<SplitCandidate> best_split(const NodeSamples& node, const SplitSettings& settings, Rng& rng,
                                         const std::vector<bool>& used_on_path = {});

/// Best admissible cutpoint of one variable under a score-based rule.
std::optional<SplitCandidate> best_cutpoint(const NodeSamples& node, std::size_t variable, const SplitSettings& settings);

}  // namespace survforest
