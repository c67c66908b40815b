#include "survforest/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "survforest/censoring.hpp"
#include "survforest/error.hpp"
#include "survforest/kernels.hpp"

namespace survforest {

void SplitRule::validate() const {
  if (theoretical && !(threshold >= 0.0)) throw InvalidArgument("theoretical split threshold must be >= 0");
  if (theoretical && kind != SplitKind::MarginalChf && kind != SplitKind::BiasCorrectedChf &&
      kind != SplitKind::LogRank) {
    throw InvalidArgument("theoretical mode needs a score-based split rule");
  }
}

void AlphaConstraint::validate() const {
  if (!(alpha >= 0.0 && alpha < 0.5)) throw InvalidArgument("alpha must lie in [0, 0.5)");
  if (min_child_events < 1) throw InvalidArgument("min_child_events must be >= 1");
}

std::size_t AlphaConstraint::min_child_samples(std::size_t node_size) const {
  const auto scaled = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(node_size)));
  return std::max<std::size_t>(scaled, 1);
}

std::vector<Observation> NodeSamples::observations() const {
  std::vector<Observation> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(data.observation(r));
  return out;
}

std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

namespace {

enum class Statistic { None, LogRank, Delta };

// Cutpoint strictly above `lo` and at most `hi` (lo < hi).
double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid > lo ? mid : hi;
}

// Incremental evaluation of every cutpoint of a variable within one node.
//
// Node event times (restricted to t < tau) index the per-time arrays. Moving
// samples one by one into the left child in covariate order updates the left
// at-risk and event arrays; the right child is always totals minus left.
class NodeSweep {
 public:
  NodeSweep(const NodeSamples& node, double tau, const IpcwWeights* weights)
      : node_(node), n_(node.rows.size()), weighted_(weights != nullptr && !weights->covariate_free()) {
    const Dataset& data = node.data;
    for (std::size_t r : node.rows) {
      if (data.event(r) && data.time(r) < tau) times_.push_back(data.time(r));
    }
    std::sort(times_.begin(), times_.end());
    times_.erase(std::unique(times_.begin(), times_.end()), times_.end());
    t_ = times_.size();

    at_risk_len_.resize(n_);
    event_idx_.resize(n_);
    is_event_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t r = node.rows[i];
      const double y = data.time(r);
      const auto m = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), y) - times_.begin());
      at_risk_len_[i] = m;
      is_event_[i] = data.event(r) ? 1 : 0;
      event_idx_[i] = (data.event(r) && y < tau) ? static_cast<std::ptrdiff_t>(m) - 1 : -1;
    }

    total_risk_.assign(t_, 0.0);
    total_events_.assign(t_, 0.0);
    const auto& kernels = simd::active();
    if (weighted_) {
      std::vector<std::size_t> global(t_);
      for (std::size_t k = 0; k < t_; ++k) global[k] = weights->time_index(times_[k]);
      weight_rows_.assign(n_ * t_, 0.0);
      // Weighted sums are accumulated in dataset row order so scores do not
      // depend on how the node's rows happen to be ordered.
      std::vector<std::size_t> order(n_);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return node.rows[a] < node.rows[b]; });
      for (std::size_t i : order) {
        double* row = weight_rows_.data() + i * t_;
        for (std::size_t k = 0; k < at_risk_len_[i]; ++k) row[k] = weights->weight(node.rows[i], global[k]);
        kernels.add(total_risk_.data(), row, at_risk_len_[i]);
        if (event_idx_[i] >= 0) total_events_[static_cast<std::size_t>(event_idx_[i])] += row[event_idx_[i]];
      }
    } else {
      std::vector<double> ends(t_ + 1, 0.0);
      for (std::size_t i = 0; i < n_; ++i) {
        ends[at_risk_len_[i]] += 1.0;
        if (event_idx_[i] >= 0) total_events_[static_cast<std::size_t>(event_idx_[i])] += 1.0;
      }
      double running = 0.0;
      for (std::size_t k = t_; k-- > 0;) {
        running += ends[k + 1];
        total_risk_[k] = running;
      }
    }
  }

  // Calls on_cut(cutpoint, left_count, score) for every admissible cutpoint in
  // ascending order.
  template <class OnCut>
  void sweep(std::size_t variable, const ChildMinimum& minimum, Statistic statistic, OnCut&& on_cut) {
    if (n_ < 2) return;
    const Dataset& data = node_.data;
    sorted_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) sorted_[i] = {data.x(node_.rows[i], variable), i};
    std::sort(sorted_.begin(), sorted_.end(), [&](const auto& a, const auto& b) {
      return a.first < b.first || (a.first == b.first && node_.rows[a.second] < node_.rows[b.second]);
    });
    if (sorted_.front().first == sorted_.back().first) return;

    std::size_t total_events_count = 0;
    for (std::size_t i = 0; i < n_; ++i) total_events_count += is_event_[i];
    if (total_events_count < 2 * minimum.events || n_ < 2 * minimum.samples) return;

    suffix_max_len_.resize(n_ + 1);
    suffix_max_len_[n_] = 0;
    for (std::size_t p = n_; p-- > 0;) {
      suffix_max_len_[p] = std::max(suffix_max_len_[p + 1], at_risk_len_[sorted_[p].second]);
    }

    const bool scoring = statistic != Statistic::None;
    if (scoring) {
      left_risk_.assign(t_, 0.0);
      left_events_.assign(t_, 0.0);
    }
    const auto& kernels = simd::active();
    std::size_t left_events_count = 0;
    std::size_t left_max_len = 0;
    for (std::size_t p = 0; p + 1 < n_; ++p) {
      const std::size_t i = sorted_[p].second;
      left_events_count += is_event_[i];
      left_max_len = std::max(left_max_len, at_risk_len_[i]);
      if (scoring) {
        if (weighted_) {
          const double* row = weight_rows_.data() + i * t_;
          kernels.add(left_risk_.data(), row, at_risk_len_[i]);
          if (event_idx_[i] >= 0) left_events_[static_cast<std::size_t>(event_idx_[i])] += row[event_idx_[i]];
        } else {
          kernels.add_constant(left_risk_.data(), 1.0, at_risk_len_[i]);
          if (event_idx_[i] >= 0) left_events_[static_cast<std::size_t>(event_idx_[i])] += 1.0;
        }
      }
      const double x_here = sorted_[p].first;
      const double x_next = sorted_[p + 1].first;
      if (x_here == x_next) continue;

      const std::size_t left_count = p + 1;
      const std::size_t right_count = n_ - left_count;
      if (right_count < minimum.samples) break;
      if (left_count < minimum.samples) continue;
      if (left_events_count < minimum.events || total_events_count - left_events_count < minimum.events) continue;

      double score = 0.0;
      if (statistic == Statistic::LogRank) {
        const auto sums = kernels.logrank_sums(left_risk_.data(), left_events_.data(), total_risk_.data(),
                                               total_events_.data(), t_);
        if (sums.variance > 0.0) score = sums.observed_minus_expected * sums.observed_minus_expected / sums.variance;
      } else if (statistic == Statistic::Delta) {
        const std::size_t valid = std::min(left_max_len, suffix_max_len_[p + 1]);
        if (valid > 0) {
          score = kernels.sup_abs_hazard_gap(left_risk_.data(), left_events_.data(), total_risk_.data(),
                                             total_events_.data(), valid);
        }
      }
      on_cut(midpoint(x_here, x_next), left_count, score);
    }
  }

  std::size_t size() const { return n_; }

 private:
  const NodeSamples& node_;
  std::size_t n_;
  bool weighted_;
  std::size_t t_ = 0;
  std::vector<double> times_;
  std::vector<std::size_t> at_risk_len_;
  std::vector<std::ptrdiff_t> event_idx_;
  std::vector<unsigned char> is_event_;
  std::vector<double> total_risk_;
  std::vector<double> total_events_;
  std::vector<double> weight_rows_;

  std::vector<std::pair<double, std::size_t>> sorted_;
  std::vector<std::size_t> suffix_max_len_;
  std::vector<double> left_risk_;
  std::vector<double> left_events_;
};

ChildMinimum to_minimum(const NodeSamples& node, const AlphaConstraint& constraint) {
  constraint.validate();
  return {constraint.min_child_samples(node.rows.size()), constraint.min_child_events};
}

void require_variable(const NodeSamples& node, std::size_t variable) {
  if (variable >= node.data.dim()) {
    throw DimensionMismatch("variable index " + std::to_string(variable) + " out of range for dimension " +
                            std::to_string(node.data.dim()));
  }
}

struct Children {
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
};

Children partition(const NodeSamples& node, std::size_t variable, double cutpoint) {
  require_variable(node, variable);
  Children c;
  for (std::size_t r : node.rows) (node.data.x(r, variable) < cutpoint ? c.left : c.right).push_back(r);
  if (c.left.empty() || c.right.empty()) throw InvalidArgument("both children must be non-empty");
  return c;
}

double max_time(const Dataset& data, const std::vector<std::size_t>& rows) {
  double m = 0.0;
  for (std::size_t r : rows) m = std::max(m, data.time(r));
  return m;
}

std::vector<Observation> observations_of(const Dataset& data, const std::vector<std::size_t>& rows) {
  std::vector<Observation> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(data.observation(r));
  return out;
}

}  // namespace

std::vector<double> candidate_cutpoints(const NodeSamples& node, std::size_t variable, const ChildMinimum& minimum) {
  require_variable(node, variable);
  std::vector<double> cuts;
  NodeSweep sweep(node, std::numeric_limits<double>::infinity(), nullptr);
  sweep.sweep(variable, minimum, Statistic::None, [&](double cut, std::size_t, double) { cuts.push_back(cut); });
  return cuts;
}

std::vector<double> candidate_cutpoints(const NodeSamples& node, std::size_t variable,
                                        const AlphaConstraint& constraint) {
  return candidate_cutpoints(node, variable, to_minimum(node, constraint));
}

double sup_chf_gap(const HazardCurve& a, const HazardCurve& b, double tau, double last_at_risk_a,
                   double last_at_risk_b) {
  const double horizon = std::min(last_at_risk_a, last_at_risk_b);
  std::vector<double> times;
  times.reserve(a.size() + b.size());
  std::merge(a.knots().begin(), a.knots().end(), b.knots().begin(), b.knots().end(), std::back_inserter(times));
  double best = 0.0;
  for (double t : times) {
    if (!(t < tau) || t > horizon) break;
    best = std::max(best, std::abs(a(t) - b(t)));
  }
  return best;
}

double delta1(const NodeSamples& node, std::size_t variable, double cutpoint, double tau) {
  const auto children = partition(node, variable, cutpoint);
  const auto left = observations_of(node.data, children.left);
  const auto right = observations_of(node.data, children.right);
  return sup_chf_gap(nelson_aalen(right), nelson_aalen(left), tau, max_time(node.data, children.right),
                     max_time(node.data, children.left));
}

double delta2(const NodeSamples& node, std::size_t variable, double cutpoint, double tau,
              const CensoringModel& censor_model, double epsilon) {
  const auto children = partition(node, variable, cutpoint);
  auto weighted = [&](const std::vector<std::size_t>& rows) {
    const auto obs = observations_of(node.data, rows);
    return weighted_nelson_aalen(
        obs, [&](std::size_t i, double s) { return censor_model.survival_at(s, node.data.row(rows[i])); }, epsilon);
  };
  return sup_chf_gap(weighted(children.right), weighted(children.left), tau, max_time(node.data, children.right),
                     max_time(node.data, children.left));
}

double logrank_stat(const NodeSamples& node, std::size_t variable, double cutpoint) {
  const auto children = partition(node, variable, cutpoint);
  std::vector<double> event_times;
  for (std::size_t r : node.rows) {
    if (node.data.event(r)) event_times.push_back(node.data.time(r));
  }
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());

  double observed_minus_expected = 0.0;
  double variance = 0.0;
  for (double t : event_times) {
    double at_risk = 0, at_risk_left = 0, events = 0, events_left = 0;
    for (std::size_t r : node.rows) {
      const bool in_left = node.data.x(r, variable) < cutpoint;
      const double y = node.data.time(r);
      if (y >= t) {
        at_risk += 1;
        if (in_left) at_risk_left += 1;
      }
      if (y == t && node.data.event(r)) {
        events += 1;
        if (in_left) events_left += 1;
      }
    }
    observed_minus_expected += events_left - at_risk_left * events / at_risk;
    if (at_risk > 1) {
      variance += at_risk_left * (at_risk - at_risk_left) * events * (at_risk - events) /
                  (at_risk * at_risk * (at_risk - 1));
    }
  }
  if (!(variance > 0.0)) return 0.0;
  return observed_minus_expected * observed_minus_expected / variance;
}

namespace {

Statistic statistic_for(SplitKind kind) {
  switch (kind) {
    case SplitKind::LogRank:
      return Statistic::LogRank;
    case SplitKind::MarginalChf:
    case SplitKind::BiasCorrectedChf:
      return Statistic::Delta;
    case SplitKind::Random:
      return Statistic::None;
  }
  return Statistic::None;
}

std::optional<SplitCandidate> scan_variable(NodeSweep& sweep, std::size_t variable, const SplitSettings& settings) {
  std::optional<SplitCandidate> best;
  const std::size_t n = sweep.size();
  sweep.sweep(variable, settings.minimum, statistic_for(settings.rule.kind),
              [&](double cut, std::size_t left_count, double score) {
                if (!best || score > best->score) {
                  best = SplitCandidate{variable, cut, score, left_count, n - left_count, false};
                }
              });
  return best;
}

const IpcwWeights* sweep_weights(const SplitSettings& settings) {
  if (settings.rule.kind != SplitKind::BiasCorrectedChf) return nullptr;
  if (settings.weights == nullptr) throw InvalidArgument("bias-corrected splitting needs IPCW weights");
  return settings.weights;
}

double sweep_tau(const SplitSettings& settings) {
  return settings.rule.kind == SplitKind::LogRank ? std::numeric_limits<double>::infinity() : settings.tau;
}

// Fisher-Yates prefix: the first `take` entries are a uniform draw without replacement.
std::vector<std::size_t> draw_variables(std::size_t dim, std::size_t take, Rng& rng) {
  std::vector<std::size_t> vars(dim);
  std::iota(vars.begin(), vars.end(), std::size_t{0});
  take = std::min(take, dim);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, dim - i));
    std::swap(vars[i], vars[j]);
  }
  vars.resize(take);
  return vars;
}

}  // namespace

std::optional<SplitCandidate> best_cutpoint(const NodeSamples& node, std::size_t variable,
                                            const SplitSettings& settings) {
  require_variable(node, variable);
  NodeSweep sweep(node, sweep_tau(settings), sweep_weights(settings));
  return scan_variable(sweep, variable, settings);
}

std::optional<SplitCandidate> best_split(const NodeSamples& node, const SplitSettings& settings, Rng& rng,
                                         const std::vector<bool>& used_on_path) {
  settings.rule.validate();
  const std::size_t dim = node.data.dim();
  if (dim == 0 || node.rows.size() < 2) return std::nullopt;

  if (settings.rule.kind == SplitKind::Random) {
    NodeSweep sweep(node, std::numeric_limits<double>::infinity(), nullptr);
    for (std::size_t variable : draw_variables(dim, dim, rng)) {
      std::vector<std::pair<double, std::size_t>> cuts;
      sweep.sweep(variable, settings.minimum, Statistic::None,
                  [&](double cut, std::size_t left_count, double) { cuts.emplace_back(cut, left_count); });
      if (cuts.empty()) continue;
      const auto& [cut, left_count] = cuts[static_cast<std::size_t>(uniform_index(rng, cuts.size()))];
      return SplitCandidate{variable, cut, 0.0, left_count, node.rows.size() - left_count, false};
    }
    return std::nullopt;
  }

  NodeSweep sweep(node, sweep_tau(settings), sweep_weights(settings));

  if (!settings.rule.theoretical) {
    if (settings.mtry < 1) throw InvalidArgument("mtry must be >= 1");
    auto drawn = draw_variables(dim, settings.mtry, rng);
    std::sort(drawn.begin(), drawn.end());
    std::optional<SplitCandidate> best;
    for (std::size_t variable : drawn) {
      auto candidate = scan_variable(sweep, variable, settings);
      if (candidate && (!best || candidate->score > best->score)) best = candidate;
    }
    return best;
  }

  // Sequential screening: accept a variable that was already used on the path
  // or whose best score clears the threshold; otherwise try the next one.
  std::vector<std::optional<SplitCandidate>> per_variable(dim);
  for (std::size_t variable : draw_variables(dim, dim, rng)) {
    per_variable[variable] = scan_variable(sweep, variable, settings);
    if (!per_variable[variable]) continue;
    const bool used = variable < used_on_path.size() && used_on_path[variable];
    if (used || per_variable[variable]->score >= settings.rule.threshold) return per_variable[variable];
  }
  std::vector<std::size_t> feasible;
  for (std::size_t v = 0; v < dim; ++v) {
    if (per_variable[v]) feasible.push_back(v);
  }
  if (feasible.empty()) return std::nullopt;
  auto chosen = *per_variable[feasible[static_cast<std::size_t>(uniform_index(rng, feasible.size()))]];
  chosen.fallback = true;
  return chosen;
}

}  // namespace survforest
