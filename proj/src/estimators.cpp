#include "survforest/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "survforest/error.hpp"

namespace survforest {

namespace {

std::vector<std::size_t> order_by_time(std::span<const Observation> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].time < samples[b].time; });
  return order;
}

void require_valid(std::span<const Observation> samples) {
  if (samples.empty()) throw InvalidArgument("empty node");
  for (const auto& s : samples) {
    if (!std::isfinite(s.time) || s.time < 0.0) throw InvalidArgument("observed time must be finite and non-negative");
  }
}

// Walks distinct times in ascending order, handing (time, events, at_risk) to fn.
template <class Fn>
void for_each_event_time(std::span<const Observation> samples, Fn&& fn) {
  const auto order = order_by_time(samples);
  const std::size_t n = order.size();
  std::size_t i = 0;
  while (i < n) {
    const double t = samples[order[i]].time;
    std::size_t j = i;
    std::size_t events = 0;
    while (j < n && samples[order[j]].time == t) {
      events += samples[order[j]].event ? 1 : 0;
      ++j;
    }
    if (events > 0) fn(t, static_cast<double>(events), static_cast<double>(n - i));
    i = j;
  }
}

}  // namespace

HazardCurve nelson_aalen(std::span<const Observation> samples) {
  require_valid(samples);
  std::vector<double> knots;
  std::vector<double> values;
  double cumulative = 0.0;
  for_each_event_time(samples, [&](double t, double events, double at_risk) {
    cumulative += events / at_risk;
    knots.push_back(t);
    values.push_back(cumulative);
  });
  return HazardCurve(std::move(knots), std::move(values));
}

SurvivalCurve kaplan_meier(std::span<const Observation> samples) {
  require_valid(samples);
  std::vector<double> knots;
  std::vector<double> values;
  double survival = 1.0;
  for_each_event_time(samples, [&](double t, double events, double at_risk) {
    survival *= 1.0 - events / at_risk;
    knots.push_back(t);
    values.push_back(survival);
  });
  return SurvivalCurve(std::move(knots), std::move(values));
}

SurvivalCurve na_survival(const HazardCurve& chf) {
  std::vector<double> values(chf.size());
  std::transform(chf.values().begin(), chf.values().end(), values.begin(), [](double v) { return std::exp(-v); });
  return SurvivalCurve(chf.knots(), std::move(values));
}

HazardCurve weighted_nelson_aalen(std::span<const Observation> samples, const SampleCensorSurvival& censor_survival,
                                  double epsilon) {
  require_valid(samples);
  if (!(epsilon > 0.0) || epsilon > 1.0) throw InvalidArgument("ipcw epsilon must lie in (0, 1]");
  const auto order = order_by_time(samples);
  const std::size_t n = order.size();

  auto weight = [&](std::size_t sample, double s) {
    const double surv = censor_survival(sample, s);
    if (!std::isfinite(surv)) throw NumericalError("non-finite weight");
    const double w = 1.0 / std::max(epsilon, surv);
    if (!std::isfinite(w)) throw NumericalError("non-finite weight");
    return w;
  };

  std::vector<double> knots;
  std::vector<double> values;
  double cumulative = 0.0;
  std::size_t i = 0;
  while (i < n) {
    const double t = samples[order[i]].time;
    std::size_t j = i;
    bool any_event = false;
    while (j < n && samples[order[j]].time == t) {
      any_event = any_event || samples[order[j]].event;
      ++j;
    }
    if (any_event) {
      double numerator = 0.0;
      double denominator = 0.0;
      for (std::size_t r = i; r < n; ++r) {
        const std::size_t idx = order[r];
        const double w = weight(idx, t);
        denominator += w;
        if (r < j && samples[idx].event) numerator += w;
      }
      cumulative += numerator / denominator;
      knots.push_back(t);
      values.push_back(cumulative);
    }
    i = j;
  }
  return HazardCurve(std::move(knots), std::move(values));
}

HazardCurve weighted_nelson_aalen(std::span<const SurvivalRecord> samples,
                                  const std::function<double(double, std::span<const double>)>& censor_survival,
                                  double epsilon) {
  std::vector<Observation> obs;
  obs.reserve(samples.size());
  for (const auto& r : samples) obs.push_back({r.time, r.event});
  return weighted_nelson_aalen(
      obs, [&](std::size_t i, double s) { return censor_survival(s, samples[i].covariates); }, epsilon);
}

namespace {

HazardCurve integrate_hazard(std::span<const double> grid, const std::function<double(double)>& hazard) {
  if (grid.empty()) throw InvalidArgument("oracle grid is empty");
  std::vector<double> knots(grid.begin(), grid.end());
  std::vector<double> values(grid.size());
  double prev_t = 0.0;
  double prev_h = hazard(0.0);
  double acc = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double t = grid[g];
    if (t < prev_t) throw InvalidArgument("oracle grid must be ascending and non-negative");
    if (t > prev_t) {
      const double h = hazard(t);
      acc += 0.5 * (t - prev_t) * (prev_h + h);
      prev_h = h;
      prev_t = t;
    }
    values[g] = acc;
  }
  return HazardCurve(std::move(knots), std::move(values));
}

constexpr double kDenominatorFloor = 1e-12;

}  // namespace

HazardCurve contaminated_chf(std::span<const LifetimeLaw> failure_laws, std::span<const LifetimeLaw> censor_laws,
                             std::span<const double> grid) {
  if (failure_laws.empty() || failure_laws.size() != censor_laws.size()) {
    throw InvalidArgument("contaminated_chf needs matching non-empty failure and censoring law lists");
  }
  const double count = static_cast<double>(failure_laws.size());
  return integrate_hazard(grid, [&](double s) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < failure_laws.size(); ++i) {
      const double c = censor_laws[i].survival(s);
      num += c * failure_laws[i].density(s);
      den += c * failure_laws[i].survival(s);
    }
    if (den / count < kDenominatorFloor) throw NumericalError("contaminated hazard undefined beyond tau");
    return num / den;
  });
}

HazardCurve average_chf(std::span<const LifetimeLaw> failure_laws, std::span<const double> grid) {
  if (failure_laws.empty()) throw InvalidArgument("average_chf needs at least one failure law");
  const double count = static_cast<double>(failure_laws.size());
  return integrate_hazard(grid, [&](double s) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& law : failure_laws) {
      num += law.density(s);
      den += law.survival(s);
    }
    if (den / count < kDenominatorFloor) throw NumericalError("contaminated hazard undefined beyond tau");
    return num / den;
  });
}

void TauPolicy::validate() const {
  switch (mode) {
    case Mode::Quantile:
      if (!(value > 0.0 && value <= 1.0)) throw InvalidArgument("tau quantile must lie in (0, 1]");
      break;
    case Mode::Fixed:
      if (!(value > 0.0) || !std::isfinite(value)) throw InvalidArgument("fixed tau must be positive and finite");
      break;
    case Mode::MinAtRisk:
      if (!(value >= 2.0) || value != std::floor(value)) throw InvalidArgument("min-at-risk tau needs an integer r >= 2");
      break;
  }
}

double TauPolicy::resolve(std::span<const Observation> samples) const {
  validate();
  if (mode == Mode::Fixed) return value;
  require_valid(samples);
  std::vector<double> times(samples.size());
  std::transform(samples.begin(), samples.end(), times.begin(), [](const Observation& o) { return o.time; });
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  if (mode == Mode::Quantile) {
    auto rank = static_cast<std::size_t>(std::ceil(value * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return times[rank - 1];
  }
  const auto r = static_cast<std::size_t>(value);
  if (r > n) throw InvalidArgument("min-at-risk tau exceeds the sample size");
  return times[n - r];
}

}  // namespace survforest
