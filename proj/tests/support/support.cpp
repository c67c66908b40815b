#include "support.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "survforest/error.hpp"
#include "survforest/estimators.hpp"
#include "survforest/evaluation.hpp"
#include "survforest/io.hpp"
#include "survforest/kernels.hpp"
#include "survforest/scenarios.hpp"
#include "survforest/splitting.hpp"
#include "survforest/tree.hpp"

namespace survforest::testing {

using Failure = std::optional<std::string>;

PropertyResult check_property(const std::string& name, std::uint64_t seed, std::size_t cases, const Property& property) {
  PropertyResult result{name, cases, 0, {}};
  for (std::size_t i = 0; i < cases; ++i) {
    Rng rng = make_rng(seed, {0x70726f70ULL, i});
    Failure failure;
    try {
      failure = property(rng);
    } catch (const std::exception& e) {
      failure = std::string("unexpected exception: ") + e.what();
    }
    if (failure) {
      if (result.failures++ == 0) result.first_failure = "case " + std::to_string(i) + ": " + *failure;
    }
  }
  return result;
}

// ---- generators ----

std::size_t uniform_between(Rng& rng, std::size_t lo, std::size_t hi) { return lo + uniform_index(rng, hi - lo + 1); }

double uniform_real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::vector<Observation> random_observations(Rng& rng, const ObservationShape& shape) {
  const std::size_t n = uniform_between(rng, shape.min_n, shape.max_n);
  const double censor_mean = std::exp(uniform_real(rng, -2.0, 2.5));
  std::vector<Observation> obs;
  obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!obs.empty() && uniform01(rng) < shape.tie_probability) {
      obs.push_back({obs[uniform_index(rng, obs.size())].time, uniform01(rng) < 0.6});
      continue;
    }
    const double t = exponential_mean(rng, 1.0);
    const double c = exponential_mean(rng, censor_mean);
    obs.push_back({std::min(t, c), t <= c});
  }
  if (std::none_of(obs.begin(), obs.end(), [](const Observation& o) { return o.event; })) obs.front().event = true;
  return obs;
}

Dataset random_dataset(Rng& rng, std::size_t n, std::size_t dim, bool round_covariates) {
  Dataset data(dim);
  const double censor_scale = uniform_real(rng, 0.2, 1.5);
  std::vector<double> x(dim);
  bool any_event = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) {
      v = standard_normal(rng);
      if (round_covariates) v = std::round(2.0 * v) / 2.0;
    }
    const double t = exponential_mean(rng, std::exp(-0.8 * x[0]));
    const double c = exponential_mean(rng, 1.0 / (censor_scale * std::exp(0.5 * x[dim - 1])));
    const bool event = t <= c || (i + 1 == n && !any_event);
    any_event = any_event || event;
    data.add(std::min(t, c), event, x);
  }
  return data;
}

CensoringModel covariate_censoring(std::size_t coordinate) {
  return CensoringModel(CensoringModel::KnownLaw{[coordinate](double s, std::span<const double> x) {
    return std::exp(-s * std::exp(x[coordinate]));
  }});
}

namespace {

SplitKind random_kind(Rng& rng) {
  constexpr SplitKind kinds[] = {SplitKind::LogRank, SplitKind::Random, SplitKind::MarginalChf,
                                 SplitKind::BiasCorrectedChf};
  return kinds[uniform_index(rng, 4)];
}

ForestConfig random_config(Rng& rng, std::size_t dim, std::size_t max_trees) {
  ForestConfig c;
  c.n_trees = uniform_between(rng, 1, max_trees);
  c.split_rule.kind = random_kind(rng);
  c.terminal = uniform01(rng) < 0.5 ? TerminalEstimator::NelsonAalen : TerminalEstimator::WeightedNelsonAalen;
  c.stop.min_node_events = uniform_between(rng, 1, 3);
  c.stop.min_node_samples = uniform_between(rng, c.stop.min_node_events, 8);
  c.mtry = uniform_index(rng, dim + 1);
  c.alpha_constraint.alpha = std::array{0.0, 0.05, 0.1}[uniform_index(rng, 3)];
  c.bootstrap = uniform01(rng) < 0.7;
  c.seed = rng();
  c.censoring = uniform01(rng) < 0.5 ? CensoringKind::GlobalKM : CensoringKind::CensorForest;
  c.ipcw_epsilon = uniform_real(rng, 0.01, 0.2);
  if (uniform01(rng) < 0.3) c.tau_policy = TauPolicy::quantile(uniform_real(rng, 0.5, 1.0));
  return c;
}

}  // namespace

Forest random_forest(Rng& rng, std::size_t max_trees) {
  const std::size_t dim = uniform_between(rng, 1, 4);
  const Dataset data = random_dataset(rng, uniform_between(rng, 20, 70), dim, uniform01(rng) < 0.3);
  return fit_forest(data, random_config(rng, dim, max_trees), ExecutionOptions{1});
}

// ---- oracles ----

namespace {

std::vector<double> distinct_event_times(const std::vector<Observation>& obs) {
  std::vector<double> times;
  for (const auto& o : obs) {
    if (o.event) times.push_back(o.time);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

std::size_t events_at(const std::vector<Observation>& obs, double t) {
  return static_cast<std::size_t>(
      std::count_if(obs.begin(), obs.end(), [t](const Observation& o) { return o.event && o.time == t; }));
}

}  // namespace

std::size_t at_risk(const std::vector<Observation>& obs, double t) {
  return static_cast<std::size_t>(std::count_if(obs.begin(), obs.end(), [t](const Observation& o) { return o.time >= t; }));
}

std::vector<std::pair<double, double>> counting_nelson_aalen(const std::vector<Observation>& obs) {
  std::vector<std::pair<double, double>> out;
  double sum = 0.0;
  for (double t : distinct_event_times(obs)) {
    sum += static_cast<double>(events_at(obs, t)) / static_cast<double>(at_risk(obs, t));
    out.emplace_back(t, sum);
  }
  return out;
}

std::vector<std::pair<double, double>> counting_kaplan_meier(const std::vector<Observation>& obs) {
  std::vector<std::pair<double, double>> out;
  double prod = 1.0;
  for (double t : distinct_event_times(obs)) {
    prod *= 1.0 - static_cast<double>(events_at(obs, t)) / static_cast<double>(at_risk(obs, t));
    out.emplace_back(t, prod);
  }
  return out;
}

double midpoint_contaminated_chf(const std::vector<LifetimeLaw>& failure, const std::vector<LifetimeLaw>& censoring,
                                 double t, std::size_t steps) {
  const double h = t / static_cast<double>(steps);
  double sum = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double s = (static_cast<double>(k) + 0.5) * h;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < failure.size(); ++i) {
      const double g = censoring[i].survival(s);
      num += g * failure[i].density(s);
      den += g * failure[i].survival(s);
    }
    sum += num / den * h;
  }
  return sum;
}

std::size_t km_na_bound_violations(const std::vector<Observation>& obs, std::string* detail) {
  const auto km = kaplan_meier(obs);
  const auto na = nelson_aalen(obs);
  std::size_t violations = 0;
  for (double t : distinct_event_times(obs)) {
    const double y = static_cast<double>(at_risk(obs, t));
    const double s_km = km(t);
    if (y < 2.0 || !(s_km > 0.0)) continue;
    const double s_na = std::exp(-na(t));
    if (!(std::abs(s_km - s_na) < s_km * 4.0 / y)) {
      if (violations++ == 0 && detail != nullptr) {
        std::ostringstream os;
        os << "t=" << t << " at risk " << y << " KM " << s_km << " NA " << s_na;
        *detail = os.str();
      }
    }
  }
  return violations;
}

PropertyResult km_na_bound_suite(std::uint64_t seed, std::size_t datasets) {
  return check_property("product-limit vs exp(-cumulative hazard) bound", seed, datasets, [](Rng& rng) -> Failure {
    const auto obs = random_observations(rng, {3, 200, 0.0});
    std::string detail;
    if (km_na_bound_violations(obs, &detail) > 0) return "n=" + std::to_string(obs.size()) + " " + detail;
    return std::nullopt;
  });
}

// ---- property catalogue ----

namespace {

bool close(double a, double b, double rel = 1e-12) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

std::string describe(double a, double b) {
  std::ostringstream os;
  os.precision(17);
  os << a << " vs " << b;
  return os.str();
}

Failure curves_close(const StepFunction& a, const StepFunction& b, double rel) {
  if (a.knots() != b.knots()) return std::string("knots differ");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!close(a.values()[k], b.values()[k], rel)) return "value " + std::to_string(k) + ": " + describe(a.values()[k], b.values()[k]);
  }
  return std::nullopt;
}

std::vector<double> probe_times(Rng& rng, const std::vector<double>& knots, std::size_t extra) {
  std::vector<double> t(knots);
  const double hi = knots.empty() ? 3.0 : knots.back() * 1.2 + 0.1;
  for (std::size_t i = 0; i < extra; ++i) t.push_back(uniform_real(rng, 0.0, hi));
  t.push_back(0.0);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

Dataset transformed(const Dataset& data, std::size_t variable, const std::function<double(double)>& f) {
  Dataset out(data.dim(), data.feature_names());
  std::vector<double> x(data.dim());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::copy(data.row(i).begin(), data.row(i).end(), x.begin());
    x[variable] = f(x[variable]);
    out.add(data.time(i), data.event(i), x);
  }
  return out;
}

std::vector<std::size_t> random_rows(Rng& rng, std::size_t n, bool bootstrap) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = bootstrap ? uniform_index(rng, n) : i;
  return rows;
}

std::vector<std::size_t> left_rows(const Dataset& data, std::span<const std::size_t> rows, const SplitCandidate& c) {
  std::vector<std::size_t> out;
  for (std::size_t r : rows) {
    if (data.x(r, c.variable) < c.cutpoint) out.push_back(r);
  }
  return out;
}

// -- estimators --

Failure na_matches_counting(Rng& rng) {
  const auto obs = random_observations(rng, {1, 80, 0.3});
  const auto na = nelson_aalen(obs);
  const auto oracle = counting_nelson_aalen(obs);
  if (na.size() != oracle.size()) return std::string("knot count differs");
  for (std::size_t k = 0; k < oracle.size(); ++k) {
    if (na.knots()[k] != oracle[k].first || !close(na.values()[k], oracle[k].second)) {
      return "knot " + std::to_string(k) + ": " + describe(na.values()[k], oracle[k].second);
    }
  }
  return std::nullopt;
}

Failure na_shape(Rng& rng) {
  const auto obs = random_observations(rng, {1, 80, 0.3});
  const auto na = nelson_aalen(obs);
  const double first = na.knots().front();
  for (double t : probe_times(rng, na.knots(), 20)) {
    if (t < first && na(t) != 0.0) return "nonzero before the first event at " + std::to_string(t);
  }
  for (std::size_t k = 0; k < na.size(); ++k) {
    if (na.values()[k] <= 0.0 || (k > 0 && na.values()[k] < na.values()[k - 1])) return std::string("not increasing");
  }
  return std::nullopt;
}

Failure km_shape(Rng& rng) {
  const auto obs = random_observations(rng, {1, 80, 0.3});
  const auto km = kaplan_meier(obs);
  const auto na = nelson_aalen(obs);
  const auto oracle = counting_kaplan_meier(obs);
  if (km.size() != oracle.size()) return std::string("knot count differs from the counting oracle");
  for (std::size_t k = 0; k < km.size(); ++k) {
    const double v = km.values()[k];
    if (!close(v, oracle[k].second)) return "counting oracle " + describe(v, oracle[k].second);
    if (v < 0.0 || v > 1.0) return "outside [0, 1]: " + std::to_string(v);
    if (k > 0 && v > km.values()[k - 1]) return std::string("increasing");
    if (v > std::exp(-na(km.knots()[k])) * (1.0 + 1e-15)) return "above exp(-NA) at knot " + std::to_string(k);
  }
  return std::nullopt;
}

Failure weighted_constant(Rng& rng) {
  const auto obs = random_observations(rng, {1, 80, 0.3});
  const double eps = uniform_real(rng, 0.01, 0.5);
  const double c = uniform_real(rng, 0.0, 1.0);
  const auto weighted = weighted_nelson_aalen(obs, [c](std::size_t, double) { return c; }, eps);
  return curves_close(weighted, nelson_aalen(obs), 1e-12);
}

Failure order_invariance(Rng& rng) {
  auto obs = random_observations(rng, {1, 80, 0.3});
  std::vector<double> g(obs.size());
  for (auto& v : g) v = uniform_real(rng, 0.0, 1.0);
  const auto na = nelson_aalen(obs);
  const auto km = kaplan_meier(obs);
  const auto wna = weighted_nelson_aalen(obs, [&](std::size_t i, double s) { return std::exp(-s * g[i]); }, 0.05);

  std::vector<std::size_t> perm(obs.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Observation> shuffled;
  for (std::size_t p : perm) shuffled.push_back(obs[p]);
  if (!(nelson_aalen(shuffled) == na)) return std::string("Nelson-Aalen depends on order");
  if (!(kaplan_meier(shuffled) == km)) return std::string("Kaplan-Meier depends on order");
  const auto wna2 =
      weighted_nelson_aalen(shuffled, [&](std::size_t i, double s) { return std::exp(-s * g[perm[i]]); }, 0.05);
  if (auto f = curves_close(wna, wna2, 1e-12)) return "weighted: " + *f;
  return std::nullopt;
}

LifetimeLaw random_law(Rng& rng, bool allow_never) {
  const double u = uniform01(rng);
  if (allow_never && u < 0.15) return LifetimeLaw(NeverLaw{});
  if (u < 0.6) return LifetimeLaw(ExponentialLaw{uniform_real(rng, 0.3, 3.0)});
  return LifetimeLaw(LogNormalLaw{uniform_real(rng, -1.0, 1.0), uniform_real(rng, 0.5, 1.5)});
}

Failure contaminated_refinement(Rng& rng) {
  const std::size_t k = uniform_between(rng, 1, 4);
  std::vector<LifetimeLaw> f;
  std::vector<LifetimeLaw> g;
  for (std::size_t i = 0; i < k; ++i) {
    f.push_back(random_law(rng, false));
    g.push_back(random_law(rng, true));
  }
  const double tau = uniform_real(rng, 0.5, 3.0);
  const auto coarse = contaminated_chf(f, g, uniform_grid(tau, 1024));
  const auto fine = contaminated_chf(f, g, uniform_grid(tau, 2047));
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const double diff = std::abs(coarse.values()[i] - fine.values()[2 * i]);
    if (diff > 1e-4 * std::max(1.0, fine.values()[2 * i])) return "refinement moved the value by " + std::to_string(diff);
  }
  return std::nullopt;
}

// -- censoring --

Failure censoring_survival_shape(Rng& rng) {
  const std::size_t dim = uniform_between(rng, 1, 3);
  const Dataset data = random_dataset(rng, uniform_between(rng, 10, 50), dim);
  CensoringModel model;
  switch (uniform_index(rng, 4)) {
    case 0: break;
    case 1: model = fit_censoring_km(data); break;
    case 2: model = covariate_censoring(uniform_index(rng, dim)); break;
    default: {
      ForestConfig c;
      c.n_trees = 2;
      c.censoring = CensoringKind::None;
      c.stop = {4, 1};
      c.seed = rng();
      model = fit_censoring_forest(data, c);
    }
  }
  std::vector<double> x(dim);
  for (auto& v : x) v = standard_normal(rng);
  double previous = 1.0;
  for (double t : probe_times(rng, {}, 30)) {
    const double s = model.survival_at(t, x);
    if (s < 0.0 || s > 1.0) return "outside [0, 1]: " + std::to_string(s);
    if (s > previous) return "increasing at t=" + std::to_string(t);
    previous = s;
  }
  return std::nullopt;
}

Failure ipcw_clamp(Rng& rng) {
  const std::size_t dim = uniform_between(rng, 1, 3);
  const Dataset data = random_dataset(rng, uniform_between(rng, 5, 60), dim);
  const double eps = uniform_real(rng, 1e-3, 0.5);
  const CensoringModel model = uniform01(rng) < 0.5 ? fit_censoring_km(data) : covariate_censoring(dim - 1);
  const IpcwWeights w(data, model, eps);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < w.event_times().size(); ++k) {
      const double s = w.survival(i, k);
      const double wt = w.weight(i, k);
      if (s < 0.0 || s > 1.0) return "survival outside [0, 1]";
      if (wt < 1.0 || wt > 1.0 / eps * (1.0 + 1e-15)) return "weight outside [1, 1/eps]: " + std::to_string(wt);
      if (wt != 1.0 / std::max(eps, s)) return std::string("weight is not 1/max(eps, 1-G)");
    }
  }
  return std::nullopt;
}

Failure no_censoring_equivalence(Rng& rng) {
  const std::size_t dim = uniform_between(rng, 1, 3);
  const Dataset data = random_dataset(rng, uniform_between(rng, 6, 50), dim, uniform01(rng) < 0.5);
  const auto rows = random_rows(rng, data.size(), uniform01(rng) < 0.5);
  const NodeSamples node{data, rows};
  const CensoringModel none;
  const double eps = uniform_real(rng, 0.01, 0.3);
  const auto obs = node.observations();
  const auto weighted = weighted_nelson_aalen(
      obs, [&](std::size_t i, double s) { return none.survival_at(s, data.row(rows[i])); }, eps);
  if (auto f = curves_close(weighted, nelson_aalen(obs), 0.0)) return "terminal estimator: " + *f;
  const std::size_t j = uniform_index(rng, dim);
  const double tau = uniform01(rng) < 0.5 ? std::numeric_limits<double>::infinity() : uniform_real(rng, 0.1, 2.0);
  for (double c : candidate_cutpoints(node, j, ChildMinimum{1, 1})) {
    const double d1 = delta1(node, j, c, tau);
    const double d2 = delta2(node, j, c, tau, none, eps);
    if (d1 != d2) return "delta2 differs from delta1 at c=" + std::to_string(c) + ": " + describe(d2, d1);
  }
  return std::nullopt;
}

// -- splitting --

struct SplitCase {
  Dataset data;
  std::vector<std::size_t> rows;
  SplitSettings settings;
  std::unique_ptr<IpcwWeights> weights;
};

SplitCase random_split_case(Rng& rng, bool allow_random, bool allow_theoretical) {
  const std::size_t dim = uniform_between(rng, 1, 4);
  SplitCase sc{random_dataset(rng, uniform_between(rng, 4, 60), dim, uniform01(rng) < 0.4), {}, {}, nullptr};
  sc.rows = random_rows(rng, sc.data.size(), uniform01(rng) < 0.4);
  do {
    sc.settings.rule.kind = random_kind(rng);
  } while (!allow_random && sc.settings.rule.kind == SplitKind::Random);
  if (allow_theoretical && sc.settings.rule.kind != SplitKind::Random && uniform01(rng) < 0.3) {
    sc.settings.rule.theoretical = true;
    sc.settings.rule.threshold = uniform_real(rng, 0.0, 1.0);
  }
  sc.settings.mtry = uniform_between(rng, 1, dim);
  sc.settings.minimum = {uniform_between(rng, 1, 5), uniform_between(rng, 1, 2)};
  sc.settings.tau = uniform01(rng) < 0.5 ? std::numeric_limits<double>::infinity() : uniform_real(rng, 0.2, 3.0);
  if (sc.settings.rule.kind == SplitKind::BiasCorrectedChf) {
    const CensoringModel model = uniform01(rng) < 0.3 ? fit_censoring_km(sc.data) : covariate_censoring(dim - 1);
    sc.weights = std::make_unique<IpcwWeights>(sc.data, model, uniform_real(rng, 0.01, 0.2));
    sc.settings.weights = sc.weights.get();
  }
  return sc;
}

Failure monotone_equivariance(Rng& rng) {
  auto sc = random_split_case(rng, true, true);
  const std::size_t j = uniform_index(rng, sc.data.dim());
  static const std::function<double(double)> transforms[] = {
      [](double v) { return 2.0 * v + 5.0; },
      [](double v) { return v * v * v + v; },
      [](double v) { return std::exp(v / 2.0); },
      [](double v) { return std::atan(v); },
  };
  const Dataset moved = transformed(sc.data, j, transforms[uniform_index(rng, 4)]);
  const std::uint64_t seed = rng();
  Rng r1(seed);
  Rng r2(seed);
  const auto a = best_split(NodeSamples{sc.data, sc.rows}, sc.settings, r1);
  const auto b = best_split(NodeSamples{moved, sc.rows}, sc.settings, r2);
  if (a.has_value() != b.has_value()) return std::string("admissibility changed");
  if (!a) return std::nullopt;
  if (a->variable != b->variable) return std::string("selected variable changed");
  if (left_rows(sc.data, sc.rows, *a) != left_rows(moved, sc.rows, *b)) return std::string("partition changed");
  return std::nullopt;
}

Failure score_symmetry(Rng& rng) {
  const std::size_t dim = uniform_between(rng, 1, 3);
  const Dataset data = random_dataset(rng, uniform_between(rng, 4, 50), dim, uniform01(rng) < 0.4);
  const auto rows = random_rows(rng, data.size(), uniform01(rng) < 0.4);
  const std::size_t j = uniform_index(rng, dim);
  const Dataset flipped = transformed(data, j, [](double v) { return -v; });
  const NodeSamples a{data, rows};
  const NodeSamples b{flipped, rows};
  const double tau = uniform01(rng) < 0.5 ? std::numeric_limits<double>::infinity() : uniform_real(rng, 0.2, 3.0);
  const CensoringModel model = dim > 1 ? covariate_censoring((j + 1) % dim) : fit_censoring_km(data);
  for (double c : candidate_cutpoints(a, j, ChildMinimum{1, 1})) {
    const double pairs[3][2] = {{delta1(a, j, c, tau), delta1(b, j, -c, tau)},
                                {delta2(a, j, c, tau, model, 0.05), delta2(b, j, -c, tau, model, 0.05)},
                                {logrank_stat(a, j, c), logrank_stat(b, j, -c)}};
    for (const auto& p : pairs) {
      if (!(p[0] >= 0.0) || !std::isfinite(p[0])) return "negative or non-finite score " + std::to_string(p[0]);
      if (!close(p[0], p[1], 1e-10)) return "child exchange changed the score: " + describe(p[0], p[1]);
    }
  }
  return std::nullopt;
}

double reference_score(const NodeSamples& node, std::size_t j, double c, const SplitSettings& s,
                       const CensoringModel& model) {
  switch (s.rule.kind) {
    case SplitKind::LogRank: return logrank_stat(node, j, c);
    case SplitKind::MarginalChf: return delta1(node, j, c, s.tau);
    default: return delta2(node, j, c, s.tau, model, s.weights->epsilon());
  }
}

Failure best_split_dominates(Rng& rng) {
  const std::size_t dim = uniform_between(rng, 1, 3);
  const Dataset data = random_dataset(rng, uniform_between(rng, 4, 40), dim, uniform01(rng) < 0.4);
  const auto rows = random_rows(rng, data.size(), uniform01(rng) < 0.4);
  const NodeSamples node{data, rows};
  SplitSettings s;
  constexpr SplitKind kinds[] = {SplitKind::LogRank, SplitKind::MarginalChf, SplitKind::BiasCorrectedChf};
  s.rule.kind = kinds[uniform_index(rng, 3)];
  s.mtry = dim;
  s.minimum = {uniform_between(rng, 1, 4), uniform_between(rng, 1, 2)};
  s.tau = uniform01(rng) < 0.5 ? std::numeric_limits<double>::infinity() : uniform_real(rng, 0.2, 3.0);
  const CensoringModel model = uniform01(rng) < 0.3 ? fit_censoring_km(data) : covariate_censoring(dim - 1);
  const IpcwWeights weights(data, model, uniform_real(rng, 0.01, 0.2));
  s.weights = &weights;

  double best = -1.0;
  for (std::size_t j = 0; j < dim; ++j) {
    for (double c : candidate_cutpoints(node, j, s.minimum)) best = std::max(best, reference_score(node, j, c, s, model));
  }
  const auto chosen = best_split(node, s, rng);
  if (best < 0.0) return chosen ? std::optional<std::string>("split returned without admissible cutpoints") : std::nullopt;
  if (!chosen) return std::string("no split returned although cutpoints are admissible");
  if (!close(chosen->score, best, 1e-9)) return "chosen score vs exhaustive maximum " + describe(chosen->score, best);
  const double recomputed = reference_score(node, chosen->variable, chosen->cutpoint, s, model);
  if (!close(recomputed, chosen->score, 1e-9)) return "score not reproduced by the reference " + describe(chosen->score, recomputed);
  return std::nullopt;
}

Failure split_determinism(Rng& rng) {
  auto sc = random_split_case(rng, true, true);
  const std::uint64_t seed = rng();
  Rng r1(seed);
  Rng r2(seed);
  const auto a = best_split(NodeSamples{sc.data, sc.rows}, sc.settings, r1);
  const auto b = best_split(NodeSamples{sc.data, sc.rows}, sc.settings, r2);
  if (a != b) return std::string("repeated call disagrees");
  if (a && a->left_count + a->right_count != sc.rows.size()) return std::string("child counts do not add up");
  if (a && (a->left_count < sc.settings.minimum.samples || a->right_count < sc.settings.minimum.samples)) {
    return std::string("child below the minimum size");
  }
  return std::nullopt;
}

// -- kernels --

Failure kernel_equivalence(Rng& rng) {
  const std::size_t count = uniform_between(rng, 0, 41);
  std::vector<double> y(count), yl(count), d(count), dl(count), acc(count), src(count);
  for (std::size_t k = 0; k < count; ++k) {
    y[k] = static_cast<double>(uniform_between(rng, 2, 200)) * (uniform01(rng) < 0.3 ? uniform_real(rng, 0.5, 3.0) : 1.0);
    yl[k] = y[k] * uniform_real(rng, 0.05, 0.95);
    d[k] = std::floor(uniform_real(rng, 0.0, std::min(y[k], 4.0)));
    dl[k] = std::min(d[k], std::floor(uniform_real(rng, 0.0, d[k] + 1.0)));
    acc[k] = uniform_real(rng, -5.0, 5.0);
    src[k] = uniform_real(rng, -5.0, 5.0);
  }
  const double value = uniform_real(rng, -2.0, 2.0);
  const auto& ref = simd::table(simd::Isa::Scalar);
  for (auto isa : {simd::Isa::Avx2, simd::Isa::Neon}) {
    if (!simd::supported(isa)) continue;
    const auto& t = simd::table(isa);
    auto a1 = acc, a2 = acc;
    ref.add_constant(a1.data(), value, count);
    t.add_constant(a2.data(), value, count);
    ref.add(a1.data(), src.data(), count);
    t.add(a2.data(), src.data(), count);
    ref.scale(a1.data(), value, count);
    t.scale(a2.data(), value, count);
    if (a1 != a2) return std::string(simd::name(isa)) + " elementwise kernels differ";
    const auto l1 = ref.logrank_sums(yl.data(), dl.data(), y.data(), d.data(), count);
    const auto l2 = t.logrank_sums(yl.data(), dl.data(), y.data(), d.data(), count);
    if (!close(l1.observed_minus_expected, l2.observed_minus_expected, 1e-12) || !close(l1.variance, l2.variance, 1e-12)) {
      return std::string(simd::name(isa)) + " log-rank sums differ";
    }
    const double g1 = ref.sup_abs_hazard_gap(yl.data(), dl.data(), y.data(), d.data(), count);
    const double g2 = t.sup_abs_hazard_gap(yl.data(), dl.data(), y.data(), d.data(), count);
    if (!close(g1, g2, 1e-12)) return std::string(simd::name(isa)) + " hazard gap differs: " + describe(g1, g2);
  }
  return std::nullopt;
}

// -- tree --

struct TreeCase {
  Dataset data;
  std::vector<std::size_t> rows;
  TreeConfig config;
  std::unique_ptr<IpcwWeights> weights;
};

TreeCase random_tree_case(Rng& rng, bool bootstrap) {
  const std::size_t dim = uniform_between(rng, 1, 4);
  TreeCase tc{random_dataset(rng, uniform_between(rng, 10, 80), dim, uniform01(rng) < 0.3), {}, {}, nullptr};
  tc.rows = random_rows(rng, tc.data.size(), bootstrap && uniform01(rng) < 0.6);
  tc.config.rule.kind = random_kind(rng);
  tc.config.mtry = uniform_between(rng, 1, dim);
  tc.config.alpha.alpha = std::array{0.0, 0.05, 0.15}[uniform_index(rng, 3)];
  tc.config.stop.min_node_events = uniform_between(rng, 1, 3);
  tc.config.stop.min_node_samples = uniform_between(rng, tc.config.stop.min_node_events, 6);
  tc.config.terminal = uniform01(rng) < 0.5 ? TerminalEstimator::NelsonAalen : TerminalEstimator::WeightedNelsonAalen;
  tc.config.tau = uniform01(rng) < 0.5 ? std::numeric_limits<double>::infinity() : uniform_real(rng, 0.3, 3.0);
  if (tc.config.rule.kind == SplitKind::BiasCorrectedChf || tc.config.terminal == TerminalEstimator::WeightedNelsonAalen) {
    const CensoringModel model = uniform01(rng) < 0.3 ? fit_censoring_km(tc.data) : covariate_censoring(dim - 1);
    tc.weights = std::make_unique<IpcwWeights>(tc.data, model, uniform_real(rng, 0.01, 0.2));
  }
  return tc;
}

Failure router_partition(Rng& rng) {
  auto tc = random_tree_case(rng, true);
  const Tree tree = grow_tree(NodeSamples{tc.data, tc.rows}, tc.config, tc.weights.get(), rng);
  const std::size_t dim = tc.data.dim();
  struct Box {
    std::size_t node;
    std::vector<double> lo, hi;
  };
  std::vector<Box> leaves;
  std::vector<Box> stack{{0, std::vector<double>(dim, -INFINITY), std::vector<double>(dim, INFINITY)}};
  std::vector<double> cuts;
  while (!stack.empty()) {
    Box b = std::move(stack.back());
    stack.pop_back();
    const auto& n = tree.nodes[b.node];
    if (n.terminal()) {
      leaves.push_back(std::move(b));
      continue;
    }
    const auto& s = n.split();
    cuts.push_back(s.cutpoint);
    Box l = b, r = b;
    l.node = s.left;
    l.hi[s.variable] = std::min(l.hi[s.variable], s.cutpoint);
    r.node = s.right;
    r.lo[s.variable] = std::max(r.lo[s.variable], s.cutpoint);
    stack.push_back(std::move(l));
    stack.push_back(std::move(r));
  }
  if (leaves.size() != tree.terminal_count()) return std::string("terminal count mismatch");
  std::vector<double> x(dim);
  for (int probe = 0; probe < 25; ++probe) {
    for (auto& v : x) {
      v = !cuts.empty() && uniform01(rng) < 0.4 ? cuts[uniform_index(rng, cuts.size())] : 2.0 * standard_normal(rng);
    }
    std::size_t hits = 0;
    std::size_t hit = 0;
    for (const auto& b : leaves) {
      bool inside = true;
      for (std::size_t j = 0; j < dim; ++j) inside = inside && b.lo[j] <= x[j] && x[j] < b.hi[j];
      if (inside) {
        ++hits;
        hit = b.node;
      }
    }
    if (hits != 1) return "probe lies in " + std::to_string(hits) + " terminal regions";
    if (tree.route(x) != hit) return std::string("router disagrees with the region");
  }
  return std::nullopt;
}

Failure tree_row_order(Rng& rng) {
  auto tc = random_tree_case(rng, false);
  auto shuffled = tc.rows;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const std::uint64_t seed = rng();
  Rng r1(seed);
  Rng r2(seed);
  const Tree a = grow_tree(NodeSamples{tc.data, tc.rows}, tc.config, tc.weights.get(), r1);
  const Tree b = grow_tree(NodeSamples{tc.data, shuffled}, tc.config, tc.weights.get(), r2);
  if (a.nodes.size() != b.nodes.size()) return std::string("node count changed");
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const auto& na = a.nodes[i];
    const auto& nb = b.nodes[i];
    if (na.parent != nb.parent || na.sample_count != nb.sample_count || na.event_count != nb.event_count ||
        na.terminal() != nb.terminal()) {
      return "node " + std::to_string(i) + " differs";
    }
    if (na.terminal()) {
      if (auto f = curves_close(na.leaf().chf, nb.leaf().chf, 1e-12)) return "leaf " + std::to_string(i) + ": " + *f;
    } else if (na.split().variable != nb.split().variable || na.split().cutpoint != nb.split().cutpoint) {
      return "split " + std::to_string(i) + " differs (" + to_string(tc.config.rule.kind) + ", variable " +
             std::to_string(na.split().variable) + " at " + format_double(na.split().cutpoint) + " vs " +
             std::to_string(nb.split().variable) + " at " + format_double(nb.split().cutpoint) + ")";
    }
  }
  return std::nullopt;
}

Failure terminal_recompute(Rng& rng) {
  auto tc = random_tree_case(rng, true);
  const Tree tree = grow_tree(NodeSamples{tc.data, tc.rows}, tc.config, tc.weights.get(), rng);
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t r : tc.rows) members[tree.route(tc.data.row(r))].push_back(r);
  for (const auto& [leaf, rows] : members) {
    const auto obs = NodeSamples{tc.data, rows}.observations();
    const auto& stored = tree.nodes[leaf].leaf().chf;
    if (tc.config.terminal == TerminalEstimator::NelsonAalen) {
      if (!(stored == nelson_aalen(obs))) return "terminal " + std::to_string(leaf) + " is not Nelson-Aalen of its samples";
      continue;
    }
    const auto& w = *tc.weights;
    const auto expected = weighted_nelson_aalen(
        obs, [&](std::size_t i, double s) { return w.survival(rows[i], w.time_index(s)); }, w.epsilon());
    if (auto f = curves_close(stored, expected, 1e-12)) return "terminal " + std::to_string(leaf) + ": " + *f;
  }
  return std::nullopt;
}

Failure tree_audit(Rng& rng) {
  auto tc = random_tree_case(rng, true);
  const Tree tree = grow_tree(NodeSamples{tc.data, tc.rows}, tc.config, tc.weights.get(), rng);
  const auto v = audit_tree(tree, NodeSamples{tc.data, tc.rows}, tc.config);
  if (!v.empty()) return "node " + std::to_string(v.front().node) + ": " + v.front().message;
  const auto v2 = audit_tree(tree, tc.config, tc.data.dim());
  if (!v2.empty()) return "stored counts: " + v2.front().message;
  return std::nullopt;
}

// -- forest --

std::vector<double> random_point(Rng& rng, std::size_t dim) {
  std::vector<double> x(dim);
  for (auto& v : x) v = 1.5 * standard_normal(rng);
  return x;
}

Failure forest_chf_shape(Rng& rng) {
  const Forest forest = random_forest(rng);
  const auto x = random_point(rng, forest.dim());
  const auto grid = probe_times(rng, forest.grid(), 10);
  const auto chf = predict_chf(forest, x, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double v = chf.values()[k];
    if (k > 0 && v < chf.values()[k - 1]) return "decreasing at t=" + std::to_string(grid[k]);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& t : forest.trees()) {
      lo = std::min(lo, t.chf(x)(grid[k]));
      hi = std::max(hi, t.chf(x)(grid[k]));
    }
    if (v < lo * (1 - 1e-12) || v > hi * (1 + 1e-12)) return "outside the range of its trees at t=" + std::to_string(grid[k]);
  }
  return std::nullopt;
}

Failure forest_tree_order(Rng& rng) {
  const Forest forest = random_forest(rng, 6);
  auto trees = forest.trees();
  std::shuffle(trees.begin(), trees.end(), rng);
  const Forest permuted(trees, forest.config(), forest.censor_model_ptr(), forest.dim(), forest.tau(), forest.grid());
  for (int probe = 0; probe < 5; ++probe) {
    const auto x = random_point(rng, forest.dim());
    if (auto f = curves_close(predict_chf(forest, x), predict_chf(permuted, x), 1e-12)) return *f;
  }
  return std::nullopt;
}

// -- scenarios / evaluation --

ScenarioSpec random_spec(Rng& rng) {
  constexpr ScenarioId ids[] = {ScenarioId::Motivating, ScenarioId::Scenario1, ScenarioId::Scenario2};
  ScenarioSpec spec;
  spec.id = ids[uniform_index(rng, 3)];
  spec.censoring = uniform01(rng) < 0.5 ? CensoringType::Dependent : CensoringType::Independent;
  spec.rho = uniform_real(rng, -0.9, 0.9);
  return spec;
}

Failure true_survival_shape(Rng& rng) {
  const auto spec = random_spec(rng);
  const auto x = draw_covariates(spec, rng);
  if (true_survival(spec, x, 0.0) != 1.0) return std::string("S(0) != 1");
  double previous = 1.0;
  for (double t : probe_times(rng, {}, 40)) {
    const double s = true_survival(spec, x, t * 5.0);
    if (s < 0.0 || s > 1.0 || s > previous) return "not a survival function at t=" + std::to_string(t * 5.0);
    previous = s;
  }
  return std::nullopt;
}

Failure mse_shape(Rng& rng) {
  auto spec = random_spec(rng);
  spec.n = uniform_between(rng, 20, 50);
  const auto train = generate(spec, rng);
  ForestConfig c;
  c.n_trees = 2;
  c.stop = {4, 2};
  c.seed = rng();
  const Forest forest = fit_forest(train.dataset, c, ExecutionOptions{1});
  spec.n = uniform_between(rng, 1, 10);
  const auto test = generate(spec, rng);
  const auto grid = probe_times(rng, {}, uniform_between(rng, 1, 8));
  const double m1 = mse_survival(forest, test.dataset, spec, grid);
  const double m3 = mse_survival(forest, test.dataset, spec, grid, 3.0);
  if (!(m1 >= 0.0)) return "negative mse " + std::to_string(m1);
  if (!close(m3, 3.0 * m1, 1e-12)) return "mse not linear in its scale";
  return std::nullopt;
}

// -- io --

double wild_double(Rng& rng) {
  switch (uniform_index(rng, 4)) {
    case 0: return 0.0;
    case 1: return standard_normal(rng);
    case 2: return std::ldexp(uniform_real(rng, -1.0, 1.0), static_cast<int>(uniform_between(rng, 0, 2000)) - 1000);
    default: return std::nextafter(uniform_real(rng, -1e6, 1e6), INFINITY);
  }
}

Failure csv_round_trip(Rng& rng) {
  const std::size_t dim = uniform_between(rng, 1, 5);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < dim; ++j) names.push_back("v" + std::to_string(j) + "_" + std::to_string(rng() % 1000));
  Dataset data(dim, names);
  const std::size_t n = uniform_between(rng, 1, 30);
  std::vector<double> x(dim);
  std::vector<double> latent_t, latent_c;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = wild_double(rng);
    data.add(std::abs(wild_double(rng)), uniform01(rng) < 0.5, x);
    latent_t.push_back(uniform01(rng));
    latent_c.push_back(uniform01(rng));
  }
  const bool latent = uniform01(rng) < 0.3;
  std::istringstream in(latent ? csv_text(data, &latent_t, &latent_c) : csv_text(data));
  const Dataset back = read_csv(in);
  if (back.size() != n || back.dim() != dim || back.feature_names() != names) return std::string("shape changed");
  for (std::size_t i = 0; i < n; ++i) {
    if (back.time(i) != data.time(i) || back.event(i) != data.event(i)) return "row " + std::to_string(i) + " changed";
    for (std::size_t j = 0; j < dim; ++j) {
      if (back.x(i, j) != data.x(i, j)) return "value " + describe(back.x(i, j), data.x(i, j));
    }
  }
  return std::nullopt;
}

Failure model_round_trip(Rng& rng) {
  const Forest forest = random_forest(rng);
  const std::string text = model_json(forest);
  const Forest back = parse_model(text);
  if (model_json(back) != text) return std::string("re-serialized text differs");
  for (int probe = 0; probe < 5; ++probe) {
    const auto x = random_point(rng, forest.dim());
    if (!(predict_chf(forest, x) == predict_chf(back, x))) return std::string("predictions differ after reload");
  }
  return std::nullopt;
}

using nlohmann::ordered_json;

/// Applies one invariant-breaking edit; returns its description.
std::string mutate(ordered_json& j, Rng& rng) {
  auto& trees = j["trees"];
  auto& tree = trees[uniform_index(rng, trees.size())];
  std::vector<std::size_t> splits, leaves;
  for (std::size_t i = 0; i < tree.size(); ++i) (tree[i].contains("knots") ? leaves : splits).push_back(i);
  const std::size_t dim = j["dim"].get<std::size_t>();
  for (;;) {
    switch (uniform_index(rng, 22)) {
      case 0: j["version"] = 2; return "version";
      case 1: j["format"] = "other-model"; return "format";
      case 2: j["unexpected"] = 1; return "unknown top-level key";
      case 3: {
        static const char* keys[] = {"format", "version", "dim", "tau", "config", "grid", "censoring", "trees"};
        const char* k = keys[uniform_index(rng, 8)];
        j.erase(k);
        return std::string("missing ") + k;
      }
      case 4: j["dim"] = 0; return "dim 0";
      case 5: j["tau"] = -uniform_real(rng, 0.0, 1.0); return "non-positive tau";
      case 6:
        if (j["grid"].empty()) break;
        j["grid"].push_back(j["grid"].back());
        return "repeated grid time";
      case 7: j["config"]["n_trees"] = j["config"]["n_trees"].get<std::size_t>() + 1; return "n_trees mismatch";
      case 8: j["config"]["bogus"] = true; return "unknown config key";
      case 9: j["config"]["alpha"] = 0.7; return "alpha out of range";
      case 10: j["config"]["split_rule"] = "median"; return "unknown split rule";
      case 11: j["config"]["mtry"] = dim + 1; return "mtry above dim";
      case 12:
        j["censoring"]["kind"] = j["censoring"]["kind"] == "none" ? "km" : "none";
        return "censoring kind mismatch";
      case 13: tree.back()["parent"] = tree.size(); return "forward parent link";
      case 14: tree[0]["samples"] = 0; return "zero samples";
      case 15: {
        auto& n = tree[uniform_index(rng, tree.size())];
        n["events"] = n["samples"].get<std::size_t>() + 1;
        return "more events than samples";
      }
      case 16: {
        auto& chf = tree[leaves[uniform_index(rng, leaves.size())]]["chf"];
        if (chf.empty()) break;
        chf.back() = -1.0;
        return "decreasing terminal chf";
      }
      case 17: {
        auto& leaf = tree[leaves[uniform_index(rng, leaves.size())]];
        leaf["knots"].push_back(1e300);
        return "knot/value length mismatch";
      }
      case 18:
        if (splits.empty()) break;
        tree[splits[uniform_index(rng, splits.size())]]["left"] = tree.size();
        return "child link out of range";
      case 19:
        if (splits.empty()) break;
        tree[splits[uniform_index(rng, splits.size())]]["variable"] = dim;
        return "split variable out of range";
      case 20:
        if (splits.empty()) break;
      {
        auto& n = tree[splits[uniform_index(rng, splits.size())]];
        n["samples"] = n["samples"].get<std::size_t>() + 1 + uniform_index(rng, 5);
        return "child counts do not add up";
      }
      default:
        trees.erase(trees.size() - 1);
        return "missing tree";
    }
  }
}

Failure model_mutation(Rng& rng) {
  const Forest forest = random_forest(rng, 3);
  auto j = ordered_json::parse(model_json(forest));
  const std::string what = mutate(j, rng);
  try {
    parse_model(j.dump());
  } catch (const ModelFormatError&) {
    return std::nullopt;
  }
  return "accepted a model with " + what;
}

}  // namespace

std::vector<NamedProperty> property_catalogue() {
  return {
      {"nelson-aalen matches the counting oracle", na_matches_counting},
      {"nelson-aalen is zero before the first event and increasing", na_shape},
      {"kaplan-meier is a survival curve below exp(-nelson-aalen)", km_shape},
      {"constant weights reduce weighted nelson-aalen to nelson-aalen", weighted_constant},
      {"estimators are invariant to input order", order_invariance},
      {"contaminated chf is stable under grid refinement", contaminated_refinement},
      {"censoring survival is non-increasing in [0, 1]", censoring_survival_shape},
      {"ipcw weights are 1/max(eps, 1-G) within [1, 1/eps]", ipcw_clamp},
      {"no censoring model: weighted statistics equal unweighted ones", no_censoring_equivalence},
      {"split partitions are invariant under monotone transforms", monotone_equivariance},
      {"split scores are non-negative and symmetric in the children", score_symmetry},
      {"best split attains the exhaustive maximum", best_split_dominates},
      {"best split is deterministic and respects the child minimum", split_determinism},
      {"simd kernels agree with the scalar reference", kernel_equivalence},
      {"terminal regions partition the covariate space", router_partition},
      {"tree structure is invariant to training row order", tree_row_order},
      {"terminal chf equals its recomputed estimator", terminal_recompute},
      {"grown trees pass the structural audit", tree_audit},
      {"forest chf is non-decreasing and within its trees' range", forest_chf_shape},
      {"forest prediction is invariant to tree order", forest_tree_order},
      {"true survival is non-increasing from 1", true_survival_shape},
      {"mse is non-negative and linear in its scale", mse_shape},
      {"csv round trip preserves every value", csv_round_trip},
      {"model round trip preserves text and predictions", model_round_trip},
      {"single-field model mutations are rejected", model_mutation},
      {"product-limit vs exp(-cumulative hazard) bound",
       [](Rng& rng) -> Failure {
         const auto obs = random_observations(rng, {3, 200, 0.0});
         std::string detail;
         if (km_na_bound_violations(obs, &detail) > 0) return detail;
         return std::nullopt;
       }},
  };
}

}  // namespace survforest::testing
