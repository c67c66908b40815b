#include "survforest/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "survforest/error.hpp"
#include "survforest/parallel.hpp"

namespace survforest {

double mse_survival(const Forest& forest, const Dataset& test, const ScenarioSpec& spec, std::span<const double> grid,
                    double scale) {
  if (grid.empty()) throw InvalidArgument("MSE grid is empty");
  if (test.dim() != forest.dim() || test.dim() != spec.dim()) {
    throw DimensionMismatch("test covariates do not match the forest dimension");
  }
  if (test.empty()) throw InvalidArgument("empty test set");
  double sum = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto x = test.row(i);
    const auto predicted = predict_survival(forest, x, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double diff = predicted.values()[k] - true_survival(spec, x, grid[k]);
      sum += diff * diff;
    }
  }
  return scale * sum / static_cast<double>(test.size() * grid.size());
}

std::vector<double> marginal_quantile_grid(const ScenarioSpec& spec, const Dataset& covariates, double tau,
                                           std::size_t points) {
  if (points == 0) throw InvalidArgument("grid needs at least one point");
  if (covariates.empty()) throw InvalidArgument("empty covariate sample");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be positive and finite");
  std::vector<LifetimeLaw> laws;
  laws.reserve(covariates.size());
  for (std::size_t i = 0; i < covariates.size(); ++i) laws.push_back(failure_law(spec, covariates.row(i)));
  const auto marginal_cdf = [&](double t) {
    double sum = 0.0;
    for (const auto& law : laws) sum += law.cdf(t);
    return sum / static_cast<double>(laws.size());
  };
  const double top = marginal_cdf(tau);
  if (!(top > 0.0)) throw NumericalError("failure distribution has no mass before tau");
  std::vector<double> grid;
  grid.reserve(points);
  double lo = 0.0;
  for (std::size_t i = 1; i <= points; ++i) {
    if (i == points) {
      grid.push_back(tau);
      break;
    }
    const double level = top * static_cast<double>(i) / static_cast<double>(points);
    double a = lo;
    double b = tau;
    for (int it = 0; it < 60 && b - a > 1e-12 * tau; ++it) {
      const double mid = 0.5 * (a + b);
      (marginal_cdf(mid) < level ? a : b) = mid;
    }
    lo = b;
    if (grid.empty() || b > grid.back()) grid.push_back(b);
  }
  if (grid.size() > 1 && grid[grid.size() - 2] >= grid.back()) grid.erase(grid.end() - 2);
  return grid;
}

double sup_gap(const StepFunction& estimate, const std::function<double(double)>& truth, double tau) {
  double gap = 0.0;
  double before = estimate.pre_value();
  for (std::size_t k = 0; k < estimate.size() && estimate.knots()[k] < tau; ++k) {
    const double t = estimate.knots()[k];
    const double target = truth(t);
    gap = std::max({gap, std::abs(before - target), std::abs(estimate.values()[k] - target)});
    before = estimate.values()[k];
  }
  if (std::isfinite(tau)) gap = std::max(gap, std::abs(before - truth(tau)));
  return gap;
}

// ---- selection frequencies ----

std::vector<double> SelectionFrequencyReport::proportions() const {
  std::vector<double> out(counts.size(), 0.0);
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (total == 0) return out;
  for (std::size_t j = 0; j < counts.size(); ++j) out[j] = static_cast<double>(counts[j]) / static_cast<double>(total);
  return out;
}

namespace {

CensoringModel known_censoring(const ScenarioSpec& spec) {
  return CensoringModel(CensoringModel::KnownLaw{
      [spec](double s, std::span<const double> x) { return censoring_law(spec, x).survival(s); }});
}

CensoringModel root_censor_model(const ScenarioSpec& spec, const Dataset& data, std::optional<CensoringKind> kind,
                                 std::uint64_t seed) {
  const bool covariate_dependent = spec.censoring == CensoringType::Dependent || spec.id == ScenarioId::Scenario2;
  const CensoringKind k = kind ? *kind : (covariate_dependent ? CensoringKind::CensorForest : CensoringKind::GlobalKM);
  switch (k) {
    case CensoringKind::None: throw InvalidArgument("the bias-corrected rule needs a censoring model");
    case CensoringKind::GlobalKM: return fit_censoring_km(data);
    case CensoringKind::Known: return known_censoring(spec);
    case CensoringKind::CensorForest: break;
  }
  ForestConfig config;
  config.censoring = CensoringKind::None;
  config.seed = seed;
  return fit_censoring_forest(data, config, 1);
}

}  // namespace

SelectionFrequencyReport table1_harness(const ScenarioSpec& spec, const Table1Options& options) {
  options.alpha.validate();
  options.tau.validate();
  ScenarioSpec sample_spec = spec;
  sample_spec.n = options.n;
  sample_spec.validate();
  std::vector<std::optional<std::size_t>> chosen(options.reps);
  parallel_for(options.reps, resolve_threads(options.threads), [&](std::size_t r) {
    Rng data_rng = make_rng(options.seed, {stream::kReplication, r});
    const auto sample = generate(sample_spec, data_rng);
    const auto& data = sample.dataset;
    const auto rows = all_rows(data);
    const NodeSamples node{data, rows};
    SplitSettings settings;
    settings.rule.kind = options.rule;
    settings.mtry = data.dim();
    settings.minimum = {options.alpha.min_child_samples(data.size()), options.alpha.min_child_events};
    settings.tau = options.tau.resolve(data.observations());
    std::optional<IpcwWeights> weights;
    if (options.rule == SplitKind::BiasCorrectedChf) {
      const auto model = root_censor_model(spec, data, options.censoring,
                                           derive_seed(options.seed, {stream::kReplication, r, stream::kCensorForest}));
      weights.emplace(data, model, options.ipcw_epsilon);
      settings.weights = &*weights;
    }
    Rng split_rng = make_rng(options.seed, {stream::kReplication, r, stream::kTree});
    const auto best = best_split(node, settings, split_rng);
    if (best) chosen[r] = best->variable;
  });
  SelectionFrequencyReport report;
  report.spec = sample_spec;
  report.rule = options.rule;
  report.seed = options.seed;
  report.reps = options.reps;
  report.counts.assign(sample_spec.dim(), 0);
  for (const auto& c : chosen) {
    if (c) {
      ++report.counts[*c];
    } else {
      ++report.no_split;
    }
  }
  return report;
}

// ---- Table 2 ----

std::string to_string(Table2Config c) {
  switch (c) {
    case Table2Config::CC: return "C-C";
    case Table2Config::CN: return "C-N";
    case Table2Config::NC: return "N-C";
    case Table2Config::NN: return "N-N";
  }
  return "unknown";
}

namespace {

std::size_t table2_min_events(const ScenarioSpec& spec, const Table2Options& options) {
  if (options.min_events) return *options.min_events;
  return spec.id == ScenarioId::Scenario2 ? 25 : 10;
}

}  // namespace

CensoringKind table2_censoring_kind(const ScenarioSpec& spec, const Table2Options& options) {
  if (options.censoring) return *options.censoring;
  const bool covariate_dependent = spec.censoring == CensoringType::Dependent || spec.id == ScenarioId::Scenario2;
  return covariate_dependent ? CensoringKind::CensorForest : CensoringKind::GlobalKM;
}

ForestConfig table2_forest_config(const ScenarioSpec& spec, const Table2Options& options, Table2Config config) {
  const std::size_t m = table2_min_events(spec, options);
  ForestConfig out;
  out.n_trees = options.n_trees;
  out.stop = {2 * m, m};
  const bool corrected_split = config == Table2Config::CC || config == Table2Config::CN;
  const bool corrected_terminal = config == Table2Config::CC || config == Table2Config::NC;
  out.split_rule.kind = corrected_split ? SplitKind::BiasCorrectedChf : options.uncorrected_rule;
  out.terminal = corrected_terminal ? TerminalEstimator::WeightedNelsonAalen : TerminalEstimator::NelsonAalen;
  out.censoring = table2_censoring_kind(spec, options);
  out.ipcw_epsilon = options.ipcw_epsilon;
  out.tau_policy = options.tau;
  return out;
}

MseSummary MseReport::summary(Table2Config c) const {
  const auto k = static_cast<std::size_t>(c);
  MseSummary s;
  if (per_rep.empty()) return s;
  for (const auto& rep : per_rep) s.mean += rep[k];
  s.mean /= static_cast<double>(per_rep.size());
  if (per_rep.size() > 1) {
    double ss = 0.0;
    for (const auto& rep : per_rep) ss += (rep[k] - s.mean) * (rep[k] - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(per_rep.size() - 1));
  }
  return s;
}

MseReport table2_harness(const ScenarioSpec& spec, const Table2Options& options) {
  if (spec.id == ScenarioId::Motivating) throw InvalidArgument("the MSE comparison runs on scenario1 or scenario2");
  if (options.reps < 1) throw InvalidArgument("reps must be >= 1");
  MseReport report;
  report.spec = spec;
  report.spec.n = options.n_train;
  report.options = options;
  report.censoring = table2_censoring_kind(spec, options);
  report.per_rep.resize(options.reps);
  std::vector<std::size_t> violations(options.reps, 0);

  parallel_for(options.reps, resolve_threads(options.threads), [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_seed(options.seed, {stream::kReplication, r});
    ScenarioSpec train_spec = spec;
    train_spec.n = options.n_train;
    ScenarioSpec test_spec = spec;
    test_spec.n = options.n_test;
    Rng train_rng = make_rng(rep_seed, {stream::kTrain});
    Rng test_rng = make_rng(rep_seed, {stream::kTest});
    const auto train = generate(train_spec, train_rng).dataset;
    const auto test = generate(test_spec, test_rng).dataset;

    std::shared_ptr<const CensoringModel> censor_model;
    if (report.censoring == CensoringKind::GlobalKM) {
      censor_model = std::make_shared<const CensoringModel>(fit_censoring_km(train));
    } else if (report.censoring == CensoringKind::CensorForest) {
      ForestConfig censor_config = table2_forest_config(spec, options, Table2Config::NN);
      censor_config.censoring = CensoringKind::None;
      censor_config.seed = derive_seed(rep_seed, {stream::kCensorForest});
      censor_model = std::make_shared<const CensoringModel>(fit_censoring_forest(train, censor_config, 1));
    } else if (report.censoring == CensoringKind::Known) {
      censor_model = std::make_shared<const CensoringModel>(known_censoring(spec));
    }

    std::vector<double> grid;
    for (std::size_t k = 0; k < kTable2Configs.size(); ++k) {
      ForestConfig config = table2_forest_config(spec, options, kTable2Configs[k]);
      config.seed = derive_seed(rep_seed, {stream::kForest});
      const auto forest = fit_forest(train, config, config.needs_censoring_model() ? censor_model : nullptr,
                                     ExecutionOptions{1});
      violations[r] += audit_forest(forest, &train);
      if (grid.empty()) grid = marginal_quantile_grid(spec, test, forest.tau(), options.grid_points);
      report.per_rep[r][k] = mse_survival(forest, test, spec, grid, options.scale);
    }
  });
  report.audit_violations = std::accumulate(violations.begin(), violations.end(), std::size_t{0});
  return report;
}

// ---- concentration ----

std::vector<double> ConcentrationReport::mean_gaps() const {
  std::vector<double> out(options.n_grid.size(), 0.0);
  if (gaps.empty()) return out;
  for (const auto& run : gaps) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += run[k];
  }
  for (auto& v : out) v /= static_cast<double>(gaps.size());
  return out;
}

double ConcentrationReport::slope() const {
  const auto means = mean_gaps();
  const std::size_t m = means.size();
  if (m < 2) return 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double x = std::log(static_cast<double>(options.n_grid[k]));
    const double y = std::log(means[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double md = static_cast<double>(m);
  return (md * sxy - sx * sy) / (md * sxx - sx * sx);
}

double ConcentrationReport::fraction_decreasing() const {
  if (gaps.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& run : gaps) hits += run.back() < run.front() ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gaps.size());
}

ConcentrationReport concentration_harness(const ScenarioSpec& spec, const Region& region,
                                          const ConcentrationOptions& options) {
  if (options.n_grid.empty()) throw InvalidArgument("n_grid is empty");
  ConcentrationReport report;
  report.spec = spec;
  report.region = region;
  report.options = options;

  Rng pilot_rng = make_rng(options.seed, {stream::kTest});
  const auto pilot = generate_in_region(spec, region, 20000, pilot_rng);
  report.tau = TauPolicy::quantile(options.tau_quantile).resolve(pilot.dataset.observations());
  const auto oracle_grid = uniform_grid(report.tau, options.oracle_points);

  report.gaps.assign(options.runs, std::vector<double>(options.n_grid.size(), 0.0));
  parallel_for(options.runs, resolve_threads(options.threads), [&](std::size_t r) {
    for (std::size_t k = 0; k < options.n_grid.size(); ++k) {
      Rng rng = make_rng(options.seed, {stream::kReplication, r, k});
      const auto sample = generate_in_region(spec, region, options.n_grid[k], rng);
      const auto& data = sample.dataset;
      std::vector<double> covariates;
      covariates.reserve(data.size() * data.dim());
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto x = data.row(i);
        covariates.insert(covariates.end(), x.begin(), x.end());
      }
      const auto laws = node_oracle_laws(spec, region, covariates);
      const auto oracle = contaminated_chf(laws.failure, laws.censoring, oracle_grid);
      const auto estimate = nelson_aalen(data.observations());
      report.gaps[r][k] = sup_gap(estimate, [&](double t) { return interpolate(oracle, t); }, report.tau);
    }
  });
  return report;
}

// ---- IPCW check ----

double IpcwCheckReport::fraction_weighted_closer() const {
  if (weighted_gap.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < weighted_gap.size(); ++r) hits += weighted_gap[r] < unweighted_gap[r] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(weighted_gap.size());
}

IpcwCheckReport ipcw_node_check(const IpcwCheckOptions& options) {
  if (options.n < 2) throw InvalidArgument("node needs at least two samples");
  IpcwCheckReport report;
  report.options = options;
  report.weighted_gap.assign(options.runs, 0.0);
  report.unweighted_gap.assign(options.runs, 0.0);
  const auto [fa, fb] = options.failure_rates;
  const auto truth = [fa, fb](double t) { return -std::log(0.5 * std::exp(-fa * t) + 0.5 * std::exp(-fb * t)); };

  parallel_for(options.runs, resolve_threads(options.threads), [&](std::size_t r) {
    Rng rng = make_rng(options.seed, {stream::kReplication, r});
    std::vector<Observation> obs(options.n);
    std::vector<double> censor_rate(options.n);
    for (std::size_t i = 0; i < options.n; ++i) {
      const std::size_t g = uniform_index(rng, 2);
      const double t = exponential_mean(rng, 1.0 / options.failure_rates[g]);
      const double c = exponential_mean(rng, 1.0 / options.censoring_rates[g]);
      obs[i] = {std::min(t, c), t <= c};
      censor_rate[i] = options.censoring_rates[g];
    }
    const double tau = TauPolicy::quantile(options.tau_quantile).resolve(obs);
    const auto weighted = weighted_nelson_aalen(
        obs, [&](std::size_t i, double s) { return std::exp(-censor_rate[i] * s); }, options.epsilon);
    const auto plain = nelson_aalen(obs);
    report.weighted_gap[r] = sup_gap(weighted, truth, tau);
    report.unweighted_gap[r] = sup_gap(plain, truth, tau);
  });
  return report;
}

// ---- rendering ----

namespace {

using nlohmann::ordered_json;

ordered_json spec_json(const ScenarioSpec& spec) {
  return {{"scenario", to_string(spec.id)}, {"censoring", to_string(spec.censoring)}, {"n", spec.n}, {"rho", spec.rho}};
}

ordered_json report_json(const SelectionFrequencyReport& r) {
  ordered_json j = spec_json(r.spec);
  j["rule"] = to_string(r.rule);
  j["seed"] = r.seed;
  j["reps"] = r.reps;
  j["counts"] = r.counts;
  j["proportions"] = r.proportions();
  j["no_split"] = r.no_split;
  return j;
}

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string to_json(const SelectionFrequencyReport& report) { return report_json(report).dump(2) + "\n"; }

std::string to_json(std::span<const SelectionFrequencyReport> reports) {
  ordered_json j = ordered_json::array();
  for (const auto& r : reports) j.push_back(report_json(r));
  return j.dump(2) + "\n";
}

std::string to_json(const MseReport& report) {
  ordered_json j = spec_json(report.spec);
  j["seed"] = report.options.seed;
  j["reps"] = report.per_rep.size();
  j["n_train"] = report.options.n_train;
  j["n_test"] = report.options.n_test;
  j["trees"] = report.options.n_trees;
  j["grid_points"] = report.options.grid_points;
  j["scale"] = report.options.scale;
  j["ipcw_epsilon"] = report.options.ipcw_epsilon;
  j["uncorrected_rule"] = to_string(report.options.uncorrected_rule);
  j["censoring_model"] = to_string(report.censoring);
  j["audit_violations"] = report.audit_violations;
  ordered_json configs = ordered_json::object();
  for (std::size_t k = 0; k < kTable2Configs.size(); ++k) {
    const auto s = report.summary(kTable2Configs[k]);
    std::vector<double> values;
    for (const auto& rep : report.per_rep) values.push_back(rep[k]);
    configs[to_string(kTable2Configs[k])] = {{"mean", s.mean}, {"sd", s.sd}, {"per_rep", values}};
  }
  j["configurations"] = configs;
  return j.dump(2) + "\n";
}

std::string to_json(const ConcentrationReport& report) {
  ordered_json j = spec_json(report.spec);
  j["region"] = {{"lower", report.region.lower}, {"upper", report.region.upper}};
  j["seed"] = report.options.seed;
  j["runs"] = report.options.runs;
  j["tau"] = report.tau;
  j["oracle_points"] = report.options.oracle_points;
  j["n_grid"] = report.options.n_grid;
  j["mean_gaps"] = report.mean_gaps();
  j["slope"] = report.slope();
  j["fraction_decreasing"] = report.fraction_decreasing();
  j["gaps"] = report.gaps;
  return j.dump(2) + "\n";
}

std::string to_json(const IpcwCheckReport& report) {
  ordered_json j;
  j["n"] = report.options.n;
  j["runs"] = report.options.runs;
  j["seed"] = report.options.seed;
  j["failure_rates"] = report.options.failure_rates;
  j["censoring_rates"] = report.options.censoring_rates;
  j["epsilon"] = report.options.epsilon;
  j["fraction_weighted_closer"] = report.fraction_weighted_closer();
  j["weighted_gap"] = report.weighted_gap;
  j["unweighted_gap"] = report.unweighted_gap;
  return j.dump(2) + "\n";
}

std::string to_text(std::span<const SelectionFrequencyReport> reports) {
  if (reports.empty()) return "";
  const auto& first = reports.front();
  std::string out = "Selection frequency of the root split variable (" + to_string(first.spec.id) + ", rule " +
                    to_string(first.rule) + ", n=" + std::to_string(first.spec.n) + ", R=" +
                    std::to_string(first.reps) + ", seed " + std::to_string(first.seed) + ")\n";
  out += pad("censoring", 14);
  for (std::size_t j = 0; j < first.counts.size(); ++j) out += pad("X" + std::to_string(j + 1), 8);
  out += "no split\n";
  for (const auto& r : reports) {
    out += pad(to_string(r.spec.censoring), 14);
    for (double p : r.proportions()) out += pad(format("%.3f", p), 8);
    out += std::to_string(r.no_split) + "\n";
  }
  return out;
}

std::string to_text(const MseReport& report) {
  std::string out = "Mean (sd) of survival MSE: " + to_string(report.spec.id) + ", " +
                    to_string(report.spec.censoring) + " censoring, R=" + std::to_string(report.per_rep.size()) +
                    ", n=" + std::to_string(report.options.n_train) + "/" + std::to_string(report.options.n_test) +
                    ", B=" + std::to_string(report.options.n_trees) + ", censoring model " +
                    to_string(report.censoring) + ", scale " + format("%g", report.options.scale) + "\n";
  std::string header;
  std::string row;
  for (auto c : kTable2Configs) {
    const auto s = report.summary(c);
    header += pad(to_string(c), 24);
    row += pad(format("%.6g", s.mean) + " (" + format("%.3g", s.sd) + ")", 24);
  }
  out += header + "\n" + row + "\n";
  const double cc = report.summary(Table2Config::CC).mean;
  if (cc > 0.0) out += "N-N / C-C = " + format("%.4f", report.summary(Table2Config::NN).mean / cc) + "\n";
  out += "audit violations: " + std::to_string(report.audit_violations) + "\n";
  return out;
}

std::string to_text(const ConcentrationReport& report) {
  std::string out = "Sup gap between node Nelson-Aalen and the contaminated CHF (" + to_string(report.spec.id) + ", " +
                    to_string(report.spec.censoring) + " censoring, tau " + format("%.4g", report.tau) + ", " +
                    std::to_string(report.options.runs) + " runs)\n";
  out += pad("n", 10) + "mean gap\n";
  const auto means = report.mean_gaps();
  for (std::size_t k = 0; k < means.size(); ++k) {
    out += pad(std::to_string(report.options.n_grid[k]), 10) + format("%.5f", means[k]) + "\n";
  }
  out += "log-log slope " + format("%.4f", report.slope()) + ", decreasing in " +
         format("%.3f", report.fraction_decreasing()) + " of runs\n";
  return out;
}

std::string to_text(const IpcwCheckReport& report) {
  double w = 0.0;
  double u = 0.0;
  for (std::size_t r = 0; r < report.weighted_gap.size(); ++r) {
    w += report.weighted_gap[r];
    u += report.unweighted_gap[r];
  }
  const auto runs = static_cast<double>(std::max<std::size_t>(1, report.weighted_gap.size()));
  return "IPCW node check (n=" + std::to_string(report.options.n) + ", runs " + std::to_string(report.options.runs) +
         "): weighted closer in " + format("%.3f", report.fraction_weighted_closer()) + " of runs; mean sup gap " +
         format("%.5f", w / runs) + " weighted vs " + format("%.5f", u / runs) + " unweighted\n";
}

}  // namespace survforest
