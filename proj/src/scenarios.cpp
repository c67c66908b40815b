#include "survforest/scenarios.hpp"

#include <cmath>
#include <limits>

#include "survforest/error.hpp"

namespace survforest {

void ScenarioSpec::validate() const {
  if (n < 1) throw InvalidArgument("scenario sample size must be >= 1");
  if (!(rho > -1.0 && rho < 1.0)) throw InvalidArgument("rho must lie in (-1, 1)");
}

std::string to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::Motivating: return "motivating";
    case ScenarioId::Scenario1: return "scenario1";
    case ScenarioId::Scenario2: return "scenario2";
  }
  return "unknown";
}

std::string to_string(CensoringType c) { return c == CensoringType::Dependent ? "dependent" : "independent"; }

ScenarioId parse_scenario_id(const std::string& name) {
  if (name == "motivating") return ScenarioId::Motivating;
  if (name == "scenario1" || name == "s1") return ScenarioId::Scenario1;
  if (name == "scenario2" || name == "s2") return ScenarioId::Scenario2;
  throw InvalidArgument("unknown scenario '" + name + "'");
}

CensoringType parse_censoring_type(const std::string& name) {
  if (name == "dependent") return CensoringType::Dependent;
  if (name == "independent") return CensoringType::Independent;
  throw InvalidArgument("unknown censoring type '" + name + "'");
}

std::vector<double> draw_covariates(const ScenarioSpec& spec, Rng& rng) {
  std::vector<double> x(spec.dim());
  for (auto& v : x) v = standard_normal(rng);
  if (spec.id != ScenarioId::Scenario2) {
    // Cholesky factor of [[1, rho], [rho, 1]] applied to the first pair.
    x[1] = spec.rho * x[0] + std::sqrt(1.0 - spec.rho * spec.rho) * x[1];
  }
  return x;
}

LifetimeLaw failure_law(const ScenarioSpec& spec, std::span<const double> x) {
  if (x.size() != spec.dim()) throw DimensionMismatch("covariate vector does not match the scenario dimension");
  if (spec.id == ScenarioId::Scenario2) return LifetimeLaw(LogNormalLaw{x[0] + x[1] + x[2], 1.0});
  return LifetimeLaw::exponential_mean(std::exp(-1.25 * x[0] - x[2] + 2.0));
}

LifetimeLaw censoring_law(const ScenarioSpec& spec, std::span<const double> x) {
  if (x.size() != spec.dim()) throw DimensionMismatch("covariate vector does not match the scenario dimension");
  const bool dependent = spec.censoring == CensoringType::Dependent;
  if (spec.id == ScenarioId::Scenario2) {
    const double mu = dependent ? -1.0 + 2.0 * x[2] + x[3] + x[4] : -1.0 + x[3] + x[4] + 2.0 * x[5];
    return LifetimeLaw(LogNormalLaw{mu, 1.0});
  }
  return LifetimeLaw::exponential_mean(dependent ? std::exp(-3.0 * x[1]) : 2.0);
}

double true_survival(const ScenarioSpec& spec, std::span<const double> x, double t) {
  if (t <= 0.0) return 1.0;
  return failure_law(spec, x).survival(t);
}

namespace {

double draw_time(const LifetimeLaw& law, Rng& rng) {
  const auto& v = law.law();
  if (const auto* e = std::get_if<ExponentialLaw>(&v)) return exponential_mean(rng, 1.0 / e->rate);
  if (const auto* l = std::get_if<LogNormalLaw>(&v)) return std::exp(l->mu + l->sigma * standard_normal(rng));
  return std::numeric_limits<double>::infinity();
}

std::vector<std::string> feature_names(std::size_t dim) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < dim; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

GeneratedSample assemble(const ScenarioSpec& spec, const std::vector<std::vector<double>>& rows, std::uint64_t seed) {
  Rng failure_rng = make_rng(seed, {stream::kFailure});
  Rng censoring_rng = make_rng(seed, {stream::kCensoring});
  GeneratedSample out{Dataset(spec.dim(), feature_names(spec.dim())), {}, {}};
  out.failure_times.reserve(rows.size());
  out.censoring_times.reserve(rows.size());
  for (const auto& x : rows) {
    const double t = draw_time(failure_law(spec, x), failure_rng);
    const double c = draw_time(censoring_law(spec, x), censoring_rng);
    out.dataset.add(std::min(t, c), t <= c, x);
    out.failure_times.push_back(t);
    out.censoring_times.push_back(c);
  }
  return out;
}

}  // namespace

GeneratedSample generate(const ScenarioSpec& spec, Rng& rng) {
  spec.validate();
  const std::uint64_t seed = rng();
  Rng covariate_rng = make_rng(seed, {stream::kCovariates});
  std::vector<std::vector<double>> rows(spec.n);
  for (auto& x : rows) x = draw_covariates(spec, covariate_rng);
  return assemble(spec, rows, seed);
}

Region Region::full(std::size_t dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return {std::vector<double>(dim, -inf), std::vector<double>(dim, inf)};
}

bool Region::contains(std::span<const double> x) const {
  if (x.size() != lower.size() || x.size() != upper.size()) throw DimensionMismatch("region dimension mismatch");
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(x[j] >= lower[j] && x[j] < upper[j])) return false;
  }
  return true;
}

NodeLaws node_oracle_laws(const ScenarioSpec& spec, const Region& region, std::span<const double> covariates) {
  const std::size_t d = spec.dim();
  if (covariates.size() % d != 0) throw DimensionMismatch("covariate buffer is not a whole number of rows");
  NodeLaws laws;
  for (std::size_t i = 0; i < covariates.size() / d; ++i) {
    const auto x = covariates.subspan(i * d, d);
    if (!region.contains(x)) continue;
    laws.failure.push_back(failure_law(spec, x));
    laws.censoring.push_back(censoring_law(spec, x));
  }
  return laws;
}

GeneratedSample generate_in_region(const ScenarioSpec& spec, const Region& region, std::size_t n, Rng& rng) {
  spec.validate();
  const std::uint64_t seed = rng();
  Rng covariate_rng = make_rng(seed, {stream::kCovariates});
  constexpr std::size_t kMaxTriesPerRow = 100000;
  std::vector<std::vector<double>> rows;
  rows.reserve(n);
  std::size_t tries = 0;
  while (rows.size() < n) {
    auto x = draw_covariates(spec, covariate_rng);
    if (region.contains(x)) {
      rows.push_back(std::move(x));
      tries = 0;
    } else if (++tries > kMaxTriesPerRow) {
      throw InvalidArgument("region has negligible probability under the covariate law");
    }
  }
  return assemble(spec, rows, seed);
}

}  // namespace survforest
