// Command-line front end: fit, predict, simulate and the benchmark harnesses.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "survforest/error.hpp"
#include "survforest/evaluation.hpp"
#include "survforest/io.hpp"
#include "survforest/kernels.hpp"

using namespace survforest;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kDimension = 4, kBadModel = 5 };

/// Files written by the current command; removed again if the command fails.
class Outputs {
 public:
  void write(const std::string& path, const std::string& content) {
    write_file_atomic(path, content);
    written_.push_back(path);
  }
  void rollback() {
    for (const auto& p : written_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    written_.clear();
  }

 private:
  std::vector<std::string> written_;
};

Outputs g_outputs;

/// Writes to `path`, or to stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    g_outputs.write(path, content);
  }
}

struct Common {
  std::uint64_t seed = 1;
  std::size_t threads = 0;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--seed", common.seed, "Master seed; every command is deterministic given it")->capture_default_str();
  cmd->add_option("--threads", common.threads, "Worker threads (0 = all cores); never changes results")
      ->capture_default_str();
}

const std::vector<std::string> kSplitRules{"logrank", "delta1", "delta2", "random"};

// ---- fit ----

struct FitArgs {
  Common common;
  std::string data;
  std::string config;
  std::string out;
  std::size_t trees = 0;
  std::size_t mtry = 0;
  double alpha = 0.0;
  std::size_t min_events = 0;
  std::string split_rule;
  std::string terminal;
  std::string censoring;
  double tau_quantile = 0.0;
  bool no_bootstrap = false;
};

int run_fit(const FitArgs& a, const CLI::App& cmd) {
  RunConfig rc;
  if (!a.config.empty()) rc = load_run_config(a.config);
  const auto given = [&](const char* flag) { return cmd.count(flag) > 0; };

  const std::string data_path = !a.data.empty() ? a.data : rc.data.value_or("");
  const std::string out_path = !a.out.empty() ? a.out : rc.out.value_or("");
  if (data_path.empty()) throw ConfigError("fit needs --data (or \"data\" in the config file)");
  if (out_path.empty()) throw ConfigError("fit needs --out (or \"out\" in the config file)");

  const Dataset data = read_csv(data_path);
  ForestConfig config = rc.forest;
  const bool stop_from_file = !a.config.empty() && read_file(a.config).find("min_node_") != std::string::npos;
  if (!stop_from_file) config.stop = recommended_stop_policy(data.size(), data.dim());
  if (given("--trees")) config.n_trees = a.trees;
  if (given("--mtry")) config.mtry = a.mtry;
  if (given("--alpha")) config.alpha_constraint.alpha = a.alpha;
  if (given("--min-events")) config.stop = {2 * a.min_events, a.min_events};
  if (given("--split-rule")) config.split_rule.kind = parse_split_kind(a.split_rule);
  if (given("--terminal")) config.terminal = parse_terminal(a.terminal);
  if (given("--censoring")) config.censoring = parse_censoring_kind(a.censoring);
  if (given("--tau-quantile")) config.tau_policy = TauPolicy::quantile(a.tau_quantile);
  if (given("--no-bootstrap")) config.bootstrap = false;
  if (given("--seed") || a.config.empty()) config.seed = a.common.seed;
  if (config.censoring == CensoringKind::Known) throw ConfigError("--censoring known is only available to simulations");
  config.validate(data.dim());

  const std::size_t threads = given("--threads") ? a.common.threads : rc.threads.value_or(a.common.threads);
  const Forest forest = fit_forest(data, config, ExecutionOptions{threads});
  const std::size_t violations = audit_forest(forest, &data);
  if (violations != 0) throw Error("fitted forest failed its structural audit (" + std::to_string(violations) + " violations)");
  g_outputs.write(out_path, model_json(forest));

  std::size_t leaves = 0;
  for (const auto& t : forest.trees()) leaves += t.terminal_count();
  std::printf("trees %zu  mean terminal nodes %.2f  tau %s  grid %zu  split %s  terminal %s  censoring %s\n",
              forest.trees().size(), static_cast<double>(leaves) / static_cast<double>(forest.trees().size()),
              format_double(forest.tau()).c_str(), forest.grid().size(), to_string(config.split_rule.kind).c_str(),
              to_string(config.terminal).c_str(), to_string(forest.censor_model().kind()).c_str());
  return kOk;
}

// ---- predict ----

struct PredictArgs {
  Common common;
  std::string model;
  std::string data;
  std::string grid = "model";
  std::string out;
  bool chf = false;
};

std::vector<double> parse_grid(const std::string& spec, const Forest& forest) {
  if (spec == "model") return forest.grid();
  if (spec.rfind("uniform:", 0) == 0) {
    const std::string count = spec.substr(8);
    const auto n = parse_double(count);
    if (!n || *n < 1.0 || *n != static_cast<double>(static_cast<std::size_t>(*n))) {
      throw ConfigError("uniform grid needs a positive integer count, got '" + count + "'");
    }
    const auto points = static_cast<std::size_t>(*n);
    std::vector<double> grid;
    for (std::size_t k = 1; k <= points; ++k) grid.push_back(forest.tau() * static_cast<double>(k) / static_cast<double>(points));
    return grid;
  }
  std::vector<double> grid;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_double(item);
    if (!v || !std::isfinite(*v) || *v < 0.0) throw ConfigError("grid entries must be non-negative numbers, got '" + item + "'");
    if (!grid.empty() && *v <= grid.back()) throw ConfigError("grid must be strictly increasing");
    grid.push_back(*v);
  }
  if (grid.empty()) throw ConfigError("empty grid");
  return grid;
}

int run_predict(const PredictArgs& a) {
  const Forest forest = load_model(a.model);
  const Dataset data = read_csv(a.data);
  if (data.dim() != forest.dim()) {
    throw DimensionMismatch("model expects " + std::to_string(forest.dim()) + " covariates, data has " +
                            std::to_string(data.dim()));
  }
  const auto grid = parse_grid(a.grid, forest);
  std::string out = "id";
  for (double t : grid) out += ",t=" + format_double(t);
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto chf = predict_chf(forest, data.row(i), grid);
    out += std::to_string(i);
    const auto values = a.chf ? chf.values() : na_survival(chf).values();
    for (double v : values) out += ',' + format_double(v);
    out += '\n';
  }
  emit(a.out, out);
  return kOk;
}

// ---- simulate ----

struct SimulateArgs {
  Common common;
  std::string scenario = "scenario1";
  std::string censoring = "dependent";
  std::size_t n = 400;
  double rho = 0.8;
  bool latent = false;
  std::string out;
};

int run_simulate(const SimulateArgs& a) {
  ScenarioSpec spec{parse_scenario_id(a.scenario), parse_censoring_type(a.censoring), a.n, a.rho};
  Rng rng = make_rng(a.common.seed, {stream::kReplication});
  const auto sample = generate(spec, rng);
  emit(a.out, a.latent ? csv_text(sample.dataset, &sample.failure_times, &sample.censoring_times)
                       : csv_text(sample.dataset));
  return kOk;
}

// ---- bench-table1 ----

struct Table1Args {
  Common common;
  std::string rule = "logrank";
  std::size_t n = 1000;
  std::size_t reps = 1000;
  double alpha = 0.01;
  std::string censoring_model = "auto";
  std::string json;
  std::string text;
};

int run_table1(const Table1Args& a) {
  Table1Options o;
  o.rule = parse_split_kind(a.rule);
  o.n = a.n;
  o.reps = a.reps;
  o.seed = a.common.seed;
  o.alpha.alpha = a.alpha;
  o.threads = a.common.threads;
  if (a.censoring_model != "auto") o.censoring = parse_censoring_kind(a.censoring_model);
  std::vector<SelectionFrequencyReport> reports;
  for (auto c : {CensoringType::Independent, CensoringType::Dependent}) {
    reports.push_back(table1_harness(ScenarioSpec{ScenarioId::Motivating, c, a.n}, o));
  }
  if (!a.json.empty()) g_outputs.write(a.json, to_json(reports));
  emit(a.text, to_text(reports));
  return kOk;
}

// ---- bench-table2 ----

struct Table2Args {
  Common common;
  std::string scenario = "scenario1";
  std::string censoring = "dependent";
  std::size_t reps = 100;
  std::size_t trees = 100;
  std::size_t n_train = 400;
  std::size_t n_test = 800;
  std::size_t min_events = 0;
  std::string censoring_model = "auto";
  double scale = 1.0;
  double epsilon = kDefaultIpcwEpsilon;
  std::string json;
  std::string text;
};

int run_table2(const Table2Args& a, const CLI::App& cmd) {
  ScenarioSpec spec{parse_scenario_id(a.scenario), parse_censoring_type(a.censoring)};
  Table2Options o;
  o.reps = a.reps;
  o.seed = a.common.seed;
  o.n_trees = a.trees;
  o.n_train = a.n_train;
  o.n_test = a.n_test;
  o.scale = a.scale;
  o.ipcw_epsilon = a.epsilon;
  o.threads = a.common.threads;
  if (cmd.count("--min-events") > 0) o.min_events = a.min_events;
  if (a.censoring_model != "auto") o.censoring = parse_censoring_kind(a.censoring_model);
  const auto report = table2_harness(spec, o);
  if (!a.json.empty()) g_outputs.write(a.json, to_json(report));
  emit(a.text, to_text(report));
  return kOk;
}

// ---- oracle-check ----

struct OracleArgs {
  Common common;
  std::string check = "concentration";
  std::string scenario = "scenario1";
  std::string censoring = "dependent";
  std::string region;
  std::vector<std::size_t> n_grid{100, 316, 1000, 3162, 10000};
  std::size_t runs = 100;
  std::size_t n = 5000;
  bool heterogeneous = false;
  std::string json;
  std::string text;
};

/// "x1>=0,x2<0.5" -> box; each term bounds one coordinate from below (>=) or above (<).
Region parse_region(const std::string& text, std::size_t dim) {
  Region region = Region::full(dim);
  if (text.empty() || text == "all") return region;
  std::stringstream ss(text);
  std::string term;
  while (std::getline(ss, term, ',')) {
    const auto ge = term.find(">=");
    const auto lt = term.find('<');
    const bool lower = ge != std::string::npos;
    const auto pos = lower ? ge : lt;
    if (pos == std::string::npos || term.size() < 2 || term[0] != 'x') {
      throw ConfigError("region terms look like x1>=0 or x2<0.5, got '" + term + "'");
    }
    const auto j = parse_double(term.substr(1, pos - 1));
    const auto v = parse_double(term.substr(pos + (lower ? 2 : 1)));
    if (!j || !v || *j < 1.0 || *j > static_cast<double>(dim) || *j != static_cast<double>(static_cast<std::size_t>(*j))) {
      throw ConfigError("bad region term '" + term + "'");
    }
    (lower ? region.lower : region.upper)[static_cast<std::size_t>(*j) - 1] = *v;
  }
  return region;
}

int run_oracle(const OracleArgs& a) {
  if (a.check == "ipcw") {
    IpcwCheckOptions o;
    o.n = a.n;
    o.runs = a.runs;
    o.seed = a.common.seed;
    o.threads = a.common.threads;
    if (a.heterogeneous) o.failure_rates = {1.0, 3.0};
    const auto report = ipcw_node_check(o);
    if (!a.json.empty()) g_outputs.write(a.json, to_json(report));
    emit(a.text, to_text(report));
    return kOk;
  }
  if (a.check != "concentration") throw ConfigError("--check must be concentration or ipcw");
  ScenarioSpec spec{parse_scenario_id(a.scenario), parse_censoring_type(a.censoring)};
  ConcentrationOptions o;
  o.n_grid = a.n_grid;
  o.runs = a.runs;
  o.seed = a.common.seed;
  o.threads = a.common.threads;
  const auto report = concentration_harness(spec, parse_region(a.region, spec.dim()), o);
  if (!a.json.empty()) g_outputs.write(a.json, to_json(report));
  emit(a.text, to_text(report));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "survforest: random survival forests with censoring bias correction.\n\n"
      "Reproduction recipes:\n"
      "  survforest bench-table1 --rule logrank --reps 1000        root split selection frequencies\n"
      "  survforest bench-table1 --rule delta1 --reps 1000\n"
      "  survforest bench-table2 --scenario scenario1 --censoring dependent --reps 500\n"
      "  survforest bench-table2 --scenario scenario2 --censoring dependent --reps 500\n"
      "  survforest oracle-check --scenario scenario1 --region x1>=0 --runs 100\n"
      "  survforest oracle-check --check ipcw --runs 200\n\n"
      "The four bias-correction configurations are --split-rule delta2|delta1 x --terminal ipcw|na."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "survforest 0.1.0");
  app.add_flag_callback(
      "--isa", [] { std::cout << simd::name(simd::active_isa()) << "\n"; std::exit(0); },
      "Print the SIMD kernel set selected at runtime and exit");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a forest on a CSV dataset and write the model as JSON");
  add_common(fit_cmd, fit.common);
  fit_cmd->add_option("--data", fit.data, "Training CSV (time,status,x1..xd)");
  fit_cmd->add_option("--config", fit.config, "Run configuration JSON; flags override it");
  fit_cmd->add_option("--out", fit.out, "Model output path");
  fit_cmd->add_option("--trees", fit.trees, "Number of trees B (default 100)");
  fit_cmd->add_option("--mtry", fit.mtry, "Variables drawn per split (default ceil(sqrt(d)))");
  fit_cmd->add_option("--alpha", fit.alpha, "Minimum child fraction of the parent's samples, in [0, 0.5)");
  fit_cmd->add_option("--min-events", fit.min_events,
                      "Minimum events per node (node size floor is twice this); default from k = n^(d/(d+2))");
  fit_cmd->add_option("--split-rule", fit.split_rule, "logrank | delta1 | delta2 | random (default delta1)")
      ->check(CLI::IsMember(kSplitRules));
  fit_cmd->add_option("--terminal", fit.terminal, "na | ipcw (default na)")->check(CLI::IsMember({"na", "ipcw"}));
  fit_cmd->add_option("--censoring", fit.censoring, "Censoring estimator for ipcw / delta2: km | forest (default km)")
      ->check(CLI::IsMember({"none", "km", "forest"}));
  fit_cmd->add_option("--tau-quantile", fit.tau_quantile, "tau as a quantile of observed times (default 0.9)");
  fit_cmd->add_flag("--no-bootstrap", fit.no_bootstrap, "Grow every tree on the full sample");

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Predict survival (or CHF) curves for each CSV row");
  add_common(predict_cmd, predict.common);
  predict_cmd->add_option("--model", predict.model, "Model JSON")->required();
  predict_cmd->add_option("--data", predict.data, "CSV with the same covariates as the training data")->required();
  predict_cmd->add_option("--grid", predict.grid, "model | uniform:N | comma-separated times")->capture_default_str();
  predict_cmd->add_option("--out", predict.out, "Output CSV (stdout when omitted)");
  predict_cmd->add_flag("--chf", predict.chf, "Write cumulative hazards instead of survival probabilities");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw a dataset from a simulation scenario");
  add_common(sim_cmd, sim.common);
  sim_cmd->add_option("--scenario", sim.scenario, "motivating | scenario1 | scenario2")->capture_default_str();
  sim_cmd->add_option("--censoring", sim.censoring, "dependent | independent")->capture_default_str();
  sim_cmd->add_option("--n", sim.n, "Number of records")->capture_default_str();
  sim_cmd->add_option("--rho", sim.rho, "corr(X1, X2) for the three-covariate scenarios")->capture_default_str();
  sim_cmd->add_flag("--latent", sim.latent, "Append the latent failure and censoring times");
  sim_cmd->add_option("--out", sim.out, "Output CSV (stdout when omitted)");

  Table1Args t1;
  auto* t1_cmd = app.add_subcommand("bench-table1", "Root split variable frequencies, independent vs dependent censoring");
  add_common(t1_cmd, t1.common);
  t1_cmd->add_option("--rule", t1.rule, "logrank | delta1 | delta2 | random")->check(CLI::IsMember(kSplitRules))->capture_default_str();
  t1_cmd->add_option("--n", t1.n, "Sample size per replication")->capture_default_str();
  t1_cmd->add_option("--reps", t1.reps, "Replications")->capture_default_str();
  t1_cmd->add_option("--alpha", t1.alpha, "Minimum child fraction at the root")->capture_default_str();
  t1_cmd->add_option("--censoring-model", t1.censoring_model, "auto | km | forest | known (delta2 only)")
      ->check(CLI::IsMember({"auto", "km", "forest", "known"}))->capture_default_str();
  t1_cmd->add_option("--json", t1.json, "Write the JSON report here");
  t1_cmd->add_option("--out", t1.text, "Write the text table here (stdout when omitted)");

  Table2Args t2;
  auto* t2_cmd = app.add_subcommand("bench-table2", "Survival MSE of the C-C / C-N / N-C / N-N configurations");
  add_common(t2_cmd, t2.common);
  t2_cmd->add_option("--scenario", t2.scenario, "scenario1 | scenario2")->capture_default_str();
  t2_cmd->add_option("--censoring", t2.censoring, "dependent | independent")->capture_default_str();
  t2_cmd->add_option("--reps", t2.reps, "Replications")->capture_default_str();
  t2_cmd->add_option("--trees", t2.trees, "Trees per forest")->capture_default_str();
  t2_cmd->add_option("--n-train", t2.n_train, "Training sample size")->capture_default_str();
  t2_cmd->add_option("--n-test", t2.n_test, "Test sample size")->capture_default_str();
  t2_cmd->add_option("--min-events", t2.min_events, "Minimum events per node (default 10 / 25 by scenario)");
  t2_cmd->add_option("--censoring-model", t2.censoring_model, "auto | km | forest | known")
      ->check(CLI::IsMember({"auto", "km", "forest", "known"}))->capture_default_str();
  t2_cmd->add_option("--scale", t2.scale, "Multiplier applied to the MSE")->capture_default_str();
  t2_cmd->add_option("--epsilon", t2.epsilon, "Floor on 1 - G before inverse weighting")->capture_default_str();
  t2_cmd->add_option("--json", t2.json, "Write the JSON report here");
  t2_cmd->add_option("--out", t2.text, "Write the text table here (stdout when omitted)");

  OracleArgs oc;
  auto* oc_cmd = app.add_subcommand("oracle-check", "Compare node estimators with closed-form targets");
  add_common(oc_cmd, oc.common);
  oc_cmd->add_option("--check", oc.check, "concentration | ipcw")->check(CLI::IsMember({"concentration", "ipcw"}))->capture_default_str();
  oc_cmd->add_option("--scenario", oc.scenario, "Scenario for the concentration check")->capture_default_str();
  oc_cmd->add_option("--censoring", oc.censoring, "dependent | independent")->capture_default_str();
  oc_cmd->add_option("--region", oc.region, "Node box, e.g. x1>=0,x2<0.5 (default: whole space)");
  oc_cmd->add_option("--n-grid", oc.n_grid, "Sample sizes for the concentration check")->delimiter(',');
  oc_cmd->add_option("--runs", oc.runs, "Paired runs")->capture_default_str();
  oc_cmd->add_option("--n", oc.n, "Node size for the ipcw check")->capture_default_str();
  oc_cmd->add_flag("--heterogeneous", oc.heterogeneous, "ipcw check: give the two groups different failure rates");
  oc_cmd->add_option("--json", oc.json, "Write the JSON report here");
  oc_cmd->add_option("--out", oc.text, "Write the text report here (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*fit_cmd) return run_fit(fit, *fit_cmd);
    if (*predict_cmd) return run_predict(predict);
    if (*sim_cmd) return run_simulate(sim);
    if (*t1_cmd) return run_table1(t1);
    if (*t2_cmd) return run_table2(t2, *t2_cmd);
    if (*oc_cmd) return run_oracle(oc);
  } catch (const ConfigError& e) {
    g_outputs.rollback();
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    g_outputs.rollback();
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    g_outputs.rollback();
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    g_outputs.rollback();
    std::cerr << "i/o error: " << e.what() << "\n";
    return kData;
  } catch (const DimensionMismatch& e) {
    g_outputs.rollback();
    std::cerr << "dimension mismatch: " << e.what() << "\n";
    return kDimension;
  } catch (const ModelFormatError& e) {
    g_outputs.rollback();
    std::cerr << "model format error: " << e.what() << "\n";
    return kBadModel;
  } catch (const std::exception& e) {
    g_outputs.rollback();
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
