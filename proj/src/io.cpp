#include "survforest/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "survforest/error.hpp"
#include "survforest/names.hpp"

namespace survforest {

using nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || first == last) return std::nullopt;
  return v;
}

// ---- CSV ----

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Dataset read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_fields(line);
      break;
    }
  }
  if (header.empty()) throw DataError("missing header row");
  if (header.size() < 3 || header[0] != "time" || header[1] != "status") {
    throw DataError("header must start with time,status followed by at least one covariate", line_no);
  }
  std::vector<std::size_t> covariate_columns;
  std::vector<std::string> names;
  for (std::size_t c = 2; c < header.size(); ++c) {
    if (header[c].rfind("latent_", 0) == 0) continue;
    if (header[c].empty()) throw DataError("empty column name", line_no);
    covariate_columns.push_back(c);
    names.push_back(header[c]);
  }
  if (covariate_columns.empty()) throw DataError("no covariate columns", line_no);

  Dataset data(covariate_columns.size(), names);
  std::vector<double> x(covariate_columns.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()),
                      line_no);
    }
    const auto time = parse_double(fields[0]);
    if (!time || !std::isfinite(*time) || *time < 0.0) {
      throw DataError("time must be a finite non-negative number, got '" + fields[0] + "'", line_no);
    }
    if (fields[1] != "0" && fields[1] != "1") throw DataError("status must be 0 or 1, got '" + fields[1] + "'", line_no);
    for (std::size_t j = 0; j < covariate_columns.size(); ++j) {
      const auto& f = fields[covariate_columns[j]];
      const auto v = parse_double(f);
      if (!v || !std::isfinite(*v)) throw DataError("covariate '" + header[covariate_columns[j]] + "' is not a finite number: '" + f + "'", line_no);
      x[j] = *v;
    }
    data.add(*time, fields[1] == "1", x);
  }
  if (data.empty()) throw DataError("no data rows");
  return data;
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_csv(in);
}

std::string csv_text(const Dataset& data, const std::vector<double>* failure_times,
                     const std::vector<double>* censoring_times) {
  const bool latent = failure_times != nullptr && censoring_times != nullptr;
  if (latent && (failure_times->size() != data.size() || censoring_times->size() != data.size())) {
    throw DimensionMismatch("latent times do not match the dataset size");
  }
  std::string out = "time,status";
  for (std::size_t j = 0; j < data.dim(); ++j) {
    out += ',';
    out += j < data.feature_names().size() ? data.feature_names()[j] : "x" + std::to_string(j + 1);
  }
  if (latent) out += ",latent_T,latent_C";
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += format_double(data.time(i));
    out += data.event(i) ? ",1" : ",0";
    for (double v : data.row(i)) {
      out += ',';
      out += format_double(v);
    }
    if (latent) {
      out += ',' + format_double((*failure_times)[i]) + ',' + format_double((*censoring_times)[i]);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& data, const std::string& path) { write_file_atomic(path, csv_text(data)); }

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path temp = target;
  temp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + temp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(temp, ec);
      throw IoError("failed writing '" + temp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp, ec);
    throw IoError("cannot move output into place at '" + path + "'");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- JSON helpers ----

namespace {

template <class Err>
void check_keys(const ordered_json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Err(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw Err("unknown key '" + key + "' in " + where);
  }
}

template <class Err>
const ordered_json& field(const ordered_json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) throw Err("missing key '" + std::string(key) + "' in " + where);
  return *it;
}

template <class Err>
double number(const ordered_json& v, const std::string& what) {
  if (!v.is_number()) throw Err(what + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw Err(what + " must be finite");
  return d;
}

template <class Err>
std::uint64_t unsigned_number(const ordered_json& v, const std::string& what) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw Err(what + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

template <class Err>
bool boolean(const ordered_json& v, const std::string& what) {
  if (!v.is_boolean()) throw Err(what + " must be true or false");
  return v.get<bool>();
}

template <class Err>
std::string string_value(const ordered_json& v, const std::string& what) {
  if (!v.is_string()) throw Err(what + " must be a string");
  return v.get<std::string>();
}

template <class Err>
std::vector<double> number_array(const ordered_json& v, const std::string& what) {
  if (!v.is_array()) throw Err(what + " must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(number<Err>(e, what + " entry"));
  return out;
}

ordered_json config_to_json(const ForestConfig& c) {
  ordered_json j;
  j["n_trees"] = c.n_trees;
  j["split_rule"] = to_string(c.split_rule.kind);
  j["theoretical"] = c.split_rule.theoretical;
  j["threshold"] = c.split_rule.threshold;
  j["terminal"] = to_string(c.terminal);
  j["min_node_samples"] = c.stop.min_node_samples;
  j["min_node_events"] = c.stop.min_node_events;
  j["mtry"] = c.mtry;
  j["alpha"] = c.alpha_constraint.alpha;
  j["min_child_events"] = c.alpha_constraint.min_child_events;
  j["tau"] = {{"mode", to_string(c.tau_policy.mode)}, {"value", c.tau_policy.value}};
  j["bootstrap"] = c.bootstrap;
  j["seed"] = c.seed;
  j["censoring"] = to_string(c.censoring);
  j["ipcw_epsilon"] = c.ipcw_epsilon;
  return j;
}

constexpr std::initializer_list<const char*> kConfigKeys{
    "n_trees", "split_rule", "theoretical", "threshold", "terminal", "min_node_samples", "min_node_events", "mtry",
    "alpha",   "min_child_events", "tau", "bootstrap", "seed", "censoring", "ipcw_epsilon"};

/// Reads a configuration object. With require_all every key must be present
/// (model files); otherwise missing keys keep their defaults (run configs).
template <class Err>
ForestConfig config_from_json(const ordered_json& j, bool require_all) {
  const std::string where = "forest configuration";
  check_keys<Err>(j, kConfigKeys, where);
  if (require_all) {
    for (const char* k : kConfigKeys) field<Err>(j, k, where);
  }
  ForestConfig c;
  const auto has = [&](const char* k) { return j.contains(k); };
  try {
    if (has("n_trees")) c.n_trees = unsigned_number<Err>(j["n_trees"], "n_trees");
    if (has("split_rule")) c.split_rule.kind = parse_split_kind(string_value<Err>(j["split_rule"], "split_rule"));
    if (has("theoretical")) c.split_rule.theoretical = boolean<Err>(j["theoretical"], "theoretical");
    if (has("threshold")) c.split_rule.threshold = number<Err>(j["threshold"], "threshold");
    if (has("terminal")) c.terminal = parse_terminal(string_value<Err>(j["terminal"], "terminal"));
    if (has("min_node_samples")) c.stop.min_node_samples = unsigned_number<Err>(j["min_node_samples"], "min_node_samples");
    if (has("min_node_events")) c.stop.min_node_events = unsigned_number<Err>(j["min_node_events"], "min_node_events");
    if (has("mtry")) c.mtry = unsigned_number<Err>(j["mtry"], "mtry");
    if (has("alpha")) c.alpha_constraint.alpha = number<Err>(j["alpha"], "alpha");
    if (has("min_child_events")) {
      c.alpha_constraint.min_child_events = unsigned_number<Err>(j["min_child_events"], "min_child_events");
    }
    if (has("tau")) {
      const auto& t = j["tau"];
      check_keys<Err>(t, {"mode", "value"}, "tau");
      c.tau_policy.mode = parse_tau_mode(string_value<Err>(field<Err>(t, "mode", "tau"), "tau mode"));
      c.tau_policy.value = number<Err>(field<Err>(t, "value", "tau"), "tau value");
    }
    if (has("bootstrap")) c.bootstrap = boolean<Err>(j["bootstrap"], "bootstrap");
    if (has("seed")) c.seed = unsigned_number<Err>(j["seed"], "seed");
    if (has("censoring")) c.censoring = parse_censoring_kind(string_value<Err>(j["censoring"], "censoring"));
    if (has("ipcw_epsilon")) c.ipcw_epsilon = number<Err>(j["ipcw_epsilon"], "ipcw_epsilon");
    c.validate();
  } catch (const ConfigError& e) {
    if constexpr (std::is_same_v<Err, ConfigError>) throw;
    throw Err(e.what());
  }
  return c;
}

// ---- model ----

ordered_json tree_to_json(const Tree& tree) {
  ordered_json nodes = ordered_json::array();
  for (const auto& n : tree.nodes) {
    ordered_json j;
    j["parent"] = n.parent;
    j["samples"] = n.sample_count;
    j["events"] = n.event_count;
    if (n.terminal()) {
      j["knots"] = n.leaf().chf.knots();
      j["chf"] = n.leaf().chf.values();
    } else {
      const auto& s = n.split();
      j["variable"] = s.variable;
      j["cutpoint"] = s.cutpoint;
      j["left"] = s.left;
      j["right"] = s.right;
    }
    nodes.push_back(std::move(j));
  }
  return nodes;
}

ordered_json forest_to_json(const Forest& forest) {
  ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["dim"] = forest.dim();
  j["tau"] = forest.tau();
  j["config"] = config_to_json(forest.config());
  j["grid"] = forest.grid();
  const auto& model = forest.censor_model();
  ordered_json censoring;
  censoring["kind"] = to_string(model.kind());
  if (const auto* km = std::get_if<CensoringModel::GlobalKM>(&model.variant())) {
    censoring["knots"] = km->curve.knots();
    censoring["survival"] = km->curve.values();
  } else if (const auto* f = std::get_if<CensoringModel::CensorForest>(&model.variant())) {
    censoring["forest"] = forest_to_json(*f->forest);
  } else if (model.kind() == CensoringKind::Known) {
    throw ModelFormatError("a forest that uses a caller-supplied censoring law cannot be saved");
  }
  j["censoring"] = std::move(censoring);
  ordered_json trees = ordered_json::array();
  for (const auto& t : forest.trees()) trees.push_back(tree_to_json(t));
  j["trees"] = std::move(trees);
  return j;
}

using ModelErr = ModelFormatError;

Tree tree_from_json(const ordered_json& j, std::size_t index) {
  const std::string where = "tree " + std::to_string(index);
  if (!j.is_array() || j.empty()) throw ModelErr(where + " must be a non-empty array of nodes");
  Tree tree;
  tree.nodes.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& n = j[i];
    const std::string nw = where + " node " + std::to_string(i);
    if (!n.is_object()) throw ModelErr(nw + " must be an object");
    TreeNode node;
    const auto& parent = field<ModelErr>(n, "parent", nw);
    if (!parent.is_number_integer()) throw ModelErr(nw + " parent must be an integer");
    node.parent = parent.get<std::int64_t>();
    node.sample_count = unsigned_number<ModelErr>(field<ModelErr>(n, "samples", nw), nw + " samples");
    node.event_count = unsigned_number<ModelErr>(field<ModelErr>(n, "events", nw), nw + " events");
    if (node.sample_count == 0 || node.event_count > node.sample_count) throw ModelErr(nw + " has inconsistent counts");
    if ((i == 0) != (node.parent == -1) || node.parent >= static_cast<std::int64_t>(i)) {
      throw ModelErr(nw + " has an invalid parent");
    }
    if (n.contains("knots")) {
      check_keys<ModelErr>(n, {"parent", "samples", "events", "knots", "chf"}, nw);
      try {
        node.body = LeafNode{HazardCurve(number_array<ModelErr>(n["knots"], nw + " knots"),
                                         number_array<ModelErr>(field<ModelErr>(n, "chf", nw), nw + " chf"))};
      } catch (const InvalidArgument& e) {
        throw ModelErr(nw + ": " + e.what());
      }
    } else {
      check_keys<ModelErr>(n, {"parent", "samples", "events", "variable", "cutpoint", "left", "right"}, nw);
      SplitNode s;
      s.variable = unsigned_number<ModelErr>(field<ModelErr>(n, "variable", nw), nw + " variable");
      s.cutpoint = number<ModelErr>(field<ModelErr>(n, "cutpoint", nw), nw + " cutpoint");
      const auto left = unsigned_number<ModelErr>(field<ModelErr>(n, "left", nw), nw + " left");
      const auto right = unsigned_number<ModelErr>(field<ModelErr>(n, "right", nw), nw + " right");
      if (left >= j.size() || right >= j.size() || left == right) throw ModelErr(nw + " has invalid child links");
      s.left = static_cast<std::uint32_t>(left);
      s.right = static_cast<std::uint32_t>(right);
      node.body = s;
    }
    tree.nodes.push_back(std::move(node));
  }
  // Every non-root node must be a child of its recorded parent.
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const auto& p = tree.nodes[static_cast<std::size_t>(tree.nodes[i].parent)];
    if (p.terminal() || (p.split().left != i && p.split().right != i)) {
      throw ModelErr(where + " node " + std::to_string(i) + " is not linked from its parent");
    }
  }
  return tree;
}

Forest forest_from_json(const ordered_json& j) {
  const std::string where = "model";
  check_keys<ModelErr>(j, {"format", "version", "dim", "tau", "config", "grid", "censoring", "trees"}, where);
  if (string_value<ModelErr>(field<ModelErr>(j, "format", where), "format") != kModelFormat) {
    throw ModelErr("not a survforest model document");
  }
  const auto& version = field<ModelErr>(j, "version", where);
  if (!version.is_number_integer() || version.get<std::int64_t>() != kModelVersion) {
    throw ModelErr("unsupported model version " + version.dump() + " (expected " + std::to_string(kModelVersion) + ")");
  }
  const std::size_t dim = unsigned_number<ModelErr>(field<ModelErr>(j, "dim", where), "dim");
  if (dim == 0) throw ModelErr("dim must be >= 1");
  const double tau = number<ModelErr>(field<ModelErr>(j, "tau", where), "tau");
  if (!(tau > 0.0)) throw ModelErr("tau must be positive");
  const ForestConfig config = config_from_json<ModelErr>(field<ModelErr>(j, "config", where), true);
  try {
    config.validate(dim);
  } catch (const ConfigError& e) {
    throw ModelErr(e.what());
  }
  auto grid = number_array<ModelErr>(field<ModelErr>(j, "grid", where), "grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] < 0.0 || grid[k] > tau || (k > 0 && grid[k] <= grid[k - 1])) {
      throw ModelErr("grid must be strictly increasing within [0, tau]");
    }
  }

  const auto& cj = field<ModelErr>(j, "censoring", where);
  if (!cj.is_object()) throw ModelErr("censoring must be an object");
  CensoringKind kind;
  try {
    kind = parse_censoring_kind(string_value<ModelErr>(field<ModelErr>(cj, "kind", "censoring"), "censoring kind"));
  } catch (const ConfigError& e) {
    throw ModelErr(e.what());
  }
  std::shared_ptr<const CensoringModel> censor_model;
  switch (kind) {
    case CensoringKind::None:
      check_keys<ModelErr>(cj, {"kind"}, "censoring");
      censor_model = std::make_shared<const CensoringModel>();
      break;
    case CensoringKind::GlobalKM:
      check_keys<ModelErr>(cj, {"kind", "knots", "survival"}, "censoring");
      try {
        censor_model = std::make_shared<const CensoringModel>(CensoringModel::GlobalKM{
            SurvivalCurve(number_array<ModelErr>(field<ModelErr>(cj, "knots", "censoring"), "censoring knots"),
                          number_array<ModelErr>(field<ModelErr>(cj, "survival", "censoring"), "censoring survival"))});
      } catch (const InvalidArgument& e) {
        throw ModelErr(std::string("censoring curve: ") + e.what());
      }
      break;
    case CensoringKind::CensorForest: {
      check_keys<ModelErr>(cj, {"kind", "forest"}, "censoring");
      auto inner = std::make_shared<const Forest>(forest_from_json(field<ModelErr>(cj, "forest", "censoring")));
      if (inner->dim() != dim) throw ModelErr("censoring forest dimension differs from the model");
      if (inner->config().needs_censoring_model()) throw ModelErr("censoring forest must be uncorrected");
      censor_model = std::make_shared<const CensoringModel>(CensoringModel::CensorForest{std::move(inner)});
      break;
    }
    case CensoringKind::Known: throw ModelErr("caller-supplied censoring laws are not persistable");
  }
  if (config.needs_censoring_model() ? kind != config.censoring : kind != CensoringKind::None) {
    throw ModelErr("stored censoring model does not match the configuration");
  }

  const auto& tj = field<ModelErr>(j, "trees", where);
  if (!tj.is_array() || tj.size() != config.n_trees) throw ModelErr("trees must be an array of n_trees trees");
  std::vector<Tree> trees;
  trees.reserve(tj.size());
  for (std::size_t b = 0; b < tj.size(); ++b) trees.push_back(tree_from_json(tj[b], b));

  Forest forest(std::move(trees), config, std::move(censor_model), dim, tau, std::move(grid));
  const TreeConfig tc = forest.tree_config();
  for (std::size_t b = 0; b < forest.trees().size(); ++b) {
    const auto violations = audit_tree(forest.trees()[b], tc, dim);
    if (!violations.empty()) {
      throw ModelErr("tree " + std::to_string(b) + " node " + std::to_string(violations.front().node) + ": " +
                     violations.front().message);
    }
  }
  return forest;
}

}  // namespace

std::string model_json(const Forest& forest) { return forest_to_json(forest).dump() + "\n"; }

Forest parse_model(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("model is not valid JSON: ") + e.what());
  }
  try {
    return forest_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("malformed model: ") + e.what());
  }
}

void save_model(const Forest& forest, const std::string& path) { write_file_atomic(path, model_json(forest)); }

Forest load_model(const std::string& path) { return parse_model(read_file(path)); }

std::string forest_config_json(const ForestConfig& config) { return config_to_json(config).dump(2) + "\n"; }

ForestConfig parse_forest_config(const std::string& text) {
  try {
    return config_from_json<ConfigError>(ordered_json::parse(text), false);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
}

// ---- run config ----

RunConfig parse_run_config(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run configuration is not valid JSON: ") + e.what());
  }
  using Err = ConfigError;
  check_keys<Err>(j, {"forest", "threads", "data", "out", "scenario", "reps"}, "run configuration");
  RunConfig rc;
  try {
    if (j.contains("forest")) rc.forest = config_from_json<Err>(j["forest"], false);
    if (j.contains("threads")) rc.threads = unsigned_number<Err>(j["threads"], "threads");
    if (j.contains("data")) rc.data = string_value<Err>(j["data"], "data");
    if (j.contains("out")) rc.out = string_value<Err>(j["out"], "out");
    if (j.contains("reps")) rc.reps = unsigned_number<Err>(j["reps"], "reps");
    if (j.contains("scenario")) {
      const auto& s = j["scenario"];
      check_keys<Err>(s, {"id", "censoring", "n", "rho"}, "scenario");
      ScenarioSpec spec;
      if (s.contains("id")) spec.id = parse_scenario_id(string_value<Err>(s["id"], "scenario id"));
      if (s.contains("censoring")) spec.censoring = parse_censoring_type(string_value<Err>(s["censoring"], "scenario censoring"));
      if (s.contains("n")) spec.n = unsigned_number<Err>(s["n"], "scenario n");
      if (s.contains("rho")) spec.rho = number<Err>(s["rho"], "scenario rho");
      spec.validate();
      rc.scenario = spec;
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return rc;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

std::string run_config_json(const RunConfig& config) {
  ordered_json j;
  j["forest"] = config_to_json(config.forest);
  if (config.threads) j["threads"] = *config.threads;
  if (config.data) j["data"] = *config.data;
  if (config.out) j["out"] = *config.out;
  if (config.reps) j["reps"] = *config.reps;
  if (config.scenario) {
    j["scenario"] = {{"id", to_string(config.scenario->id)},
                     {"censoring", to_string(config.scenario->censoring)},
                     {"n", config.scenario->n},
                     {"rho", config.scenario->rho}};
  }
  return j.dump(2) + "\n";
}

}  // namespace survforest
