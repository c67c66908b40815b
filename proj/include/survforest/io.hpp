#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "survforest/forest.hpp"
#include "survforest/scenarios.hpp"

namespace survforest {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Whole-string parse; nullopt on any trailing garbage.
std::optional<double> parse_double(const std::string& text);

/// CSV with header `time,status,<feature names...>`. Columns whose header
/// starts with "latent_" are skipped. Throws DataError with the 1-based line
/// number of the offending row.
Dataset read_csv(std::istream& in);
Dataset read_csv(const std::string& path);

/// Writes the header and one row per record at full precision. When latent
/// times are given they are appended as latent_T and latent_C columns.
std::string csv_text(const Dataset& data, const std::vector<double>* failure_times = nullptr,
                     const std::vector<double>* censoring_times = nullptr);
void write_csv(const Dataset& data, const std::string& path);

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

inline constexpr const char* kModelFormat = "survforest-model";
inline constexpr int kModelVersion = 1;

/// Canonical JSON text of a fitted forest (compact, deterministic).
std::string model_json(const Forest& forest);
/// Parses and validates a model document. Throws ModelFormatError on a
/// version mismatch, an unknown key, or any violated invariant.
Forest parse_model(const std::string& text);

void save_model(const Forest& forest, const std::string& path);
Forest load_model(const std::string& path);

/// Forest configuration as a JSON object; unknown keys are rejected on parse.
std::string forest_config_json(const ForestConfig& config);
ForestConfig parse_forest_config(const std::string& text);

/// Settings file for the command-line tool.
struct RunConfig {
  ForestConfig forest;
  std::optional<std::size_t> threads;
  std::optional<std::string> data;
  std::optional<std::string> out;
  std::optional<ScenarioSpec> scenario;
  std::optional<std::size_t> reps;
};

/// Throws ConfigError on malformed JSON, unknown keys or invalid values.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_json(const RunConfig& config);

}  // namespace survforest
