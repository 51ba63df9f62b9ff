#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "sgdlb/report.hpp"

namespace sgdlb::cli {

enum ExitCode : int {
  exit_pass = 0,
  exit_config_error = 2,
  exit_verification_failure = 3,
  exit_tolerance_failure = 4,
};

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
};

/// 17 significant digits, '.' decimal separator.
std::string format_real(double v);
/// RFC-4180 style: header row, CRLF-free, quoted where needed.
std::string to_csv(const ResultTable& table);

struct ExperimentResult {
  std::string experiment;
  Config config;
  ResultTable table;
  VerificationReport reports;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  /// Additional series files: (suffix, contents).
  std::vector<std::pair<std::string, std::string>> extra_files;

  bool passed() const { return all_passed(reports); }
};

/// Experiment names accepted in the `experiment` key.
const std::vector<std::string>& experiment_names();

/// Runs the experiment named by config's `experiment` key. Throws
/// ConfigError for invalid configurations.
ExperimentResult run_experiment(const Config& config);

nlohmann::ordered_json report_json(const BoundReport& r);
nlohmann::ordered_json summary_json(const ExperimentResult& result, double wall_seconds);
/// Reparses the `config` object of a summary.
Config config_from_json(const nlohmann::ordered_json& summary);

/// Writes `contents` to a temporary sibling and renames it into place.
void write_atomically(const std::string& path, const std::string& contents);

/// <prefix>.csv, <prefix>.json and <prefix>_<suffix> for extra files.
void write_outputs(const ExperimentResult& result, const std::string& prefix, double wall_seconds);

}  // namespace sgdlb::cli
