#pragma once

// JSON run configurations (schema "framebound/1"), built-in scenarios, and the
// batch runner that writes report.txt, bounds.csv, t_alpha.csv and oracle.csv.

#include "framebound/oracle.hpp"

#include <json.hpp>

#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace framebound {

inline constexpr const char* kSchema = "framebound/1";

/// Invalid configuration; `field` is a JSON pointer ("" for syntax errors).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field(std::move(field)) {}
  std::string field;
};

struct GridConfig {
  std::string kind = "auto";  // auto | torus | annulus | fundamental | band
  std::vector<double> lo;
  std::vector<double> hi;
  int resolution = 64;
  bool refine = true;
  double refine_tolerance = 0.005;
};

struct OracleConfig {
  std::string method = "discretize";  // discretize | fiber
  int n = 256;
  double rate = 8.0;
  double radius = -1.0;  // fiber index window
  int resolution = 32;   // fiber frequency grid
};

struct RunConfig {
  std::string name;
  nlohmann::json system;
  GridConfig grid;
  Truncation truncation;
  std::optional<OracleConfig> oracle;
  std::string output_dir = "out";
  /// Sweep: each entry is run into output_dir/<name>.
  std::vector<RunConfig> runs;
  nlohmann::json raw;
};

RunConfig parse_config(const std::string& text);
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

/// Builds the system described by a config's "system" object.
SystemSpec build_system(const nlohmann::json& system);
Grid build_grid(const SystemSpec& sys, const GridConfig& grid);

std::vector<std::string> scenario_names();
/// Throws std::invalid_argument listing the available names.
RunConfig scenario(const std::string& name);

struct RunOptions {
  std::optional<std::string> out_dir;
  unsigned threads = 0;
};

/// Exit codes of a run.
enum ExitCode : int { kOk = 0, kConfigError = 2, kDivergent = 3, kChainViolation = 4 };

struct RunSummary {
  int code = kOk;
  BoundsReport report;
  std::optional<OptimalBounds> oracle;
  std::optional<ChainVerdict> verdict;
};

/// Runs one configuration (every sweep entry) and writes the artifacts.
/// Throws ConfigError for invalid systems or grids.
int run(const RunConfig& config, const RunOptions& options, std::ostream& log);
RunSummary run_single(const RunConfig& config, const std::string& out_dir, unsigned threads, std::ostream& log);

/// 17 significant digits; "inf"/"-inf" for sentinels.
std::string csv_number(double x);

}  // namespace framebound
