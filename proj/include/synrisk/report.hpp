#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synrisk/attribute_risk.hpp"
#include "synrisk/identification_risk.hpp"
#include "synrisk/mixture.hpp"

namespace synrisk {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kReportVersion = 1;
inline constexpr const char* kOutDirEnvVar = "SYNRISK_OUT_DIR";

// Grid settings with variables by name; resolved against the schema at run
// time.
struct GridConfig {
  std::string x, y;
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
  std::size_t x_steps = 100, y_steps = 100;
};

// Fully-defaulted run settings. Variable references are kept by name here
// and resolved once the schema is loaded.
struct RunConfig {
  std::string pipeline = "full";
  std::uint64_t seed = 0;
  unsigned jobs = 0;  // 0 = hardware concurrency
  std::filesystem::path out_dir = ".";
  std::filesystem::path report_path;  // empty = out_dir / "report.json"
  bool summary_only = false;

  std::filesystem::path data;
  std::filesystem::path schema_path;
  std::filesystem::path targets;
  std::filesystem::path release_manifest;

  // synthesizer
  std::string synthesizer = "mixture";
  std::size_t releases = 5;  // m
  GibbsConfig gibbs;
  std::vector<std::string> cart_order;  // empty = synthesized in schema order
  std::size_t cart_min_leaf = 5;

  // attribute scenario
  std::string knowledge = "worst_case";
  std::vector<std::string> known_subset;
  std::vector<double> prior;  // empty = uniform
  bool synthesizer_known = true;
  std::string guess_mode = "neighborhood";
  std::uint64_t full_cap = 1000000;
  nlohmann::json explicit_guesses = nlohmann::json::array();
  std::vector<std::int64_t> records;  // 1-based row ids; empty = all
  std::optional<GridConfig> grid;

  // identification matching
  bool in_sample = true;
  std::string population_source = "none";
  std::uint64_t population_constant = 0;
  std::map<std::string, std::uint64_t> population_table;
  std::map<std::string, RadiusSpec> radius;  // variable name -> rule
  std::size_t iterations = 100;
  bool s_known = true;
};

struct ConfigValidation {
  bool ok = false;
  RunConfig config;
  // The effective configuration with every default written out; canonical
  // (sorted keys), the input to the config hash.
  nlohmann::json normalized;
  std::vector<std::string> violations;
};

// Parses and checks a config document, collecting every violation rather
// than stopping at the first. An unreadable or unparseable file yields a
// single violation with line/column.
ConfigValidation validate_config(const std::filesystem::path& path);
ConfigValidation validate_config_json(const nlohmann::json& doc);

// Reads a JSON document; on failure appends one violation (parse errors as
// file:line:column) and returns null.
nlohmann::json read_json_file(const std::filesystem::path& path,
                              std::vector<std::string>& violations);

// FNV-1a 64 over the canonical dump; 16 hex digits.
std::string config_hash(const nlohmann::json& normalized);

struct RiskReport {
  nlohmann::json document;  // header + body
  std::string text;         // fixed-width digest
  std::filesystem::path json_path;
  std::filesystem::path text_path;
};

// Executes the configured pipeline and writes report.json / report.txt into
// the output directory. The body is a pure function of (inputs, config,
// seed); the timestamp lives in the header only.
RiskReport run(const RunConfig& config);

}  // namespace synrisk
