// synrisk: disclosure risk assessment for synthetic microdata.
//
// Exit codes: 0 success, 2 configuration problems (validation violations or
// bad references in the config), 1 any other failure. Nonzero exits write a
// machine-readable JSON error record to stderr.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "synrisk/error.hpp"
#include "synrisk/report.hpp"

namespace {

using nlohmann::json;

void emit_error(const std::string& module, const std::string& operation,
                const std::string& message,
                const std::vector<std::string>& violations = {}) {
  json record = {{"error",
                  {{"module", module},
                   {"operation", operation},
                   {"message", message}}}};
  if (!violations.empty()) record["error"]["violations"] = violations;
  std::cerr << record.dump() << std::endl;
}

int run_validate(const std::string& config_path) {
  if (config_path.empty()) {
    emit_error("cli_report", "validate_config", "validate needs --config");
    return 2;
  }
  synrisk::ConfigValidation v = synrisk::validate_config(config_path);
  if (!v.ok) {
    std::cout << json{{"ok", false}, {"violations", v.violations}}.dump(2)
              << std::endl;
    emit_error("cli_report", "validate_config",
               "configuration invalid: " + config_path, v.violations);
    return 2;
  }
  std::cout << json{{"ok", true},
                    {"config_hash", synrisk::config_hash(v.normalized)},
                    {"normalized", v.normalized}}
                   .dump(2)
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disclosure risk assessment for synthetic microdata"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string("synrisk ") + synrisk::kToolVersion);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration file");
  std::uint64_t seed = 0;
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "Root RNG seed (overrides config)");
  unsigned jobs = 0;
  CLI::Option* jobs_opt = app.add_option(
      "--jobs", jobs, "Worker threads, 0 = hardware concurrency");
  std::string out_dir;
  CLI::Option* out_opt =
      app.add_option("--out-dir", out_dir, "Output directory");
  bool summary_only = false;
  app.add_flag("--summary-only", summary_only,
               "Drop per-record detail from the report");
  std::string data_path, schema_path, targets_path, manifest_path;
  CLI::Option* data_opt =
      app.add_option("--data", data_path, "Original data CSV");
  CLI::Option* schema_opt =
      app.add_option("--schema", schema_path, "Schema JSON");
  CLI::Option* targets_opt =
      app.add_option("--targets", targets_path, "Intruder targets CSV");
  CLI::Option* manifest_opt = app.add_option(
      "--release-manifest", manifest_path, "Existing release manifest JSON");

  CLI::App* cmd_synthesize = app.add_subcommand(
      "synthesize", "Fit the synthesizer and write releases");
  CLI::App* cmd_attribute = app.add_subcommand(
      "attribute-risk", "Attribute disclosure posteriors for data records");
  CLI::App* cmd_identification = app.add_subcommand(
      "identification-risk", "Match probabilities for intruder targets");
  CLI::App* cmd_full = app.add_subcommand(
      "full", "Synthesize, then run both risk assessments");
  CLI::App* cmd_validate = app.add_subcommand(
      "validate", "Check a config file and print the normalized form");
  for (CLI::App* sub : {cmd_synthesize, cmd_attribute, cmd_identification,
                        cmd_full, cmd_validate})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  if (cmd_validate->parsed()) return run_validate(config_path);

  std::string pipeline;
  if (cmd_synthesize->parsed()) pipeline = "synthesize";
  if (cmd_attribute->parsed()) pipeline = "attribute-risk";
  if (cmd_identification->parsed()) pipeline = "identification-risk";
  if (cmd_full->parsed()) pipeline = "full";

  json doc = json::object();
  if (!config_path.empty()) {
    std::vector<std::string> violations;
    doc = synrisk::read_json_file(config_path, violations);
    if (!violations.empty()) {
      emit_error("cli_report", "validate_config", violations.front());
      return 2;
    }
    if (!doc.is_object()) {
      emit_error("cli_report", "validate_config",
                 "config root must be a JSON object: " + config_path);
      return 2;
    }
  }
  doc["pipeline"] = pipeline;
  if (*seed_opt) doc["seed"] = seed;
  if (*jobs_opt) doc["jobs"] = jobs;
  if (*out_opt) {
    doc["out_dir"] = out_dir;
  } else if (!doc.contains("out_dir")) {
    const char* env = std::getenv(synrisk::kOutDirEnvVar);
    if (env != nullptr && *env != '\0') doc["out_dir"] = env;
  }
  if (summary_only) doc["summary_only"] = true;
  if (*data_opt) doc["data"] = data_path;
  if (*schema_opt) doc["schema"] = schema_path;
  if (*targets_opt) doc["targets"] = targets_path;
  if (*manifest_opt) doc["release_manifest"] = manifest_path;

  synrisk::ConfigValidation v = synrisk::validate_config_json(doc);
  if (!v.ok) {
    emit_error("cli_report", "validate_config", "configuration invalid",
               v.violations);
    return 2;
  }

  try {
    synrisk::RiskReport report = synrisk::run(v.config);
    std::cout << report.text;
    std::cout << "report written to " << report.json_path.string()
              << std::endl;
    return 0;
  } catch (const synrisk::ConfigError& e) {
    emit_error(e.module(), e.operation(), e.what());
    return 2;
  } catch (const synrisk::Error& e) {
    emit_error(e.module(), e.operation(), e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("cli_report", "run", e.what());
    return 1;
  }
}
