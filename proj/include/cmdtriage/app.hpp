#pragma once

// Engine configuration and the operator commands behind the cmdtriage tool.
// Commands write their report to `out`, diagnostics to `err`, and return the
// process exit code.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmdtriage/embed.hpp"
#include "cmdtriage/gateway.hpp"
#include "cmdtriage/triage.hpp"

namespace cmdtriage::app {

struct EngineConfig {
  gateway::BackendConfig backend;
  triage::TriageConfig triage;
  std::filesystem::path embedding_table;
  std::filesystem::path context_set;
  std::optional<std::filesystem::path> dataset;
  embed::OovPolicy oov = embed::OovPolicy::kZero;
  triage::FeasibilityKeywords keywords;

  /// Numeric ranges plus existence of every referenced file.
  void validate() const;
};

/// Relative paths resolve against `base_dir`.
EngineConfig engine_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
EngineConfig load_engine_config(const std::filesystem::path& path);
nlohmann::json to_json(const EngineConfig& config);

triage::Resources make_resources(const EngineConfig& config);

inline constexpr int kExitClear = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAmbiguous = 10;
inline constexpr int kExitInfeasible = 11;
int exit_code_for(triage::Label label);

/// Command-line overrides of the triage block.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<std::string> estimator;
  std::optional<int> budget;
};
void apply_overrides(EngineConfig& config, const Overrides& overrides);

struct TriageOptions {
  std::string goal;
  std::filesystem::path scene_path;
  std::vector<std::string> facts;
  Overrides overrides;
  /// Answers clarifying questions from `answers_in` until resolved or out of budget.
  bool interactive = false;
};

int cmd_triage(const std::filesystem::path& config_path, const TriageOptions& options, std::ostream& out,
               std::ostream& err, std::istream* answers_in = nullptr);

struct EvalOptions {
  std::optional<std::filesystem::path> dataset;
  std::string metric = "uq";  // uq | cls
  std::string format = "json";  // json | text
  std::optional<std::filesystem::path> out_path;
  Overrides overrides;
};

int cmd_eval(const std::filesystem::path& config_path, const EvalOptions& options, std::ostream& out,
             std::ostream& err);

struct SimulateOptions {
  std::filesystem::path batch_path;
  std::optional<int> budget;  // replaces every entry's budget
  std::optional<std::filesystem::path> out_path;
  Overrides overrides;
};

int cmd_simulate(const std::filesystem::path& config_path, const SimulateOptions& options, std::ostream& out,
                 std::ostream& err);

struct CalibrateOptions {
  std::optional<std::filesystem::path> dataset;
  Overrides overrides;
};

int cmd_calibrate(const std::filesystem::path& config_path, const CalibrateOptions& options, std::ostream& out,
                  std::ostream& err);

/// Prints a seeded simulator scene with its task goal, for authoring fixtures.
int cmd_scene(const std::string& template_id, std::uint64_t seed, std::ostream& out, std::ostream& err);

}  // namespace cmdtriage::app
