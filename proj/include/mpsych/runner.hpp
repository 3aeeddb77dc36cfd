#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpsych/agents.hpp"
#include "mpsych/questionnaire.hpp"

namespace mpsych::runner {

enum class Experiment { questionnaire, bandit, bias, strength_sweep };

std::string_view to_string(Experiment e);
Experiment parse_experiment(std::string_view name);

struct ExperimentPlan {
  Experiment experiment = Experiment::questionnaire;
  agents::AgentConfig agent;
  std::string base_url;  // remote agents only

  // Input banks. An empty pre-prompt path runs without induction.
  std::filesystem::path preprompts;
  std::filesystem::path items;
  std::filesystem::path scenarios;
  std::filesystem::path script;   // scripted agents
  std::filesystem::path profile;  // optional simulated-agent profile

  // Questionnaire
  bool include_baseline = false;  // also run without any pre-prompt
  int permutations = 24;          // first k option orders
  std::vector<questionnaire::Phrasing> phrasings{questionnaire::Phrasing::original,
                                                 questionnaire::Phrasing::rephrased};
  int splits = 100;

  // Bandit
  int games = 200;
  int trials = 10;

  // Bias
  int bias_replicates = 3;  // distinct option orders per scenario
  int per_category = 0;     // 0 = every scenario

  std::uint64_t master_seed = 0;
  std::filesystem::path output_dir;
  int workers = 0;  // 0 = 4 for remote agents, 1 otherwise
  bool plots = false;
  bool timestamps = false;

  // Throws InputError on counts < 1 or missing required inputs.
  void validate() const;
  int effective_workers() const;

  nlohmann::json to_json() const;
  static ExperimentPlan from_json(const nlohmann::json& j);
};

struct RunOptions {
  // Stop after this many units have been written (simulates an interruption).
  std::optional<std::size_t> stop_after;
  // Truncate a damaged transcript tail instead of failing.
  bool repair = false;
  // Used instead of the agent described by the plan (tests, embedding).
  agents::AgentHandle agent_override;
  std::function<void(const std::string&)> log;
};

struct RunSummary {
  std::filesystem::path run_dir;
  std::size_t units_total = 0;
  std::size_t units_already_done = 0;
  std::size_t units_executed = 0;
  std::size_t unit_failures = 0;
  bool complete = false;
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kTranscriptFile = "transcript.jsonl";
inline constexpr const char* kReportDir = "reports";

// Creates the run directory (which must not already hold a run), copies the
// input banks into it, writes the manifest and executes every unit. Reports
// are generated once all units are done.
RunSummary run_plan(const ExperimentPlan& plan, const RunOptions& options = {});

// Verifies the transcript, executes the missing units and regenerates the
// reports. A complete run only has its reports regenerated.
RunSummary resume(const std::filesystem::path& run_dir, const RunOptions& options = {});

// Plan stored in a run directory, with input paths resolved against it.
ExperimentPlan load_manifest(const std::filesystem::path& run_dir);

// Identifier of every unit, in execution order.
std::vector<std::string> unit_ids(const ExperimentPlan& plan);

// Name of the concrete mpsych error type (e.g. "TransportError").
std::string error_type_name(const std::exception& e);

}  // namespace mpsych::runner
