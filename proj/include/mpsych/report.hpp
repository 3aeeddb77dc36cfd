#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpsych/bandit.hpp"
#include "mpsych/bias_bench.hpp"
#include "mpsych/condition.hpp"
#include "mpsych/questionnaire.hpp"

namespace mpsych::report {

struct QuestionnaireRecord {
  questionnaire::ItemResponse response;
  Condition condition = Condition::none;
  int strength = 0;
};

struct BiasRecord {
  bias::ScenarioResponse response;
  bias::Category category = bias::Category::age;
  int strength = 0;
};

struct FailureRecord {
  std::string unit_id;
  std::string error_type;
  std::string message;
};

// Parsed contents of one or more run directories of the same experiment.
struct RunData {
  std::string experiment;
  std::uint64_t master_seed = 0;
  std::size_t runs = 0;
  std::vector<QuestionnaireRecord> questionnaire;
  std::vector<bandit::TrialRecord> trials;
  std::vector<BiasRecord> bias;
  std::vector<bias::Scenario> scenarios;
  std::vector<FailureRecord> failures;
  // pre-prompt id -> (condition, strength), in first-seen order
  std::vector<std::string> pre_prompt_order;
  std::map<std::string, std::pair<Condition, int>> pre_prompts;
};

// Throws SchemaError when the runs disagree on schema version or experiment
// and IntegrityError for damaged transcripts.
RunData load_runs(const std::vector<std::filesystem::path>& run_dirs);

struct ReferenceConstant {
  double value = 0.0;
  std::string description;
};

using ReferenceConstants = std::map<std::string, ReferenceConstant>;

// Missing file -> empty map.
ReferenceConstants load_reference_constants(const std::filesystem::path& path);
std::filesystem::path default_reference_constants();

struct ReportOptions {
  bool plots = false;
  std::filesystem::path reference_constants = default_reference_constants();
  // Splits for the permutation split-half analysis.
  int splits = 100;
};

// Writes every table that the loaded data supports into `out_dir`.
void write_reports(const std::vector<std::filesystem::path>& run_dirs,
                   const std::filesystem::path& out_dir, const ReportOptions& options = {});
void write_reports(const RunData& data, const std::filesystem::path& out_dir,
                   const ReportOptions& options = {});

}  // namespace mpsych::report
