#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpsych/condition.hpp"
#include "mpsych/posterior.hpp"
#include "mpsych/random.hpp"

namespace mpsych::agents {

enum class AgentKind { remote, scripted, simulated };

std::string_view to_string(AgentKind k);
AgentKind parse_agent_kind(std::string_view name);

struct AgentConfig {
  AgentKind kind = AgentKind::simulated;
  std::string model_name = "gpt-3.5-turbo-instruct";
  double temperature = 0.0;
  int max_tokens = 32;
  std::uint64_t seed = 0;

  // Throws InputError if temperature < 0 or max_tokens < 1.
  void validate() const;
};

// Induction applied to the prompt, if any. Simulated agents read it instead
// of the pre-prompt text.
struct InductionTag {
  Condition condition = Condition::none;
  int strength_level = 0;
};

// Structured task state sent alongside the rendered prompt. Text-only agents
// ignore it.
struct BanditContext {
  bandit::PosteriorState posterior;
  std::array<std::string, 2> labels;
};

struct QuestionnaireContext {
  int item_id = 0;
  // Option strings in the order they were presented.
  std::array<std::string, 4> presented_options;
};

struct ScenarioContext {
  bool disambiguated = false;
  int biased_index = 0;
  int unknown_index = 0;
  int correct_index = 0;  // correct answer of the disambiguated variant
  // display_letter[canonical index] = letter shown for that option.
  std::array<char, 3> display_letter{'A', 'B', 'C'};
};

using TaskContext =
    std::variant<std::monostate, BanditContext, QuestionnaireContext, ScenarioContext>;

struct CompletionRequest {
  std::string prompt;
  std::vector<std::string> stop_sequences;

  TaskContext context;
  std::optional<InductionTag> induction;
  std::optional<double> temperature;  // overrides AgentConfig::temperature
  // Keys for per-request randomness; simulated agents derive their stream
  // from (agent seed, unit_seed, step, attempt) and own no mutable RNG.
  std::uint64_t unit_seed = 0;
  int step = 0;
  int attempt = 0;
};

// Text-completion agent. Implementations are immutable after construction
// and safe to call from several threads at once.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string complete(const CompletionRequest& request) const = 0;
  virtual const AgentConfig& config() const = 0;
};

using AgentHandle = std::shared_ptr<const Agent>;

// Convenience wrapper that checks the request precondition.
std::string complete(const Agent& agent, const CompletionRequest& request);

// ---------------------------------------------------------------------------
// Scripted agent

// Lookup order: exact prompt, then the first rule whose needle occurs in the
// prompt, then the fallback. Anything else is an UnmappedPromptError.
struct Script {
  std::map<std::string, std::string> exact;
  std::vector<std::pair<std::string, std::string>> contains;
  std::optional<std::string> fallback;

  // {"exact": {prompt: reply}, "contains": [[needle, reply], ...], "fallback": reply}
  static Script from_json(const nlohmann::json& j);
};

class ScriptedAgent final : public Agent {
 public:
  ScriptedAgent(AgentConfig config, Script script);

  std::string complete(const CompletionRequest& request) const override;
  const AgentConfig& config() const override { return config_; }

 private:
  AgentConfig config_;
  Script script_;
};

// ---------------------------------------------------------------------------
// Hybrid exploration agent

// Weights of Phi(w1 V + w2 V/TU + w3 RU).
struct HybridAgentParams {
  double exploitation = 0.0;          // w1
  double random_exploration = 0.0;    // w2
  double directed_exploration = 0.0;  // w3

  void validate() const;
};

// P(choose arm 1) under the hybrid model. Throws InvalidPosteriorError.
double choice_probability(const HybridAgentParams& params,
                          const bandit::PosteriorState& posterior);

bandit::Arm simulate_hybrid_choice(const HybridAgentParams& params,
                                   const bandit::PosteriorState& posterior, RandomSource& rng);

// Behavioural profile of the simulated agent. Defaults are artifact choices
// that reproduce the qualitative ordering anxious > neutral > happy.
struct SimulatedProfile {
  HybridAgentParams bandit_neutral{0.8, 3.5, 0.40};
  HybridAgentParams bandit_anxious{0.5, 4.0, 0.45};
  HybridAgentParams bandit_happy{1.2, 3.0, 0.30};

  // Questionnaire: latent = item_base[id-1] + shift_per_level * strength + noise,
  // rounded and clamped to 1..4.
  std::vector<double> item_base{2.2, 2.4, 2.6, 2.0, 1.8, 1.5, 1.7, 1.6, 2.5, 2.7, 2.1,
                                1.7, 2.3, 1.6, 1.9, 2.4, 2.3, 1.7, 2.2, 2.0, 1.6};
  double questionnaire_shift_per_level = 0.12;
  double questionnaire_noise_sd = 0.35;

  // Bias: P(biased | ambiguous) = logistic(bias_logit_base + per_level * strength).
  double bias_logit_base = -1.6;
  double bias_logit_per_level = 0.12;
  double counter_stereotype_rate = 0.05;
  double disambiguated_accuracy = 0.9;

  // Hybrid weights for a strength level: neutral at 0, interpolated towards
  // the anxious (positive) or happy (negative) weights, reaching them at |3|.
  HybridAgentParams bandit_params(const std::optional<InductionTag>& tag) const;

  static SimulatedProfile from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Acts on the structured context; the prompt text is ignored.
class SimulatedAgent final : public Agent {
 public:
  SimulatedAgent(AgentConfig config, SimulatedProfile profile = {});

  std::string complete(const CompletionRequest& request) const override;
  const AgentConfig& config() const override { return config_; }
  const SimulatedProfile& profile() const { return profile_; }

 private:
  std::string answer_bandit(const BanditContext& ctx, const CompletionRequest& req,
                            RandomSource& rng) const;
  std::string answer_questionnaire(const QuestionnaireContext& ctx,
                                   const CompletionRequest& req, RandomSource& rng) const;
  std::string answer_scenario(const ScenarioContext& ctx, const CompletionRequest& req,
                              RandomSource& rng) const;

  AgentConfig config_;
  SimulatedProfile profile_;
};

// ---------------------------------------------------------------------------
// Remote agent (OpenAI-compatible completions endpoint)

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  // Injected for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;

  // Delay before retry number `retry` (1-based): base * factor^(retry-1).
  std::chrono::milliseconds delay_before(int retry) const;
};

inline constexpr const char* kApiKeyEnv = "MACHINE_PSYCH_API_KEY";
inline constexpr const char* kBaseUrlEnv = "MACHINE_PSYCH_BASE_URL";

struct RemoteOptions {
  std::string base_url;  // e.g. "https://api.openai.com" (POSTs to /v1/completions)
  std::string api_key;
  RetryPolicy retry;
  std::chrono::seconds timeout{60};

  // Fills base_url/api_key from the environment where empty.
  static RemoteOptions from_environment(std::string base_url = {});
};

class RemoteAgent final : public Agent {
 public:
  RemoteAgent(AgentConfig config, RemoteOptions options);

  // Returns choices[0].text verbatim. Retries HTTP 429/5xx and connection
  // failures with exponential backoff; throws TransportError when exhausted.
  std::string complete(const CompletionRequest& request) const override;
  const AgentConfig& config() const override { return config_; }

  nlohmann::json request_body(const CompletionRequest& request) const;

 private:
  AgentConfig config_;
  RemoteOptions options_;
  std::string scheme_host_port_;
  std::string path_;
};

// ---------------------------------------------------------------------------

struct AgentResources {
  std::optional<Script> script;
  SimulatedProfile profile;
  RemoteOptions remote;
};

AgentHandle make_agent(const AgentConfig& config, AgentResources resources);

}  // namespace mpsych::agents
