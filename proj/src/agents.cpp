#include "mpsych/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"

#include "mpsych/error.hpp"
#include "mpsych/exploration_features.hpp"
#include "mpsych/special_functions.hpp"

namespace mpsych::agents {
namespace {

using json = nlohmann::json;

const std::array<std::string, 4> kLikertOptions = {"almost never", "occasionally", "often",
                                                   "almost always"};

int strength_of(const std::optional<InductionTag>& tag) {
  return tag ? tag->strength_level : 0;
}

HybridAgentParams lerp(const HybridAgentParams& a, const HybridAgentParams& b, double t) {
  return {a.exploitation + t * (b.exploitation - a.exploitation),
          a.random_exploration + t * (b.random_exploration - a.random_exploration),
          a.directed_exploration + t * (b.directed_exploration - a.directed_exploration)};
}

json params_to_json(const HybridAgentParams& p) {
  return json::array({p.exploitation, p.random_exploration, p.directed_exploration});
}

HybridAgentParams params_from_json(const json& j) {
  HybridAgentParams p{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
  p.validate();
  return p;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::remote: return "remote";
    case AgentKind::scripted: return "scripted";
    case AgentKind::simulated: return "simulated";
  }
  return "unknown";
}

AgentKind parse_agent_kind(std::string_view name) {
  if (name == "remote") return AgentKind::remote;
  if (name == "scripted") return AgentKind::scripted;
  if (name == "simulated") return AgentKind::simulated;
  throw InputError("unknown agent kind: " + std::string(name));
}

void AgentConfig::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw InputError("agent temperature must be >= 0");
  }
  if (max_tokens < 1) throw InputError("agent max_tokens must be >= 1");
}

std::string complete(const Agent& agent, const CompletionRequest& request) {
  if (request.prompt.empty()) throw PreconditionError("completion prompt is empty");
  return agent.complete(request);
}

// --- scripted ---------------------------------------------------------------

Script Script::from_json(const json& j) {
  Script s;
  if (j.contains("exact")) {
    for (const auto& [prompt, reply] : j.at("exact").items()) {
      s.exact.emplace(prompt, reply.get<std::string>());
    }
  }
  if (j.contains("contains")) {
    for (const auto& rule : j.at("contains")) {
      s.contains.emplace_back(rule.at(0).get<std::string>(), rule.at(1).get<std::string>());
    }
  }
  if (j.contains("fallback") && !j.at("fallback").is_null()) {
    s.fallback = j.at("fallback").get<std::string>();
  }
  return s;
}

ScriptedAgent::ScriptedAgent(AgentConfig config, Script script)
    : config_(std::move(config)), script_(std::move(script)) {
  config_.validate();
}

std::string ScriptedAgent::complete(const CompletionRequest& request) const {
  if (auto it = script_.exact.find(request.prompt); it != script_.exact.end()) {
    return it->second;
  }
  for (const auto& [needle, reply] : script_.contains) {
    if (request.prompt.find(needle) != std::string::npos) return reply;
  }
  if (script_.fallback) return *script_.fallback;
  const auto head = request.prompt.substr(0, std::min<std::size_t>(60, request.prompt.size()));
  throw UnmappedPromptError("scripted agent has no reply for prompt: \"" + head + "...\"");
}

// --- hybrid model -----------------------------------------------------------

void HybridAgentParams::validate() const {
  if (!std::isfinite(exploitation) || !std::isfinite(random_exploration) ||
      !std::isfinite(directed_exploration)) {
    throw InputError("hybrid agent weights must be finite");
  }
}

double choice_probability(const HybridAgentParams& params,
                          const bandit::PosteriorState& posterior) {
  const auto f = explore::features(posterior);
  const double eta = params.exploitation * f.value_difference +
                     params.random_exploration * f.scaled_value +
                     params.directed_exploration * f.relative_uncertainty;
  if (!std::isfinite(eta)) throw InvalidPosteriorError("non-finite hybrid model index");
  return special::normal_cdf(eta);
}

bandit::Arm simulate_hybrid_choice(const HybridAgentParams& params,
                                   const bandit::PosteriorState& posterior, RandomSource& rng) {
  const double p = choice_probability(params, posterior);
  return rng.uniform() < p ? bandit::Arm::first : bandit::Arm::second;
}

HybridAgentParams SimulatedProfile::bandit_params(const std::optional<InductionTag>& tag) const {
  const int level = strength_of(tag);
  if (level > 0) return lerp(bandit_neutral, bandit_anxious, std::min(level, 5) / 3.0);
  if (level < 0) return lerp(bandit_neutral, bandit_happy, std::min(-level, 5) / 3.0);
  return bandit_neutral;
}

SimulatedProfile SimulatedProfile::from_json(const json& j) {
  SimulatedProfile p;
  if (j.contains("bandit_neutral")) p.bandit_neutral = params_from_json(j.at("bandit_neutral"));
  if (j.contains("bandit_anxious")) p.bandit_anxious = params_from_json(j.at("bandit_anxious"));
  if (j.contains("bandit_happy")) p.bandit_happy = params_from_json(j.at("bandit_happy"));
  if (j.contains("item_base")) p.item_base = j.at("item_base").get<std::vector<double>>();
  p.questionnaire_shift_per_level =
      j.value("questionnaire_shift_per_level", p.questionnaire_shift_per_level);
  p.questionnaire_noise_sd = j.value("questionnaire_noise_sd", p.questionnaire_noise_sd);
  p.bias_logit_base = j.value("bias_logit_base", p.bias_logit_base);
  p.bias_logit_per_level = j.value("bias_logit_per_level", p.bias_logit_per_level);
  p.counter_stereotype_rate = j.value("counter_stereotype_rate", p.counter_stereotype_rate);
  p.disambiguated_accuracy = j.value("disambiguated_accuracy", p.disambiguated_accuracy);
  return p;
}

json SimulatedProfile::to_json() const {
  return json{{"bandit_neutral", params_to_json(bandit_neutral)},
              {"bandit_anxious", params_to_json(bandit_anxious)},
              {"bandit_happy", params_to_json(bandit_happy)},
              {"item_base", item_base},
              {"questionnaire_shift_per_level", questionnaire_shift_per_level},
              {"questionnaire_noise_sd", questionnaire_noise_sd},
              {"bias_logit_base", bias_logit_base},
              {"bias_logit_per_level", bias_logit_per_level},
              {"counter_stereotype_rate", counter_stereotype_rate},
              {"disambiguated_accuracy", disambiguated_accuracy}};
}

// --- simulated --------------------------------------------------------------

SimulatedAgent::SimulatedAgent(AgentConfig config, SimulatedProfile profile)
    : config_(std::move(config)), profile_(std::move(profile)) {
  config_.validate();
}

std::string SimulatedAgent::complete(const CompletionRequest& request) const {
  RandomSource rng(derive_seed(config_.seed, request.unit_seed,
                               static_cast<std::uint64_t>(request.step),
                               static_cast<std::uint64_t>(request.attempt)));
  return std::visit(
      [&](const auto& ctx) -> std::string {
        using T = std::decay_t<decltype(ctx)>;
        if constexpr (std::is_same_v<T, BanditContext>) {
          return answer_bandit(ctx, request, rng);
        } else if constexpr (std::is_same_v<T, QuestionnaireContext>) {
          return answer_questionnaire(ctx, request, rng);
        } else if constexpr (std::is_same_v<T, ScenarioContext>) {
          return answer_scenario(ctx, request, rng);
        } else {
          // Free-text requests (e.g. pre-prompt generation) get a fixed
          // placeholder narrative.
          return " This is a simulated narrative produced without a language model.";
        }
      },
      request.context);
}

std::string SimulatedAgent::answer_bandit(const BanditContext& ctx,
                                          const CompletionRequest& req,
                                          RandomSource& rng) const {
  const auto params = profile_.bandit_params(req.induction);
  const auto arm = simulate_hybrid_choice(params, ctx.posterior, rng);
  return " " + ctx.labels[bandit::arm_slot(arm)];
}

std::string SimulatedAgent::answer_questionnaire(const QuestionnaireContext& ctx,
                                                 const CompletionRequest& req,
                                                 RandomSource& rng) const {
  if (ctx.item_id < 1 || static_cast<std::size_t>(ctx.item_id) > profile_.item_base.size()) {
    throw InputError("simulated agent has no base level for item " +
                     std::to_string(ctx.item_id));
  }
  const double latent = profile_.item_base[static_cast<std::size_t>(ctx.item_id - 1)] +
                        profile_.questionnaire_shift_per_level * strength_of(req.induction) +
                        profile_.questionnaire_noise_sd * rng.normal();
  const int score = std::clamp(static_cast<int>(std::lround(latent)), 1, 4);
  return " " + kLikertOptions[static_cast<std::size_t>(score - 1)];
}

std::string SimulatedAgent::answer_scenario(const ScenarioContext& ctx,
                                            const CompletionRequest& req,
                                            RandomSource& rng) const {
  const double u = rng.uniform();
  int chosen;
  if (ctx.disambiguated) {
    if (u < profile_.disambiguated_accuracy) {
      chosen = ctx.correct_index;
    } else {
      chosen = u < 0.5 * (1.0 + profile_.disambiguated_accuracy) ? ctx.biased_index
                                                                  : ctx.unknown_index;
    }
  } else {
    const double logit =
        profile_.bias_logit_base + profile_.bias_logit_per_level * strength_of(req.induction);
    const double p_biased = 1.0 / (1.0 + std::exp(-logit));
    if (u < p_biased) {
      chosen = ctx.biased_index;
    } else if (u < p_biased + profile_.counter_stereotype_rate) {
      chosen = ctx.correct_index;
    } else {
      chosen = ctx.unknown_index;
    }
  }
  return std::string(" ") + ctx.display_letter[static_cast<std::size_t>(chosen)];
}

// --- remote -----------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::delay_before(int retry) const {
  const double ms = static_cast<double>(base_delay.count()) * std::pow(factor, retry - 1);
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

RemoteOptions RemoteOptions::from_environment(std::string base_url) {
  RemoteOptions o;
  o.base_url = std::move(base_url);
  if (o.base_url.empty()) {
    if (const char* env = std::getenv(kBaseUrlEnv)) o.base_url = env;
  }
  if (const char* key = std::getenv(kApiKeyEnv)) o.api_key = key;
  return o;
}

RemoteAgent::RemoteAgent(AgentConfig config, RemoteOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  config_.validate();
  if (options_.base_url.empty()) {
    throw InputError(std::string("remote agent needs a base URL (--base-url or ") +
                     kBaseUrlEnv + ")");
  }
  if (!options_.retry.sleep) {
    options_.retry.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  std::string url = options_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = (path_start == std::string::npos ? std::string() : url.substr(path_start)) +
          "/v1/completions";
}

json RemoteAgent::request_body(const CompletionRequest& request) const {
  return json{{"model", config_.model_name},
              {"prompt", request.prompt},
              {"max_tokens", config_.max_tokens},
              {"temperature", request.temperature.value_or(config_.temperature)},
              {"stop", request.stop_sequences}};
}

std::string RemoteAgent::complete(const CompletionRequest& request) const {
  const std::string body = request_body(request).dump();
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  }

  std::string last_error;
  for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    if (attempt > 1) options_.retry.sleep(options_.retry.delay_before(attempt - 1));

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (retryable_status(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw TransportError("completion endpoint returned HTTP " + std::to_string(res->status) +
                           ": " + res->body);
    }
    try {
      const auto parsed = json::parse(res->body);
      return parsed.at("choices").at(0).at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw TransportError(std::string("malformed completion response: ") + e.what());
    }
  }
  throw TransportError("completion request failed after " +
                       std::to_string(options_.retry.max_attempts) + " attempts (" +
                       last_error + ")");
}

// --- factory ----------------------------------------------------------------

AgentHandle make_agent(const AgentConfig& config, AgentResources resources) {
  switch (config.kind) {
    case AgentKind::remote:
      return std::make_shared<RemoteAgent>(config, std::move(resources.remote));
    case AgentKind::scripted:
      if (!resources.script) throw InputError("scripted agent needs a script");
      return std::make_shared<ScriptedAgent>(config, std::move(*resources.script));
    case AgentKind::simulated:
      return std::make_shared<SimulatedAgent>(config, std::move(resources.profile));
  }
  throw InputError("unknown agent kind");
}

}  // namespace mpsych::agents
