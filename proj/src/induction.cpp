#include "mpsych/induction.hpp"

#include <fstream>

#include "mpsych/error.hpp"

namespace mpsych::induction {
namespace {

using json = nlohmann::json;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

Condition condition_for_level(int strength_level) {
  if (strength_level > 0) return Condition::anxious;
  if (strength_level < 0) return Condition::happy;
  return Condition::neutral;
}

void PrePrompt::validate() const {
  if (id.empty()) throw InputError("pre-prompt id is empty");
  if (body.empty()) throw InputError("pre-prompt " + id + " has an empty body");
  if (generation_question.empty()) {
    throw InputError("pre-prompt " + id + " has an empty generation question");
  }
  if (strength_level < -kMaxStrength || strength_level > kMaxStrength) {
    throw InputError("pre-prompt " + id + " strength out of range");
  }
  if (condition != condition_for_level(strength_level)) {
    throw InputError("pre-prompt " + id + ": condition disagrees with strength sign");
  }
}

PrePrompt PrePrompt::from_json(const json& j) {
  PrePrompt p;
  p.id = j.at("id").get<std::string>();
  p.condition = parse_condition(j.at("condition").get<std::string>());
  p.strength_level = j.at("strength_level").get<int>();
  p.generation_question = j.at("generation_question").get<std::string>();
  p.body = j.at("body").get<std::string>();
  p.validate();
  return p;
}

json PrePrompt::to_json() const {
  return json{{"id", id},
              {"condition", std::string(to_string(condition))},
              {"strength_level", strength_level},
              {"generation_question", generation_question},
              {"body", body}};
}

std::string block(const PrePrompt& pre) { return pre.generation_question + "\n\n" + pre.body; }

std::string compose(const PrePrompt& pre, std::string_view task_prompt) {
  if (task_prompt.empty()) throw PreconditionError("compose: task prompt is empty");
  pre.validate();
  std::string out = block(pre);
  out += "\n\n";
  out += task_prompt;
  return out;
}

std::string_view intensity_modifier(int abs_level) {
  switch (abs_level) {
    case 1: return "a tiny bit";
    case 2: return "slightly";
    case 3: return "";
    case 4: return "very";
    case 5: return "extremely";
    default: throw RangeError("intensity level must be in 1..5");
  }
}

std::string generation_prompt(Condition condition, int strength_level) {
  if (strength_level < -kMaxStrength || strength_level > kMaxStrength) {
    throw RangeError("strength level must lie in [-5, 5]");
  }
  if (condition == Condition::none || condition != condition_for_level(strength_level)) {
    throw RangeError("condition does not match strength level " +
                     std::to_string(strength_level));
  }
  if (strength_level == 0) {
    return "Q: Tell me about something that you know using approximately 100 words.";
  }
  const auto modifier = intensity_modifier(strength_level < 0 ? -strength_level : strength_level);
  const std::string valence = strength_level < 0 ? "happy and relaxed" : "sad and anxious";
  std::string feeling = modifier.empty() ? valence : std::string(modifier) + " " + valence;
  return "Q: Tell me about something that makes you feel " + feeling +
         " using approximately 100 words.";
}

std::vector<PrePrompt> load_preprompts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pre-prompt bank " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed pre-prompt bank " + path.string() + ": " + e.what());
  }
  std::vector<PrePrompt> bank;
  for (const auto& entry : j) bank.push_back(PrePrompt::from_json(entry));
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (std::size_t k = i + 1; k < bank.size(); ++k) {
      if (bank[i].id == bank[k].id) throw InputError("duplicate pre-prompt id " + bank[i].id);
    }
  }
  return bank;
}

void save_preprompts(const std::filesystem::path& path, std::span<const PrePrompt> bank) {
  json j = json::array();
  for (const auto& p : bank) j.push_back(p.to_json());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<int> graded_levels() { return {-5, -4, -3, -2, -1, 1, 2, 3, 4, 5}; }

std::vector<PrePrompt> generate_bank(const agents::Agent& agent, std::span<const int> levels,
                                     int samples_per_level, std::uint64_t seed) {
  std::vector<PrePrompt> bank;
  for (int level : levels) {
    const Condition condition = condition_for_level(level);
    const std::string question = generation_prompt(condition, level);
    for (int k = 0; k < samples_per_level; ++k) {
      agents::CompletionRequest req;
      req.prompt = question + "\nA:";
      req.temperature = 1.0;
      req.unit_seed = derive_seed(seed, static_cast<std::uint64_t>(level + 100),
                                  static_cast<std::uint64_t>(k));
      PrePrompt p;
      p.id = "gen_" + std::to_string(level) + "_" + std::to_string(k + 1);
      p.condition = condition;
      p.strength_level = level;
      p.generation_question = question;
      p.body = trim(agents::complete(agent, req));
      p.validate();
      bank.push_back(std::move(p));
    }
  }
  return bank;
}

}  // namespace mpsych::induction
