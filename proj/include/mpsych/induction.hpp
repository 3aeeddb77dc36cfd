#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpsych/agents.hpp"
#include "mpsych/condition.hpp"

namespace mpsych::induction {

// An emotion-induction pre-prompt: the question that elicited the narrative
// plus the narrative itself. Strength is negative for happy, positive for
// anxious and 0 for neutral.
struct PrePrompt {
  std::string id;
  Condition condition = Condition::neutral;
  int strength_level = 0;
  std::string generation_question;
  std::string body;

  // Throws InputError on empty fields, out-of-range strength or a condition
  // that disagrees with the sign of strength_level.
  void validate() const;
  agents::InductionTag tag() const { return {condition, strength_level}; }

  static PrePrompt from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

inline constexpr int kMaxStrength = 5;

// Condition implied by a strength level.
Condition condition_for_level(int strength_level);

// Text placed before a task: generation question, blank line, body.
std::string block(const PrePrompt& pre);

// block + blank line + task prompt. Throws PreconditionError on an empty task.
std::string compose(const PrePrompt& pre, std::string_view task_prompt);

// Intensity modifier for |level| in 1..5: "a tiny bit", "slightly", "",
// "very", "extremely".
std::string_view intensity_modifier(int abs_level);

// "Q: Tell me about something that makes you feel <modifier> <valence> using
// approximately 100 words." (neutral: "...something that you know...").
// Throws RangeError for levels outside [-5, 5] or a mismatched condition.
std::string generation_prompt(Condition condition, int strength_level);

std::vector<PrePrompt> load_preprompts(const std::filesystem::path& path);
void save_preprompts(const std::filesystem::path& path, std::span<const PrePrompt> bank);

// Asks `agent` for `samples_per_level` narratives per level at temperature 1.
// Ids are "gen_<level>_<k>".
std::vector<PrePrompt> generate_bank(const agents::Agent& agent, std::span<const int> levels,
                                     int samples_per_level, std::uint64_t seed);

// The ten non-neutral levels -5..-1, 1..5.
std::vector<int> graded_levels();

}  // namespace mpsych::induction
