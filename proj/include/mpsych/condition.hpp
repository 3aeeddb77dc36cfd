#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace mpsych {

// Emotion-induction condition of a pre-prompt. `none` marks runs without any
// pre-prompt (the plain questionnaire baseline).
enum class Condition { anxious, happy, neutral, none };

std::string_view to_string(Condition c);
// Throws InputError on unknown names.
Condition parse_condition(std::string_view name);

}  // namespace mpsych
