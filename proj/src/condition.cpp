#include "mpsych/condition.hpp"

#include "mpsych/error.hpp"

namespace mpsych {

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::anxious: return "anxious";
    case Condition::happy: return "happy";
    case Condition::neutral: return "neutral";
    case Condition::none: return "none";
  }
  return "none";
}

Condition parse_condition(std::string_view name) {
  if (name == "anxious") return Condition::anxious;
  if (name == "happy") return Condition::happy;
  if (name == "neutral") return Condition::neutral;
  if (name == "none") return Condition::none;
  throw InputError("unknown condition: " + std::string(name));
}

}  // namespace mpsych
