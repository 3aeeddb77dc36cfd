#include <filesystem>
#include <map>

#include "doctest.h"
#include "mpsych/agents.hpp"
#include "mpsych/error.hpp"
#include "mpsych/induction.hpp"

using namespace mpsych;
using namespace mpsych::induction;

namespace {

PrePrompt sample(Condition c, int level) {
  return {"p", c, level, generation_prompt(c, level), "Some story."};
}

}  // namespace

TEST_SUITE("induction") {
  TEST_CASE("compose places the block before the task") {
    const auto anxious = sample(Condition::anxious, 3);
    const auto text = compose(anxious, "Q: My heart beats fast.\nA:");
    CHECK(text == anxious.generation_question + "\n\n" + anxious.body + "\n\nQ: My heart beats fast.\nA:");
    CHECK(text.starts_with(block(anxious)));
    CHECK(compose(anxious, "x") == compose(anxious, "x"));
    CHECK_THROWS_AS(compose(anxious, ""), PreconditionError);
  }

  TEST_CASE("generation prompts") {
    CHECK(generation_prompt(Condition::anxious, 1).find("sad and anxious") != std::string::npos);
    CHECK(generation_prompt(Condition::happy, -2).find("happy and relaxed") != std::string::npos);
    CHECK(generation_prompt(Condition::neutral, 0).find("something that you know") !=
          std::string::npos);
    CHECK(generation_prompt(Condition::anxious, 3) ==
          "Q: Tell me about something that makes you feel sad and anxious using approximately "
          "100 words.");
    CHECK(generation_prompt(Condition::anxious, 5) ==
          "Q: Tell me about something that makes you feel extremely sad and anxious using "
          "approximately 100 words.");
    CHECK(generation_prompt(Condition::anxious, 4) ==
          "Q: Tell me about something that makes you feel very sad and anxious using "
          "approximately 100 words.");
    CHECK(intensity_modifier(1) == "a tiny bit");
    CHECK(intensity_modifier(2) == "slightly");
    CHECK_THROWS_AS(generation_prompt(Condition::anxious, 6), RangeError);
    CHECK_THROWS_AS(generation_prompt(Condition::happy, 2), RangeError);
    CHECK_THROWS_AS(generation_prompt(Condition::neutral, 1), RangeError);
  }

  TEST_CASE("levels and conditions") {
    CHECK(condition_for_level(-4) == Condition::happy);
    CHECK(condition_for_level(0) == Condition::neutral);
    CHECK(condition_for_level(2) == Condition::anxious);
    CHECK(graded_levels() == std::vector<int>{-5, -4, -3, -2, -1, 1, 2, 3, 4, 5});
    CHECK(sample(Condition::anxious, 3).tag().strength_level == 3);
    PrePrompt bad = sample(Condition::anxious, 3);
    bad.condition = Condition::happy;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = sample(Condition::anxious, 3);
    bad.body.clear();
    CHECK_THROWS_AS(bad.validate(), InputError);
  }

  TEST_CASE("canonical and graded banks") {
    const auto canon = load_preprompts(std::string(MPSYCH_DATA_DIR) + "/preprompts.json");
    REQUIRE(canon.size() == 9);
    std::map<Condition, int> per;
    for (const auto& p : canon) ++per[p.condition];
    CHECK(per[Condition::anxious] == 3);
    CHECK(per[Condition::happy] == 3);
    CHECK(per[Condition::neutral] == 3);

    const auto graded = load_preprompts(std::string(MPSYCH_DATA_DIR) + "/preprompts_graded.json");
    REQUIRE(graded.size() == 30);
    std::map<int, int> per_level;
    for (const auto& p : graded) ++per_level[p.strength_level];
    CHECK(per_level.size() == 10);
    for (const auto& [level, n] : per_level) {
      CHECK(level != 0);
      CHECK(n == 3);
    }
  }

  TEST_CASE("bank round trip and generation") {
    agents::Script s;
    s.fallback = " A calm afternoon by the lake.";
    const agents::ScriptedAgent agent({agents::AgentKind::scripted}, s);
    const std::vector<int> levels{-1, 0, 4};
    const auto bank = generate_bank(agent, levels, 2, 9);
    REQUIRE(bank.size() == 6);
    CHECK(bank[0].id == "gen_-1_1");
    CHECK(bank[2].condition == Condition::neutral);
    CHECK(bank[5].body == "A calm afternoon by the lake.");

    const auto path = std::filesystem::temp_directory_path() / "mpsych_bank_test.json";
    save_preprompts(path, bank);
    const auto back = load_preprompts(path);
    REQUIRE(back.size() == bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) CHECK(back[i].to_json() == bank[i].to_json());
    std::filesystem::remove(path);
  }
}
