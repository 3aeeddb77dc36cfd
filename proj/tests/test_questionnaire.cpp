#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "mpsych/agents.hpp"
#include "mpsych/error.hpp"
#include "mpsych/questionnaire.hpp"
#include "oracles.hpp"

using namespace mpsych;
using namespace mpsych::questionnaire;

namespace {

const std::vector<QuestionnaireItem>& bank() {
  static const auto items = load_items(std::string(MPSYCH_DATA_DIR) + "/items.json");
  return items;
}

// Renders every (item, phrasing, permutation) prompt, asks the agent and
// parses the reply the way the runner does.
std::vector<ItemResponse> administer(const agents::Agent& agent,
                                     std::vector<Phrasing> phrasings = {Phrasing::original}) {
  std::vector<ItemResponse> out;
  const auto& perms = all_permutations();
  for (const auto& item : bank()) {
    for (auto ph : phrasings) {
      for (std::size_t k = 0; k < perms.size(); ++k) {
        agents::CompletionRequest req;
        req.prompt = render_item(item, ph, perms[k]);
        const auto raw = agents::complete(agent, req);
        out.push_back({item.id, ph, static_cast<int>(k), std::nullopt, raw,
                       parse_response(raw, perms[k])});
      }
    }
  }
  return out;
}

// Answers with an option chosen by item identity only.
agents::ScriptedAgent semantic_agent() {
  agents::Script s;
  for (const auto& item : bank()) {
    const auto option = kCanonicalOptions[static_cast<std::size_t>((item.id * 7) % 4)];
    s.contains.emplace_back("Q: " + item.original_text + "\n", " " + std::string(option) + ".");
    s.contains.emplace_back("Q: " + item.rephrased_text + "\n", " " + std::string(option));
  }
  return agents::ScriptedAgent({agents::AgentKind::scripted}, s);
}

}  // namespace

TEST_SUITE("questionnaire") {
  TEST_CASE("item bank") {
    REQUIRE(bank().size() == 21);
    CHECK(bank()[2].original_text == "I feel agonized over my problems");
    for (const auto& it : bank()) CHECK(it.original_text != it.rephrased_text);
    auto broken = bank();
    broken[4].id = 9;
    CHECK_THROWS_AS(validate_items(broken), InputError);
    broken = bank();
    broken[0].rephrased_text.clear();
    CHECK_THROWS_AS(validate_items(broken), InputError);
  }

  TEST_CASE("permutations") {
    const auto& perms = all_permutations();
    REQUIRE(perms.size() == 24);
    CHECK(perms.front().order == std::array<int, 4>{0, 1, 2, 3});
    CHECK(perms.back().order == std::array<int, 4>{3, 2, 1, 0});
    CHECK(std::is_sorted(perms.begin(), perms.end(),
                         [](const auto& a, const auto& b) { return a.order < b.order; }));
    int counts[4][4] = {};
    for (const auto& p : perms) {
      CHECK_NOTHROW(p.validate());
      for (int pos = 0; pos < 4; ++pos) ++counts[p.order[pos]][pos];
    }
    for (auto& row : counts)
      for (int c : row) CHECK(c == 6);
    const OptionPermutation dup{{0, 0, 1, 2}};
    CHECK_THROWS_AS(dup.validate(), InputError);
  }

  TEST_CASE("render_item") {
    const auto& item3 = bank()[2];
    const auto text = render_item(item3, Phrasing::original, all_permutations()[0]);
    CHECK(text.find("I feel agonized over my problems") != std::string::npos);
    for (auto opt : kCanonicalOptions) CHECK(text.find(opt) != std::string::npos);
    CHECK(text.ends_with("A:"));
    CHECK(text == render_item(item3, Phrasing::original, all_permutations()[0]));
    CHECK(text.find("honestly") < text.find("Q: "));

    const std::string block = "Q: Tell me about something.\n\nA long story.";
    const auto with = render_item(item3, Phrasing::original, all_permutations()[0], block);
    CHECK(with.starts_with(block));
    CHECK(with.find(block) < with.find("Q: I feel agonized"));

    const auto rev = render_item(item3, Phrasing::rephrased, all_permutations()[23]);
    CHECK(rev.find(item3.rephrased_text) != std::string::npos);
    CHECK(rev.find("Options: almost always, often, occasionally, almost never") !=
          std::string::npos);
  }

  TEST_CASE("parse_response examples") {
    CHECK(parse_response("occasionally") == 2);
    CHECK(parse_response(" Almost always.") == 4);
    CHECK(parse_response("almost never") == 1);
    CHECK(parse_response("OFTEN!") == 3);
    CHECK(parse_response("Often, because I worry") == 3);
    CHECK_FALSE(parse_response("maybe sometimes").has_value());
    CHECK_FALSE(parse_response("almost").has_value());
    CHECK_FALSE(parse_response("").has_value());
  }

  TEST_CASE("parse inverts render for every option and order") {
    for (const auto& p : all_permutations()) {
      for (int c = 0; c < 4; ++c) {
        CHECK(parse_response(std::string(kCanonicalOptions[c]), p) == c + 1);
      }
    }
  }

  TEST_CASE("score_questionnaire") {
    std::vector<ItemResponse> rs;
    for (int i = 1; i <= 21; ++i) rs.push_back({i, Phrasing::original, 0, {}, "occasionally", 2});
    CHECK(score_questionnaire(rs).mean == 2.0);
    for (auto& r : rs) r.score = 4;
    CHECK(score_questionnaire(rs).mean == 4.0);
    rs[0].score.reset();
    rs[1].score = 1;
    const auto s = score_questionnaire(rs);
    CHECK(s.n_excluded == 1);
    CHECK(s.n_parsed == 20);
    CHECK(s.mean == doctest::Approx((19 * 4 + 1) / 20.0));
    for (auto& r : rs) r.score.reset();
    CHECK_THROWS_AS(score_questionnaire(rs), EmptyInputError);
  }

  TEST_CASE("score is invariant to the order of its input") {
    RandomSource rng(2);
    std::vector<ItemResponse> rs;
    for (int i = 0; i < 200; ++i) {
      rs.push_back({1 + i % 21, Phrasing::original, i % 24, {}, "", 1 + int(rng.uniform_index(4))});
    }
    const double m = score_questionnaire(rs).mean;
    for (int k = 0; k < 10; ++k) {
      stable_shuffle(rs.begin(), rs.end(), rng);
      CHECK(score_questionnaire(rs).mean == doctest::Approx(m).epsilon(1e-14));
    }
  }

  TEST_CASE("semantic agent scores are permutation and phrasing invariant") {
    const auto agent = semantic_agent();
    const auto rs = administer(agent, {Phrasing::original, Phrasing::rephrased});
    std::map<int, std::set<int>> by_item;
    for (const auto& r : rs) {
      REQUIRE(r.score.has_value());
      by_item[r.item_id].insert(*r.score);
    }
    for (const auto& [id, scores] : by_item) CHECK(scores.size() == 1);

    RandomSource rng(5);
    const auto split = split_half_permutation_correlation(rs, rng, 50);
    CHECK(split.mean_r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(split.n_items == 21);
    CHECK(split.split_r.size() == 50);

    const auto cmp = compare_phrasings(rs);
    CHECK(cmp.item_correlation.estimate == doctest::Approx(1.0));
    CHECK(cmp.mean_original == cmp.mean_rephrased);
  }

  TEST_CASE("constant agent has no item variance") {
    agents::Script s;
    s.fallback = " often";
    const agents::ScriptedAgent agent({agents::AgentKind::scripted}, s);
    const auto rs = administer(agent);
    CHECK(score_questionnaire(rs).mean == 3.0);
    RandomSource rng(1);
    CHECK_THROWS_AS(split_half_permutation_correlation(rs, rng), DegenerateVarianceError);
  }

  TEST_CASE("split-half needs two permutations and three items") {
    std::vector<ItemResponse> rs;
    for (int i = 1; i <= 21; ++i) rs.push_back({i, Phrasing::original, 0, {}, "", 1 + i % 4});
    RandomSource rng(1);
    CHECK_THROWS_AS(split_half_permutation_correlation(rs, rng), InputError);
  }

  TEST_CASE("random answers give null split-half correlations") {
    RandomSource rng(77);
    std::vector<ItemResponse> rs;
    for (int i = 1; i <= 21; ++i)
      for (int k = 0; k < 24; ++k)
        rs.push_back({i, Phrasing::original, k, {}, "", 1 + int(rng.uniform_index(4))});
    double sum_r = 0.0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
      RandomSource split_rng(1000 + s);
      const auto res = split_half_permutation_correlation(rs, split_rng, 100);
      for (double r : res.split_r) CHECK(std::fabs(r) <= 1.0);
      sum_r += res.mean_r;
    }
    const double avg = sum_r / seeds;
    CHECK(std::fabs(avg) < 0.6);
    // Per-item means are averages of 12 draws; under the null their
    // correlation over 21 items follows the independent-pairs spread.
    CHECK(std::fabs(avg) < oracle::null_abs_r_quantile(21, 0.999));
  }
}
