#include <cmath>
#include <set>

#include "doctest.h"
#include "mpsych/agents.hpp"
#include "mpsych/bandit.hpp"
#include "mpsych/error.hpp"
#include "mpsych/induction.hpp"
#include "oracles.hpp"

using namespace mpsych;
using namespace mpsych::bandit;

namespace {

agents::ScriptedAgent always(std::string reply) {
  agents::Script s;
  s.fallback = std::move(reply);
  return agents::ScriptedAgent({agents::AgentKind::scripted}, s);
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_SUITE("bandit") {
  TEST_CASE("config validation") {
    BanditConfig c;
    CHECK_NOTHROW(c.validate());
    c.n_trials = 0;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = {};
    c.prior_variance = 0.0;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = {};
    c.reward_variance = -1.0;
    CHECK_THROWS_AS(c.validate(), InputError);
  }

  TEST_CASE("latent means follow the prior with variance 10") {
    BanditConfig c;
    RandomSource rng(123);
    std::vector<double> thetas;
    for (int g = 0; g < 50000; ++g) {
      const auto game = new_game(c, rng, g);
      thetas.push_back(game.latent_means()[0]);
      thetas.push_back(game.latent_means()[1]);
    }
    double m = 0, s2 = 0;
    for (double t : thetas) m += t;
    m /= thetas.size();
    for (double t : thetas) s2 += (t - m) * (t - m);
    const double sd = std::sqrt(s2 / (thetas.size() - 1));
    CHECK(std::fabs(sd / std::sqrt(10.0) - 1.0) < 0.02);
    CHECK(std::fabs(m) < 0.05);
  }

  TEST_CASE("degenerate prior and determinism") {
    BanditConfig c;
    c.prior_variance = 1e-12;
    RandomSource rng(5);
    const auto g = new_game(c, rng);
    CHECK(std::fabs(g.latent_means()[0]) < 1e-4);
    CHECK(std::fabs(g.latent_means()[1]) < 1e-4);

    RandomSource a(77), b(77);
    CHECK(new_game({}, a).latent_means() == new_game({}, b).latent_means());
  }

  TEST_CASE("displayed rewards are rounded draws around theta") {
    BanditConfig c;
    c.n_trials = 100000;
    BanditGame game(c, {5.0, -1.0});
    RandomSource rng(8);
    double sum = 0;
    for (int i = 0; i < c.n_trials; ++i) {
      const double r = step(game, Arm::first, rng);
      CHECK(r == std::round(r));
      sum += r;
    }
    const double mean = sum / c.n_trials;
    CHECK(mean >= 4.9);
    CHECK(mean <= 5.1);
    CHECK_THROWS_AS(step(game, Arm::first, rng), GameOverError);

    BanditConfig exact;
    exact.reward_variance = 1e-12;
    BanditGame sharp(exact, {3.0, 0.0});
    CHECK(step(sharp, Arm::first, rng) == 3.0);
    CHECK(sharp.history()[0].displayed_reward == 3.0);
  }

  TEST_CASE("eleventh step of a ten-trial game") {
    BanditGame game({}, {0.0, 1.0});
    RandomSource rng(1);
    for (int i = 0; i < 10; ++i) step(game, i % 2 ? Arm::first : Arm::second, rng);
    CHECK(game.finished());
    CHECK_THROWS_AS(step(game, Arm::first, rng), GameOverError);
  }

  TEST_CASE("kalman update worked example") {
    const auto prior = PosteriorState::prior(0.0, 10.0);
    const auto post = kalman_update(prior, Arm::first, 5.0, 1.0);
    CHECK(post[Arm::first].mean == doctest::Approx(50.0 / 11.0).epsilon(1e-15));
    CHECK(post[Arm::first].variance == doctest::Approx(10.0 / 11.0).epsilon(1e-15));
    CHECK(post[Arm::second] == prior[Arm::second]);

    PosteriorState p;
    p.arms = {ArmBelief{2.0, 3.0}, ArmBelief{-1.0, 4.0}};
    const auto same = kalman_update(p, Arm::second, -1.0, 2.0);
    CHECK(same[Arm::second].mean == -1.0);
    CHECK(same[Arm::second].variance == doctest::Approx(4.0 * (1.0 - 4.0 / 6.0)));
    CHECK(same[Arm::first] == p[Arm::first]);

    CHECK_THROWS_AS(kalman_update(prior, Arm::first, NAN, 1.0), InvalidObservationError);
    CHECK_THROWS_AS(kalman_update(prior, Arm::first, INFINITY, 1.0), InvalidObservationError);
    CHECK_THROWS_AS(kalman_update(PosteriorState::prior(0, -1), Arm::first, 1.0, 1.0),
                    InvalidPosteriorError);
  }

  TEST_CASE("kalman update matches grid Bayes integration") {
    RandomSource rng(2024);
    for (int k = 0; k < 100; ++k) {
      const double m0 = rng.normal(0, 5);
      const double v0 = 0.1 + 20 * rng.uniform();
      const double nv = 0.1 + 5 * rng.uniform();
      const double r = m0 + rng.normal(0, std::sqrt(v0 + nv));
      const auto arm = k % 2 ? Arm::first : Arm::second;
      PosteriorState p;
      p[arm] = {m0, v0};
      p[other_arm(arm)] = {rng.normal(), 1.0 + rng.uniform()};
      const auto post = kalman_update(p, arm, r, nv);
      const auto ref = oracle::grid_bayes(m0, v0, r, nv);
      CHECK(std::fabs(post[arm].mean - ref.mean) < 1e-8);
      CHECK(std::fabs(post[arm].variance - ref.variance) < 1e-8);
      CHECK(post[arm].variance < v0);
      CHECK(post[other_arm(arm)] == p[other_arm(arm)]);
    }
  }

  TEST_CASE("kalman updates commute") {
    RandomSource rng(3);
    for (int k = 0; k < 50; ++k) {
      const auto prior = PosteriorState::prior(rng.normal(), 0.5 + 10 * rng.uniform());
      const double r1 = std::round(rng.normal(0, 3)), r2 = std::round(rng.normal(0, 3));
      const auto ab = kalman_update(kalman_update(prior, Arm::first, r1, 1.0), Arm::first, r2, 1.0);
      const auto ba = kalman_update(kalman_update(prior, Arm::first, r2, 1.0), Arm::first, r1, 1.0);
      CHECK(ab[Arm::first].mean == doctest::Approx(ba[Arm::first].mean).epsilon(1e-13));
      CHECK(ab[Arm::first].variance == doctest::Approx(ba[Arm::first].variance).epsilon(1e-13));
    }
  }

  TEST_CASE("ten updates of one arm") {
    auto p = PosteriorState::prior(0.0, 10.0);
    double prec = 1.0 / 10.0, weighted = 0.0;
    for (int i = 0; i < 10; ++i) {
      const double r = (i * 37) % 7 - 3.0;
      const double before = p[Arm::second].variance;
      p = kalman_update(p, Arm::second, r, 1.0);
      CHECK(p[Arm::second].variance < before);
      prec += 1.0;
      weighted += r;
    }
    CHECK(p[Arm::second].variance == doctest::Approx(10.0 / 101.0).epsilon(1e-13));
    CHECK(p[Arm::second].variance == doctest::Approx(1.0 / prec).epsilon(1e-13));
    CHECK(p[Arm::second].mean == doctest::Approx(weighted / prec).epsilon(1e-12));
    CHECK(p[Arm::first] == ArmBelief{0.0, 10.0});
  }

  TEST_CASE("prompt rendering") {
    const std::array<std::string, 2> labels{"F", "J"};
    const auto empty = render_bandit_prompt({}, labels, 10);
    CHECK(empty.find("machine F") != std::string::npos);
    CHECK(empty.find("machine J") != std::string::npos);
    CHECK(empty.ends_with("Q: Which machine do you choose?\nA: Machine"));
    CHECK(count(empty, "You chose") == 0);

    std::vector<TrialRecord> h(3);
    h[0].chosen_arm = Arm::first;
    h[0].displayed_reward = 4;
    h[1].chosen_arm = Arm::second;
    h[1].displayed_reward = -2;
    h[2].chosen_arm = Arm::first;
    h[2].displayed_reward = 0;
    const auto text = render_bandit_prompt(h, labels, 10);
    CHECK(count(text, "You chose machine") == 3);
    const auto l0 = text.find("You chose machine F and received 4 points.");
    const auto l1 = text.find("You chose machine J and received -2 points.");
    const auto l2 = text.find("You chose machine F and received 0 points.");
    CHECK(l0 < l1);
    CHECK(l1 < l2);
    CHECK(l2 != std::string::npos);
    CHECK(text == render_bandit_prompt(h, labels, 10));
  }

  TEST_CASE("parse_choice") {
    const std::array<std::string, 2> labels{"F", "J"};
    CHECK(parse_choice(" F", labels) == Arm::first);
    CHECK(parse_choice("I would pick Machine J because it paid more.", labels) == Arm::second);
    CHECK(parse_choice("F or J", labels) == Arm::first);
    CHECK(parse_choice("machine j", labels) == Arm::second);
    CHECK_THROWS_AS(parse_choice("Fred says no", labels), ParseFailureError);
    CHECK_THROWS_AS(parse_choice("", labels), ParseFailureError);
  }

  TEST_CASE("machine labels") {
    const auto alphabet = label_alphabet();
    CHECK(alphabet.size() == 8);
    RandomSource rng(6);
    std::set<std::string> used;
    for (int i = 0; i < 200; ++i) {
      const auto l = draw_machine_labels(rng);
      CHECK(l[0] != l[1]);
      used.insert(l[0]);
      used.insert(l[1]);
    }
    CHECK(used.size() == 8);
  }

  TEST_CASE("scripted agent always naming the first machine") {
    const auto agent = always(" F");
    GameSetup setup;
    setup.seed = 10;
    setup.labels = std::array<std::string, 2>{"F", "J"};
    const auto recs = run_game(agent, {}, setup);
    REQUIRE(recs.size() == 10);
    for (int t = 0; t < 10; ++t) {
      CHECK(recs[t].chosen_arm == Arm::first);
      CHECK(recs[t].trial_index == t);
      CHECK(recs[t].pre_choice_posterior[Arm::second] == ArmBelief{0.0, 10.0});
    }
  }

  TEST_CASE("game records replay through the Kalman filter") {
    const agents::SimulatedAgent agent({agents::AgentKind::simulated, "sim", 0.0, 32, 3});
    BanditConfig cfg;
    GameSetup setup;
    setup.seed = 99;
    setup.game_id = 4;
    const auto recs = run_game(agent, cfg, setup);
    auto p = PosteriorState::prior(cfg.prior_mean, cfg.prior_variance);
    for (const auto& r : recs) {
      CHECK(r.game_id == 4);
      CHECK(r.pre_choice_posterior == p);
      CHECK(r.displayed_reward == std::round(r.displayed_reward));
      p = kalman_update(p, r.chosen_arm, r.displayed_reward, cfg.reward_variance);
    }
    const auto again = run_game(agent, cfg, setup);
    REQUIRE(again.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      CHECK(again[i].chosen_arm == recs[i].chosen_arm);
      CHECK(again[i].displayed_reward == recs[i].displayed_reward);
      CHECK(again[i].raw_completion == recs[i].raw_completion);
    }
  }

  TEST_CASE("pre-prompt precedes the casino scenario") {
    agents::Script s;
    s.contains = {{"Once upon a time", " J"}};
    const agents::ScriptedAgent agent({agents::AgentKind::scripted}, s);
    induction::PrePrompt pre{"n1", Condition::neutral, 0,
                             induction::generation_prompt(Condition::neutral, 0),
                             "Once upon a time."};
    GameSetup setup;
    setup.pre_prompt = pre;
    setup.labels = std::array<std::string, 2>{"F", "J"};
    const auto recs = run_game(agent, {}, setup);
    for (const auto& r : recs) {
      CHECK(r.chosen_arm == Arm::second);
      CHECK(r.pre_prompt_id == "n1");
      CHECK(r.condition == Condition::neutral);
    }
  }

  TEST_CASE("unparseable answers are retried once") {
    agents::Script s;
    s.contains = {{"Answer with the letter", " J"}};
    s.fallback = " I am not sure";
    const agents::ScriptedAgent fixable({agents::AgentKind::scripted}, s);
    GameSetup setup;
    setup.labels = std::array<std::string, 2>{"F", "J"};
    const auto recs = run_game(fixable, {}, setup);
    for (const auto& r : recs) {
      CHECK(r.chosen_arm == Arm::second);
      CHECK(r.rejected_completion == " I am not sure");
    }

    setup.game_id = 17;
    try {
      run_game(always("no idea"), {}, setup);
      FAIL("expected a parse failure");
    } catch (const ParseFailureError& e) {
      CHECK(std::string(e.what()).find("17") != std::string::npos);
    }
  }
}
