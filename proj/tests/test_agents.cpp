#include "httplib.h"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>
#include <vector>

#include "doctest.h"
#include "mpsych/agents.hpp"
#include "mpsych/error.hpp"
#include "mpsych/exploration_features.hpp"
#include "oracles.hpp"

using namespace mpsych;
using namespace mpsych::agents;
using bandit::Arm;
using bandit::PosteriorState;

namespace {

CompletionRequest prompt(std::string text) {
  CompletionRequest r;
  r.prompt = std::move(text);
  return r;
}

PosteriorState posterior(double m1, double v1, double m2, double v2) {
  PosteriorState p;
  p.arms[0] = {m1, v1};
  p.arms[1] = {m2, v2};
  return p;
}

// Completions endpoint on a loopback port. `statuses` are returned in order,
// then 200 with `text`.
class FakeEndpoint {
 public:
  FakeEndpoint(std::vector<int> statuses, std::string text)
      : statuses_(std::move(statuses)), text_(std::move(text)) {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      bodies.push_back(req.body);
      auth.push_back(req.get_header_value("Authorization"));
      const std::size_t k = hits++;
      if (k < statuses_.size()) {
        res.status = statuses_[k];
        res.set_content("{\"error\":\"busy\"}", "application/json");
        return;
      }
      nlohmann::json j{{"choices", {{{"text", text_}}}}};
      res.set_content(j.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::mutex mu_;
  std::size_t hits = 0;
  std::vector<std::string> bodies;
  std::vector<std::string> auth;

 private:
  httplib::Server server_;
  std::vector<int> statuses_;
  std::string text_;
  int port_ = 0;
  std::thread thread_;
};

RemoteOptions fake_options(const FakeEndpoint& ep, std::vector<std::chrono::milliseconds>* sleeps) {
  RemoteOptions o;
  o.base_url = ep.url();
  o.api_key = "test-key";
  o.timeout = std::chrono::seconds(5);
  o.retry.sleep = [sleeps](std::chrono::milliseconds d) { sleeps->push_back(d); };
  return o;
}

}  // namespace

TEST_SUITE("agents") {
  TEST_CASE("config validation") {
    AgentConfig c;
    CHECK_NOTHROW(c.validate());
    c.temperature = -0.1;
    CHECK_THROWS_AS(c.validate(), InputError);
    c.temperature = 0.0;
    c.max_tokens = 0;
    CHECK_THROWS_AS(c.validate(), InputError);
    CHECK(parse_agent_kind("scripted") == AgentKind::scripted);
    CHECK(to_string(AgentKind::remote) == "remote");
    CHECK_THROWS_AS(parse_agent_kind("oracle"), InputError);
  }

  TEST_CASE("scripted agent lookup order") {
    Script s;
    s.exact["Q: ping"] = "pong";
    s.contains = {{"ping", "contains-hit"}, {"pin", "later"}};
    const ScriptedAgent agent({AgentKind::scripted}, s);
    CHECK(complete(agent, prompt("Q: ping")) == "pong");
    CHECK(complete(agent, prompt("say ping please")) == "contains-hit");
    CHECK(complete(agent, prompt("pinball")) == "later");
    CHECK_THROWS_AS(complete(agent, prompt("hello")), UnmappedPromptError);

    s.fallback = "default";
    const ScriptedAgent with_fallback({AgentKind::scripted}, s);
    CHECK(complete(with_fallback, prompt("hello")) == "default");
  }

  TEST_CASE("empty prompts are rejected") {
    Script s;
    s.fallback = "x";
    const ScriptedAgent agent({AgentKind::scripted}, s);
    CHECK_THROWS_AS(complete(agent, prompt("")), PreconditionError);
  }

  TEST_CASE("script json") {
    const auto j = nlohmann::json::parse(
        R"({"exact": {"Q: ping": "pong"}, "contains": [["abc", "x"]], "fallback": "f"})");
    const auto s = Script::from_json(j);
    CHECK(s.exact.at("Q: ping") == "pong");
    REQUIRE(s.contains.size() == 1);
    CHECK(s.contains[0].first == "abc");
    CHECK(s.fallback == "f");
  }

  TEST_CASE("hybrid choice probability examples") {
    const HybridAgentParams random_only{0, 1, 0};
    CHECK(choice_probability(random_only, posterior(2, 1, 2, 1)) == 0.5);
    // V = 1, TU = 2
    const double p = choice_probability(random_only, posterior(1, 2, 0, 2));
    CHECK(std::fabs(p - oracle::normal_cdf_by_quadrature(0.5)) < 1e-10);
    CHECK(std::fabs(p - 0.6915) < 1e-4);
    CHECK_THROWS_AS(choice_probability(random_only, posterior(0, 0, 0, 1)), InvalidPosteriorError);
    CHECK_THROWS_AS(choice_probability(random_only, posterior(NAN, 1, 0, 1)),
                    InvalidPosteriorError);
  }

  TEST_CASE("hybrid choice saturates") {
    const HybridAgentParams greedy{1e6, 0, 0};
    RandomSource rng(1);
    int first = 0;
    for (int i = 0; i < 10000; ++i) {
      first += simulate_hybrid_choice(greedy, posterior(1.0, 3, 0.5, 2), rng) == Arm::first;
    }
    CHECK(first / 10000.0 >= 0.999);
  }

  TEST_CASE("hybrid choice frequencies converge to the probit probability") {
    const HybridAgentParams w{0.7, 1.5, -0.9};
    RandomSource rng(99);
    for (const auto& post : {posterior(1, 4, 0, 1), posterior(-2, 0.5, 1, 6), posterior(0, 1, 0, 9)}) {
      const double p = choice_probability(w, post);
      const int n = 40000;
      int first = 0;
      for (int i = 0; i < n; ++i) first += simulate_hybrid_choice(w, post, rng) == Arm::first;
      CHECK(std::fabs(first / double(n) - p) < 3.0 * std::sqrt(p * (1 - p) / n) + 1e-12);
    }
  }

  TEST_CASE("label swap maps p to 1 - p") {
    RandomSource rng(4);
    for (int k = 0; k < 200; ++k) {
      const HybridAgentParams w{rng.normal(), rng.normal(0, 3), rng.normal()};
      const auto post = posterior(rng.normal(0, 3), 0.1 + 5 * rng.uniform(), rng.normal(0, 3),
                                  0.1 + 5 * rng.uniform());
      CHECK(std::fabs(choice_probability(w, post.swapped()) - (1.0 - choice_probability(w, post))) <
            1e-15);
    }
  }

  TEST_CASE("simulated agent is reproducible and stateless") {
    const SimulatedAgent agent({AgentKind::simulated, "sim", 0.0, 32, 17});
    CompletionRequest req = prompt("Q: which machine?");
    req.context = BanditContext{posterior(1, 2, 0, 3), {"F", "J"}};
    req.induction = InductionTag{Condition::anxious, 3};
    req.unit_seed = 1234;
    req.step = 2;
    const auto a = agent.complete(req);
    for (int i = 0; i < 5; ++i) CHECK(agent.complete(req) == a);
    CHECK((a == " F" || a == " J"));

    std::vector<std::string> seen(64);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&, t] {
        for (int i = t; i < 64; i += 4) {
          CompletionRequest r = req;
          r.step = i;
          seen[i] = agent.complete(r);
        }
      });
    }
    for (auto& t : threads) t.join();
    for (int i = 0; i < 64; ++i) {
      CompletionRequest r = req;
      r.step = i;
      CHECK(agent.complete(r) == seen[i]);
    }
  }

  TEST_CASE("simulated profile interpolates bandit weights by strength") {
    const SimulatedProfile prof;
    const auto neutral = prof.bandit_params(InductionTag{Condition::neutral, 0});
    CHECK(neutral.random_exploration == prof.bandit_neutral.random_exploration);
    const auto anxious = prof.bandit_params(InductionTag{Condition::anxious, 3});
    CHECK(anxious.random_exploration == doctest::Approx(prof.bandit_anxious.random_exploration));
    const auto happy = prof.bandit_params(InductionTag{Condition::happy, -3});
    CHECK(happy.exploitation == doctest::Approx(prof.bandit_happy.exploitation));
    const auto round = SimulatedProfile::from_json(prof.to_json());
    CHECK(round.to_json() == prof.to_json());
  }

  TEST_CASE("remote agent returns text verbatim and sends the documented body") {
    FakeEndpoint ep({}, "  Machine F\n");
    std::vector<std::chrono::milliseconds> sleeps;
    AgentConfig cfg{AgentKind::remote, "test-model", 0.0, 7, 0};
    const RemoteAgent agent(cfg, fake_options(ep, &sleeps));
    CompletionRequest req = prompt("Q: hello");
    req.stop_sequences = {"\n"};
    CHECK(agent.complete(req) == "  Machine F\n");
    CHECK(sleeps.empty());
    REQUIRE(ep.bodies.size() == 1);
    const auto body = nlohmann::json::parse(ep.bodies[0]);
    CHECK(body["model"] == "test-model");
    CHECK(body["prompt"] == "Q: hello");
    CHECK(body["max_tokens"] == 7);
    CHECK(body["temperature"] == 0.0);
    CHECK(body["stop"] == nlohmann::json::array({"\n"}));
    CHECK(ep.auth[0] == "Bearer test-key");
  }

  TEST_CASE("remote agent gives up after five 429 responses") {
    FakeEndpoint ep({429, 429, 429, 429, 429}, "never");
    std::vector<std::chrono::milliseconds> sleeps;
    const RemoteAgent agent({AgentKind::remote}, fake_options(ep, &sleeps));
    CHECK_THROWS_AS(agent.complete(prompt("Q: x")), TransportError);
    CHECK(ep.hits == 5);
    using std::chrono::milliseconds;
    CHECK(sleeps == std::vector<milliseconds>{milliseconds(1000), milliseconds(2000),
                                              milliseconds(4000), milliseconds(8000)});
  }

  TEST_CASE("remote agent recovers from transient failures") {
    FakeEndpoint ep({503, 429}, " ok");
    std::vector<std::chrono::milliseconds> sleeps;
    const RemoteAgent agent({AgentKind::remote}, fake_options(ep, &sleeps));
    CHECK(agent.complete(prompt("Q: x")) == " ok");
    CHECK(sleeps.size() == 2);
  }

  TEST_CASE("remote agent does not retry client errors") {
    FakeEndpoint ep({400}, "never");
    std::vector<std::chrono::milliseconds> sleeps;
    const RemoteAgent agent({AgentKind::remote}, fake_options(ep, &sleeps));
    CHECK_THROWS_AS(agent.complete(prompt("Q: x")), TransportError);
    CHECK(ep.hits == 1);
    CHECK(sleeps.empty());
  }

  TEST_CASE("remote agent connection failure") {
    std::vector<std::chrono::milliseconds> sleeps;
    RemoteOptions o;
    o.base_url = "http://127.0.0.1:1";
    o.timeout = std::chrono::seconds(1);
    o.retry.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };
    const RemoteAgent agent({AgentKind::remote}, o);
    CHECK_THROWS_AS(agent.complete(prompt("Q: x")), TransportError);
    CHECK(sleeps.size() == 4);
    CHECK_THROWS_AS(RemoteAgent({AgentKind::remote}, RemoteOptions{}), InputError);
  }
}
