#include "mpsych/bandit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "mpsych/error.hpp"

namespace mpsych::bandit {
namespace {

// Letters that do not double as English words or contraction fragments.
constexpr std::array<std::string_view, 8> kLabelAlphabet = {"B", "F", "G", "J",
                                                            "K", "P", "R", "X"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> tokens(std::string_view raw) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : raw) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string with_game(int game_id, const std::string& what) {
  return "game " + std::to_string(game_id) + ": " + what;
}

// Calls the agent and re-raises its errors with the game id in the message,
// keeping the error type.
std::string ask(const agents::Agent& agent, const agents::CompletionRequest& req, int game_id) {
  try {
    return agents::complete(agent, req);
  } catch (const UnmappedPromptError& e) {
    throw UnmappedPromptError(with_game(game_id, e.what()));
  } catch (const TransportError& e) {
    throw TransportError(with_game(game_id, e.what()));
  } catch (const InputError& e) {
    throw InputError(with_game(game_id, e.what()));
  }
}

constexpr std::string_view kQuestion = "Q: Which machine do you choose?\nA: Machine";

}  // namespace

void BanditConfig::validate() const {
  if (n_trials < 1) throw InputError("bandit n_trials must be >= 1");
  if (!(prior_variance > 0.0) || !(reward_variance > 0.0)) {
    throw InputError("bandit variances must be positive");
  }
  if (!std::isfinite(prior_mean)) throw InputError("bandit prior mean must be finite");
}

PosteriorState kalman_update(const PosteriorState& posterior, Arm arm, double reward,
                             double reward_variance) {
  posterior.validate();
  if (!std::isfinite(reward)) throw InvalidObservationError("reward must be finite");
  if (!(reward_variance > 0.0)) throw InvalidObservationError("reward variance must be > 0");
  PosteriorState next = posterior;
  const ArmBelief& prior = posterior[arm];
  const double gain = prior.variance / (prior.variance + reward_variance);
  next[arm].mean = prior.mean + gain * (reward - prior.mean);
  next[arm].variance = (1.0 - gain) * prior.variance;
  return next;
}

BanditGame::BanditGame(BanditConfig config, std::array<double, 2> latent_means, int game_id)
    : config_(config),
      latent_means_(latent_means),
      game_id_(game_id),
      posterior_(PosteriorState::prior(config.prior_mean, config.prior_variance)) {
  config_.validate();
}

double BanditGame::step(Arm arm, RandomSource& rng, TrialRecord annotations) {
  if (finished()) {
    throw GameOverError(with_game(game_id_, "all " + std::to_string(config_.n_trials) +
                                                " trials have been played"));
  }
  const double theta = latent_means_[arm_slot(arm)];
  const double reward = std::round(theta + std::sqrt(config_.reward_variance) * rng.normal());

  TrialRecord rec = std::move(annotations);
  rec.game_id = game_id_;
  rec.trial_index = static_cast<int>(history_.size());
  rec.chosen_arm = arm;
  rec.displayed_reward = reward;
  rec.pre_choice_posterior = posterior_;
  history_.push_back(std::move(rec));

  posterior_ = kalman_update(posterior_, arm, reward, config_.reward_variance);
  return reward;
}

BanditGame new_game(const BanditConfig& config, RandomSource& rng, int game_id) {
  config.validate();
  const double sd = std::sqrt(config.prior_variance);
  const double theta1 = config.prior_mean + sd * rng.normal();
  const double theta2 = config.prior_mean + sd * rng.normal();
  return BanditGame(config, {theta1, theta2}, game_id);
}

double step(BanditGame& game, Arm arm, RandomSource& rng) { return game.step(arm, rng); }

std::span<const std::string_view> label_alphabet() { return kLabelAlphabet; }

std::array<std::string, 2> draw_machine_labels(RandomSource& rng) {
  std::array<std::string_view, kLabelAlphabet.size()> letters = kLabelAlphabet;
  stable_shuffle(letters.begin(), letters.end(), rng);
  return {std::string(letters[0]), std::string(letters[1])};
}

std::string render_bandit_prompt(std::span<const TrialRecord> history,
                                 const std::array<std::string, 2>& labels, int n_trials) {
  std::ostringstream out;
  out << "You are in a casino with two slot machines, machine " << labels[0] << " and machine "
      << labels[1] << ". Each time you play a machine you receive points. "
      << "The machines pay out different amounts on average, and points can be negative. "
      << "Your goal is to collect as many points as possible";
  if (n_trials > 0) out << " over " << n_trials << " plays";
  out << ".\n\n";
  if (!history.empty()) {
    for (const auto& rec : history) {
      out << "You chose machine " << labels[arm_slot(rec.chosen_arm)] << " and received "
          << static_cast<long long>(rec.displayed_reward) << " points.\n";
    }
    out << '\n';
  }
  out << kQuestion;
  return out.str();
}

Arm parse_choice(std::string_view raw, const std::array<std::string, 2>& labels) {
  const std::string a = lower(labels[0]);
  const std::string b = lower(labels[1]);
  for (const auto& tok : tokens(raw)) {
    const bool is_a = tok == a;
    const bool is_b = tok == b;
    if (is_a && is_b) break;
    if (is_a) return Arm::first;
    if (is_b) return Arm::second;
  }
  throw ParseFailureError("no machine label in answer: \"" + std::string(raw) + "\"");
}

std::vector<TrialRecord> run_game(const agents::Agent& agent, const BanditConfig& config,
                                  const GameSetup& setup) {
  RandomSource rng(setup.seed);
  BanditGame game = new_game(config, rng, setup.game_id);
  const auto labels = setup.labels ? *setup.labels : draw_machine_labels(rng);
  const std::optional<agents::InductionTag> tag =
      setup.pre_prompt ? std::optional(setup.pre_prompt->tag()) : std::nullopt;

  const auto wrap = [&](const std::string& task) {
    return setup.pre_prompt ? induction::compose(*setup.pre_prompt, task) : task;
  };

  while (!game.finished()) {
    const int t = static_cast<int>(game.history().size());
    const std::string task = render_bandit_prompt(game.history(), labels, config.n_trials);

    agents::CompletionRequest req;
    req.prompt = wrap(task);
    req.stop_sequences = {"\n"};
    req.context = agents::BanditContext{game.posterior(), labels};
    req.induction = tag;
    req.unit_seed = setup.seed;
    req.step = t;

    TrialRecord rec;
    rec.pre_prompt_id = setup.pre_prompt ? setup.pre_prompt->id : std::string();
    rec.condition = tag ? tag->condition : Condition::none;

    Arm arm;
    rec.raw_completion = ask(agent, req, setup.game_id);
    try {
      arm = parse_choice(rec.raw_completion, labels);
    } catch (const ParseFailureError&) {
      // One retry with an explicit instruction.
      std::string clarified = task;
      clarified.insert(clarified.size() - kQuestion.size(),
                       "Answer with the letter of one machine (" + labels[0] + " or " +
                           labels[1] + ").\n");
      req.prompt = wrap(clarified);
      req.attempt = 1;
      rec.rejected_completion = std::move(rec.raw_completion);
      rec.raw_completion = ask(agent, req, setup.game_id);
      try {
        arm = parse_choice(rec.raw_completion, labels);
      } catch (const ParseFailureError& e) {
        throw ParseFailureError(with_game(setup.game_id, std::string("aborted at trial ") +
                                                             std::to_string(t) + ": " + e.what()));
      }
    }
    game.step(arm, rng, std::move(rec));
  }
  return game.history();
}

}  // namespace mpsych::bandit
