#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpsych/agents.hpp"
#include "mpsych/condition.hpp"
#include "mpsych/induction.hpp"
#include "mpsych/posterior.hpp"
#include "mpsych/random.hpp"

namespace mpsych::bandit {

// Generative prior N(prior_mean, prior_variance) over each arm's mean and
// reward noise N(theta, reward_variance). Second arguments are variances.
// The learner's Kalman prior equals the generative prior.
struct BanditConfig {
  int n_trials = 10;
  double prior_mean = 0.0;
  double prior_variance = 10.0;
  double reward_variance = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrialRecord {
  int game_id = 0;
  int trial_index = 0;  // 0-based, strictly increasing within a game
  Arm chosen_arm = Arm::first;
  double displayed_reward = 0.0;  // integer-valued
  PosteriorState pre_choice_posterior;
  std::string pre_prompt_id;
  Condition condition = Condition::none;
  std::string raw_completion;
  // Completion that failed to parse before the clarified retry, if any.
  std::optional<std::string> rejected_completion;
};

// Exact conjugate-normal update of the chosen arm; the other arm is copied
// bit for bit. Throws InvalidObservationError for non-finite rewards and
// InvalidPosteriorError for invalid inputs.
PosteriorState kalman_update(const PosteriorState& posterior, Arm arm, double reward,
                             double reward_variance);

class BanditGame {
 public:
  BanditGame(BanditConfig config, std::array<double, 2> latent_means, int game_id = 0);

  const BanditConfig& config() const { return config_; }
  const std::array<double, 2>& latent_means() const { return latent_means_; }
  const std::vector<TrialRecord>& history() const { return history_; }
  // Learner belief before the next choice.
  const PosteriorState& posterior() const { return posterior_; }
  int game_id() const { return game_id_; }
  bool finished() const { return static_cast<int>(history_.size()) >= config_.n_trials; }

  // Draws r ~ N(theta_arm, reward_variance), rounds it to the nearest integer,
  // records the trial with the pre-choice posterior and applies the Kalman
  // update with the rounded reward. Throws GameOverError after n_trials.
  double step(Arm arm, RandomSource& rng, TrialRecord annotations = {});

 private:
  BanditConfig config_;
  std::array<double, 2> latent_means_;
  int game_id_;
  PosteriorState posterior_;
  std::vector<TrialRecord> history_;
};

// Latent means drawn independently from N(prior_mean, prior_variance).
BanditGame new_game(const BanditConfig& config, RandomSource& rng, int game_id = 0);

double step(BanditGame& game, Arm arm, RandomSource& rng);

// Two distinct machine labels from a fixed alphabet, seeded shuffle.
std::array<std::string, 2> draw_machine_labels(RandomSource& rng);
std::span<const std::string_view> label_alphabet();

std::string render_bandit_prompt(std::span<const TrialRecord> history,
                                 const std::array<std::string, 2>& labels, int n_trials = 0);

// First standalone occurrence of either label (case-insensitive token scan).
// Throws ParseFailureError when neither label appears.
Arm parse_choice(std::string_view raw, const std::array<std::string, 2>& labels);

struct GameSetup {
  int game_id = 0;
  std::uint64_t seed = 0;
  std::optional<induction::PrePrompt> pre_prompt;
  std::optional<std::array<std::string, 2>> labels;  // default: drawn per game
};

// Plays one game: render (with composed pre-prompt), ask the agent, parse,
// draw reward, update beliefs. An unparseable answer is retried once with a
// clarification line; a second failure throws ParseFailureError. All errors
// carry the game id.
std::vector<TrialRecord> run_game(const agents::Agent& agent, const BanditConfig& config,
                                  const GameSetup& setup);

}  // namespace mpsych::bandit
