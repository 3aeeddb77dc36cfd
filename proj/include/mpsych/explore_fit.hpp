#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "mpsych/bandit.hpp"
#include "mpsych/exploration_features.hpp"
#include "mpsych/stats.hpp"

namespace mpsych::explore {

// Columns of each variant:
//   hybrid             V, V/TU, RU
//   exploitation_only  V
//   random_exploration V/TU
//   directed           V, RU
enum class ModelVariant { hybrid, exploitation_only, random_exploration, directed };

std::string_view to_string(ModelVariant v);
ModelVariant parse_model_variant(std::string_view name);

struct ModelSpec {
  ModelVariant variant = ModelVariant::hybrid;
  // Diagnostic only; the hybrid model has no intercept.
  bool intercept = false;
};

using ProbitFit = stats::GlmFit;

struct Design {
  Eigen::MatrixXd x;
  std::vector<double> y;  // 1 = arm 1 chosen
  std::vector<std::string> terms;
};

Design build_design(std::span<const bandit::TrialRecord> trials, const ModelSpec& spec);

// Probit MLE of P(arm 1) = Phi(x w); Newton-Raphson from w = 0.
ProbitFit fit_probit(const Eigen::MatrixXd& design, std::span<const double> choices,
                     std::vector<std::string> terms = {}, const stats::GlmOptions& options = {});

ProbitFit fit_model(std::span<const bandit::TrialRecord> trials, const ModelSpec& spec = {});

// Variant columns plus (column x condition indicator) for every condition
// other than `baseline`. Interaction terms are named "<term>:<condition>".
// Throws InputError unless the trials span at least two conditions
// including the baseline.
ProbitFit fit_condition_contrast(std::span<const bandit::TrialRecord> trials,
                                 Condition baseline, const ModelSpec& spec = {});

// OLS of reward on intercept, trial number (1-based) and condition dummies
// (baseline omitted). Throws InputError with fewer than two distinct trials.
stats::OlsResult reward_trend_regression(std::span<const bandit::TrialRecord> trials,
                                         Condition baseline = Condition::neutral);

}  // namespace mpsych::explore
