#include "mpsych/explore_fit.hpp"

#include <algorithm>
#include <set>

#include "mpsych/error.hpp"

namespace mpsych::explore {
namespace {

std::vector<std::string> variant_terms(ModelVariant v) {
  switch (v) {
    case ModelVariant::hybrid: return {"V", "V/TU", "RU"};
    case ModelVariant::exploitation_only: return {"V"};
    case ModelVariant::random_exploration: return {"V/TU"};
    case ModelVariant::directed: return {"V", "RU"};
  }
  return {};
}

std::vector<double> variant_row(ModelVariant v, const ExplorationFeatures& f) {
  switch (v) {
    case ModelVariant::hybrid:
      return {f.value_difference, f.scaled_value, f.relative_uncertainty};
    case ModelVariant::exploitation_only: return {f.value_difference};
    case ModelVariant::random_exploration: return {f.scaled_value};
    case ModelVariant::directed: return {f.value_difference, f.relative_uncertainty};
  }
  return {};
}

std::vector<Condition> conditions_in(std::span<const bandit::TrialRecord> trials) {
  std::set<Condition> seen;
  for (const auto& t : trials) seen.insert(t.condition);
  return {seen.begin(), seen.end()};
}

}  // namespace

std::string_view to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::hybrid: return "hybrid";
    case ModelVariant::exploitation_only: return "exploitation_only";
    case ModelVariant::random_exploration: return "random_exploration";
    case ModelVariant::directed: return "directed";
  }
  return "hybrid";
}

ModelVariant parse_model_variant(std::string_view name) {
  if (name == "hybrid") return ModelVariant::hybrid;
  if (name == "exploitation_only" || name == "exploitation") return ModelVariant::exploitation_only;
  if (name == "random_exploration" || name == "random") return ModelVariant::random_exploration;
  if (name == "directed") return ModelVariant::directed;
  throw InputError("unknown model variant: " + std::string(name));
}

Design build_design(std::span<const bandit::TrialRecord> trials, const ModelSpec& spec) {
  Design d;
  d.terms = variant_terms(spec.variant);
  if (spec.intercept) d.terms.insert(d.terms.begin(), "intercept");
  const auto n = static_cast<Eigen::Index>(trials.size());
  d.x.resize(n, static_cast<Eigen::Index>(d.terms.size()));
  d.y.reserve(trials.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = trials[static_cast<std::size_t>(i)];
    const auto row = variant_row(spec.variant, features(t.pre_choice_posterior));
    Eigen::Index c = 0;
    if (spec.intercept) d.x(i, c++) = 1.0;
    for (double v : row) d.x(i, c++) = v;
    d.y.push_back(t.chosen_arm == bandit::Arm::first ? 1.0 : 0.0);
  }
  return d;
}

ProbitFit fit_probit(const Eigen::MatrixXd& design, std::span<const double> choices,
                     std::vector<std::string> terms, const stats::GlmOptions& options) {
  return stats::glm_fit(design, choices, stats::Link::probit, std::move(terms), options);
}

ProbitFit fit_model(std::span<const bandit::TrialRecord> trials, const ModelSpec& spec) {
  const Design d = build_design(trials, spec);
  return fit_probit(d.x, d.y, d.terms);
}

ProbitFit fit_condition_contrast(std::span<const bandit::TrialRecord> trials,
                                 Condition baseline, const ModelSpec& spec) {
  const auto conditions = conditions_in(trials);
  if (conditions.size() < 2) {
    throw InputError("condition contrast needs trials from at least two conditions");
  }
  if (std::find(conditions.begin(), conditions.end(), baseline) == conditions.end()) {
    throw InputError("baseline condition " + std::string(to_string(baseline)) +
                     " has no trials");
  }
  const Design base = build_design(trials, spec);
  const auto k = base.x.cols();
  std::vector<Condition> others;
  for (auto c : conditions) {
    if (c != baseline) others.push_back(c);
  }

  Design d;
  d.y = base.y;
  d.terms = base.terms;
  d.x.resize(base.x.rows(), k * static_cast<Eigen::Index>(1 + others.size()));
  d.x.leftCols(k) = base.x;
  for (std::size_t o = 0; o < others.size(); ++o) {
    for (const auto& term : base.terms) {
      d.terms.push_back(term + ":" + std::string(to_string(others[o])));
    }
    const auto offset = k * static_cast<Eigen::Index>(1 + o);
    for (Eigen::Index i = 0; i < base.x.rows(); ++i) {
      const bool in = trials[static_cast<std::size_t>(i)].condition == others[o];
      for (Eigen::Index c = 0; c < k; ++c) d.x(i, offset + c) = in ? base.x(i, c) : 0.0;
    }
  }
  return fit_probit(d.x, d.y, d.terms);
}

stats::OlsResult reward_trend_regression(std::span<const bandit::TrialRecord> trials,
                                         Condition baseline) {
  std::set<int> distinct_trials;
  for (const auto& t : trials) distinct_trials.insert(t.trial_index);
  if (distinct_trials.size() < 2) {
    throw InputError("reward trend regression needs at least two distinct trial indices");
  }
  std::vector<Condition> dummies;
  for (auto c : conditions_in(trials)) {
    if (c != baseline) dummies.push_back(c);
  }
  const bool baseline_present =
      std::any_of(trials.begin(), trials.end(), [&](const auto& t) { return t.condition == baseline; });
  if (!baseline_present && !dummies.empty()) {
    // Without baseline rows the first condition becomes the reference.
    dummies.erase(dummies.begin());
  }

  std::vector<std::string> terms{"intercept", "trial"};
  for (auto c : dummies) terms.push_back("cond_" + std::string(to_string(c)));

  const auto n = static_cast<Eigen::Index>(trials.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(terms.size()));
  std::vector<double> y(trials.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = trials[static_cast<std::size_t>(i)];
    x(i, 0) = 1.0;
    x(i, 1) = t.trial_index + 1.0;
    for (std::size_t d = 0; d < dummies.size(); ++d) {
      if (t.condition == dummies[d]) x(i, static_cast<Eigen::Index>(2 + d)) = 1.0;
    }
    y[static_cast<std::size_t>(i)] = t.displayed_reward;
  }
  return stats::ols(x, y, std::move(terms));
}

}  // namespace mpsych::explore
