#include "mpsych/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>

#include <nlohmann/json.hpp>

#include "mpsych/error.hpp"
#include "mpsych/explore_fit.hpp"
#include "mpsych/runner.hpp"
#include "mpsych/stats.hpp"
#include "mpsych/transcript.hpp"
#include "svg_plot.hpp"
#include "table_io.hpp"

#ifndef MPSYCH_DATA_DIR
#define MPSYCH_DATA_DIR "data"
#endif

namespace mpsych::report {

namespace fs = std::filesystem;
using detail::Csv;
using detail::num;
using nlohmann::json;

namespace {

constexpr std::array<Condition, 4> kConditionOrder{Condition::none, Condition::happy,
                                                   Condition::neutral, Condition::anxious};
constexpr double kZ95 = 1.959963984540054;
const std::string kNA = "NA";

std::string ref_cell(const ReferenceConstants& refs, const std::string& key) {
  auto it = refs.find(key);
  return it == refs.end() ? std::string() : num(it->second.value);
}

std::string cond_name(Condition c) { return std::string(to_string(c)); }

void note_pre_prompt(RunData& d, const std::string& id, Condition c, int strength) {
  if (d.pre_prompts.emplace(id, std::make_pair(c, strength)).second) {
    d.pre_prompt_order.push_back(id);
  }
}

// Fit table rows; a failed fit becomes one row carrying the error.
void fit_rows(Csv& csv, const std::vector<std::string>& prefix,
              const std::function<stats::GlmFit()>& fit,
              const std::function<std::string(const std::string&)>& reference) {
  try {
    const auto f = fit();
    for (const auto& row : f.table()) {
      auto cells = prefix;
      for (auto s : {row.term, num(row.estimate), num(row.std_error), num(row.statistic),
                     num(row.p_value), reference(row.term),
                     std::string(f.converged ? "" : "not converged")}) {
        cells.push_back(std::move(s));
      }
      csv.row(cells);
    }
  } catch (const Error& e) {
    auto cells = prefix;
    for (auto s : {std::string(), kNA, kNA, kNA, kNA, std::string(),
                   runner::error_type_name(e) + ": " + e.what()}) {
      cells.push_back(std::move(s));
    }
    csv.row(cells);
  }
}

const std::vector<std::string> kFitColumns{"term",    "estimate",  "std_error", "z",
                                           "p_value", "reference", "note"};

std::vector<std::string> with_fit_columns(std::vector<std::string> head) {
  head.insert(head.end(), kFitColumns.begin(), kFitColumns.end());
  return head;
}

// --- questionnaire --------------------------------------------------------------

std::string score_reference(Condition c) {
  switch (c) {
    case Condition::none: return "sticsa_mean_model";
    case Condition::anxious: return "induction_mean_anxious";
    case Condition::happy: return "induction_mean_happy";
    case Condition::neutral: return "induction_mean_neutral";
  }
  return "";
}

struct GroupScores {
  std::string id;
  Condition condition = Condition::none;
  int strength = 0;
  std::vector<questionnaire::ItemResponse> responses;
};

std::vector<GroupScores> questionnaire_groups(const RunData& d) {
  std::vector<GroupScores> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& id : d.pre_prompt_order) {
    index[id] = groups.size();
    groups.push_back({id, d.pre_prompts.at(id).first, d.pre_prompts.at(id).second, {}});
  }
  for (const auto& r : d.questionnaire) {
    groups[index.at(*r.response.pre_prompt_id)].responses.push_back(r.response);
  }
  std::erase_if(groups, [](const auto& g) { return g.responses.empty(); });
  return groups;
}

std::vector<double> scores_of(const std::vector<questionnaire::ItemResponse>& rs) {
  std::vector<double> v;
  for (const auto& r : rs) {
    if (r.score) v.push_back(*r.score);
  }
  return v;
}

double mean_or_nan(const std::vector<double>& v) {
  return v.empty() ? std::nan("") : stats::mean(v);
}

double sd_or_nan(const std::vector<double>& v) {
  return v.size() < 2 ? std::nan("") : std::sqrt(stats::variance(v));
}

void questionnaire_reports(const RunData& d, const fs::path& out, const ReferenceConstants& refs,
                           const ReportOptions& opt) {
  {
    Csv csv(out / "scores.csv",
            {"pre_prompt_id", "phrasing", "permutation_index", "item_id", "score"});
    for (const auto& q : d.questionnaire) {
      const auto& r = q.response;
      csv.row({*r.pre_prompt_id, std::string(questionnaire::to_string(r.phrasing)),
               num(r.permutation_index), num(r.item_id), r.score ? num(*r.score) : kNA});
    }
  }

  const auto groups = questionnaire_groups(d);
  std::map<Condition, std::vector<double>> by_condition;
  for (const auto& q : d.questionnaire) {
    if (q.response.score) by_condition[q.condition].push_back(*q.response.score);
  }

  {
    Csv csv(out / "questionnaire_summary.csv",
            {"level", "group", "condition", "strength", "n_parsed", "n_excluded", "mean_score",
             "sd_score", "ci_low", "ci_high", "reference"});
    const auto row = [&](const std::string& level, const std::string& group, Condition c,
                         const std::string& strength,
                         const std::vector<questionnaire::ItemResponse>& rs,
                         const std::string& reference) {
      const auto v = scores_of(rs);
      const double m = mean_or_nan(v), sd = sd_or_nan(v);
      const double half = kZ95 * sd / std::sqrt(static_cast<double>(v.size()));
      csv.row({level, group, cond_name(c), strength, num(v.size()), num(rs.size() - v.size()),
               num(m), num(sd), num(m - half), num(m + half), reference});
    };
    for (const auto& g : groups) {
      row("pre_prompt", g.id, g.condition, num(g.strength), g.responses, "");
    }
    for (auto c : kConditionOrder) {
      std::vector<questionnaire::ItemResponse> rs;
      for (const auto& q : d.questionnaire) {
        if (q.condition == c) rs.push_back(q.response);
      }
      if (rs.empty()) continue;
      row("condition", cond_name(c), c, "", rs, ref_cell(refs, score_reference(c)));
    }
  }

  {
    Csv csv(out / "robustness.csv", {"group", "analysis", "estimate", "statistic", "df",
                                     "p_value", "n_items", "reference", "note"});
    std::vector<double> split_rs, phrasing_rs;
    for (const auto& g : groups) {
      try {
        RandomSource rng(derive_seed(d.master_seed, "split-half", g.id));
        const auto sh =
            questionnaire::split_half_permutation_correlation(g.responses, rng, opt.splits);
        split_rs.push_back(sh.mean_r);
        csv.row({g.id, "split_half_r", num(sh.mean_r), "", num(static_cast<double>(sh.n_items) - 2),
                 num(sh.p_value), num(sh.n_items),
                 g.condition == Condition::none ? ref_cell(refs, "split_half_r") : "", ""});
      } catch (const Error& e) {
        csv.row({g.id, "split_half_r", kNA, kNA, kNA, kNA, "", "",
                 runner::error_type_name(e) + ": " + e.what()});
      }
      const bool both = std::any_of(g.responses.begin(), g.responses.end(),
                                    [](const auto& r) {
                                      return r.phrasing == questionnaire::Phrasing::original;
                                    }) &&
                        std::any_of(g.responses.begin(), g.responses.end(), [](const auto& r) {
                          return r.phrasing == questionnaire::Phrasing::rephrased;
                        });
      if (!both) continue;
      try {
        const auto pc = questionnaire::compare_phrasings(g.responses);
        phrasing_rs.push_back(pc.item_correlation.estimate);
        csv.row({g.id, "phrasing_r", num(pc.item_correlation.estimate),
                 num(pc.item_correlation.statistic), num(pc.item_correlation.df),
                 num(pc.item_correlation.p_value), num(pc.item_correlation.df + 2),
                 g.condition == Condition::none ? ref_cell(refs, "phrasing_r") : "", ""});
        csv.row({g.id, "phrasing_mean_difference", num(pc.mean_difference.estimate),
                 num(pc.mean_difference.statistic), num(pc.mean_difference.df),
                 num(pc.mean_difference.p_value), "", "", ""});
      } catch (const Error& e) {
        csv.row({g.id, "phrasing_r", kNA, kNA, kNA, kNA, "", "",
                 runner::error_type_name(e) + ": " + e.what()});
      }
    }
    const bool induced = std::any_of(groups.begin(), groups.end(),
                                     [](const auto& g) { return g.condition != Condition::none; });
    if (split_rs.size() > 1) {
      csv.row({"mean_over_groups", "split_half_r", num(stats::mean(split_rs)), "", "", "", "",
               induced ? ref_cell(refs, "induction_split_half_r_mean") : "", ""});
    }
    if (phrasing_rs.size() > 1) {
      csv.row({"mean_over_groups", "phrasing_r", num(stats::mean(phrasing_rs)), "", "", "", "",
               induced ? ref_cell(refs, "induction_phrasing_r_mean") : "", ""});
    }
  }

  {
    Csv csv(out / "condition_tests.csv",
            {"comparison", "mean_a", "mean_b", "difference", "t", "df", "p_value", "reference_a",
             "reference_b", "note"});
    const auto test = [&](const std::string& name, const std::vector<double>& a,
                          const std::vector<double>& b, const std::string& ra,
                          const std::string& rb) {
      try {
        const auto t = stats::welch_t(a, b);
        csv.row({name, num(stats::mean(a)), num(stats::mean(b)), num(t.estimate),
                 num(t.statistic), num(t.df), num(t.p_value), ra, rb, ""});
      } catch (const Error& e) {
        csv.row({name, num(mean_or_nan(a)), num(mean_or_nan(b)), kNA, kNA, kNA, kNA, ra, rb,
                 runner::error_type_name(e) + ": " + e.what()});
      }
    };
    const std::array<std::pair<Condition, Condition>, 3> pairs{
        {{Condition::anxious, Condition::neutral},
         {Condition::anxious, Condition::happy},
         {Condition::happy, Condition::neutral}}};
    for (auto [a, b] : pairs) {
      if (!by_condition.count(a) || !by_condition.count(b)) continue;
      test(cond_name(a) + "_vs_" + cond_name(b), by_condition[a], by_condition[b],
           ref_cell(refs, score_reference(a)), ref_cell(refs, score_reference(b)));
    }
    std::vector<double> orig, reph;
    bool any_induced = false;
    for (const auto& q : d.questionnaire) {
      if (q.condition != Condition::none) any_induced = true;
      if (!q.response.score) continue;
      (q.response.phrasing == questionnaire::Phrasing::original ? orig : reph)
          .push_back(*q.response.score);
    }
    if (!orig.empty() && !reph.empty()) {
      test("original_vs_rephrased", orig, reph,
           ref_cell(refs, any_induced ? "induction_mean_original" : "sticsa_mean_original"),
           ref_cell(refs, any_induced ? "induction_mean_rephrased" : "sticsa_mean_rephrased"));
    }
  }

  if (opt.plots) {
    std::vector<std::string> cats;
    svg::BarSeries artifact{"this run", {}, {}}, published{"published", {}, {}};
    for (auto c : kConditionOrder) {
      auto it = by_condition.find(c);
      if (it == by_condition.end() || it->second.empty()) continue;
      cats.push_back(cond_name(c));
      artifact.values.push_back(stats::mean(it->second));
      artifact.errors.push_back(it->second.size() > 1
                                    ? kZ95 * sd_or_nan(it->second) /
                                          std::sqrt(static_cast<double>(it->second.size()))
                                    : 0.0);
      auto r = refs.find(score_reference(c));
      published.values.push_back(r == refs.end() ? std::nan("") : r->second.value);
    }
    if (by_condition.count(Condition::none) && refs.count("sticsa_mean_human")) {
      cats.push_back("human");
      artifact.values.push_back(std::nan(""));
      artifact.errors.push_back(0.0);
      published.values.push_back(refs.at("sticsa_mean_human").value);
    }
    svg::bar_chart(out / "plots" / "questionnaire_scores.svg", "Mean STICSA score by condition",
                   "mean score (1-4)", cats, {artifact, published});
  }
}

// --- bandit ---------------------------------------------------------------------

std::set<Condition> trial_conditions(const std::vector<bandit::TrialRecord>& trials) {
  std::set<Condition> out;
  for (const auto& t : trials) out.insert(t.condition);
  return out;
}

std::vector<bandit::TrialRecord> filter_trials(const std::vector<bandit::TrialRecord>& trials,
                                               std::initializer_list<Condition> keep) {
  std::vector<bandit::TrialRecord> out;
  for (const auto& t : trials) {
    if (std::find(keep.begin(), keep.end(), t.condition) != keep.end()) out.push_back(t);
  }
  return out;
}

std::string hybrid_reference(const std::string& term) {
  if (term == "V") return "hybrid_exploitation";
  if (term == "V/TU") return "hybrid_random";
  if (term == "RU") return "hybrid_directed";
  return "";
}

void bandit_reports(const RunData& d, const fs::path& out, const ReferenceConstants& refs,
                    const ReportOptions& opt) {
  const auto conds = trial_conditions(d.trials);

  std::map<Condition, std::map<int, std::vector<double>>> rewards;
  for (const auto& t : d.trials) rewards[t.condition][t.trial_index + 1].push_back(t.displayed_reward);
  {
    Csv csv(out / "reward_by_trial.csv", {"condition", "trial", "n", "mean_reward", "sd_reward"});
    for (auto c : kConditionOrder) {
      if (!rewards.count(c)) continue;
      for (const auto& [trial, v] : rewards[c]) {
        csv.row({cond_name(c), num(trial), num(v.size()), num(stats::mean(v)), num(sd_or_nan(v))});
      }
    }
  }

  {
    Csv csv(out / "reward_trend.csv", {"baseline", "term", "estimate", "std_error", "t",
                                       "p_value", "reference", "note"});
    const auto trend = [&](Condition baseline, const std::vector<bandit::TrialRecord>& trials,
                           const std::function<std::string(const std::string&)>& reference) {
      try {
        const auto f = explore::reward_trend_regression(trials, baseline);
        for (const auto& row : f.table()) {
          csv.row({cond_name(baseline), row.term, num(row.estimate), num(row.std_error),
                   num(row.statistic), num(row.p_value), reference(row.term), ""});
        }
      } catch (const Error& e) {
        csv.row({cond_name(baseline), "", kNA, kNA, kNA, kNA, "",
                 runner::error_type_name(e) + ": " + e.what()});
      }
    };
    const Condition baseline = conds.count(Condition::neutral) ? Condition::neutral : *conds.begin();
    trend(baseline, d.trials, [&](const std::string& term) -> std::string {
      if (term == "trial") return ref_cell(refs, "reward_trend_trial");
      if (baseline != Condition::neutral) return "";
      if (term == "cond_anxious") return ref_cell(refs, "reward_trend_anxious_vs_neutral");
      if (term == "cond_happy") return ref_cell(refs, "reward_trend_happy_vs_neutral");
      return "";
    });
    if (baseline != Condition::anxious && conds.count(Condition::anxious) &&
        conds.count(Condition::happy)) {
      trend(Condition::anxious, d.trials, [&](const std::string& term) -> std::string {
        return term == "cond_happy" ? ref_cell(refs, "reward_trend_happy_vs_anxious") : "";
      });
    }
  }

  std::vector<std::pair<std::string, stats::GlmFit>> hybrid_fits;
  {
    Csv csv(out / "hybrid_fit.csv", with_fit_columns({"sample"}));
    const auto run = [&](const std::string& sample, const std::vector<bandit::TrialRecord>& trials,
                         bool with_reference) {
      fit_rows(
          csv, {sample},
          [&] {
            auto f = explore::fit_model(trials);
            hybrid_fits.emplace_back(sample, f);
            return f;
          },
          [&](const std::string& term) {
            return with_reference ? ref_cell(refs, hybrid_reference(term)) : std::string();
          });
    };
    run("all", d.trials, true);
    if (conds.size() > 1) {
      for (auto c : kConditionOrder) {
        if (conds.count(c)) run(cond_name(c), filter_trials(d.trials, {c}), false);
      }
    }
  }

  {
    Csv csv(out / "model_comparison.csv",
            {"variant", "n_params", "n_obs", "log_likelihood", "bic", "note"});
    for (auto v : {explore::ModelVariant::hybrid, explore::ModelVariant::exploitation_only,
                   explore::ModelVariant::random_exploration, explore::ModelVariant::directed}) {
      try {
        const auto f = explore::fit_model(d.trials, {v, false});
        const double k = static_cast<double>(f.estimates.size());
        const double bic = -2.0 * f.log_likelihood + k * std::log(static_cast<double>(f.n_obs));
        csv.row({std::string(explore::to_string(v)), num(static_cast<std::size_t>(f.estimates.size())), num(f.n_obs),
                 num(f.log_likelihood), num(bic), ""});
      } catch (const Error& e) {
        csv.row({std::string(explore::to_string(v)), "", "", kNA, kNA,
                 runner::error_type_name(e) + ": " + e.what()});
      }
    }
  }

  if (conds.count(Condition::happy) && conds.count(Condition::anxious)) {
    Csv csv(out / "contrast_fit.csv", with_fit_columns({"baseline"}));
    const auto subset = filter_trials(d.trials, {Condition::anxious, Condition::happy});
    fit_rows(
        csv, {"anxious"}, [&] { return explore::fit_condition_contrast(subset, Condition::anxious); },
        [&](const std::string& term) -> std::string {
          if (term == "V:happy") return ref_cell(refs, "contrast_exploitation");
          if (term == "V/TU:happy") return ref_cell(refs, "contrast_random");
          if (term == "RU:happy") return ref_cell(refs, "contrast_directed");
          return "";
        });
  }

  if (opt.plots) {
    std::vector<svg::LineSeries> lines;
    for (auto c : kConditionOrder) {
      if (!rewards.count(c)) continue;
      svg::LineSeries s{cond_name(c), {}, {}};
      for (const auto& [trial, v] : rewards[c]) {
        s.x.push_back(trial);
        s.y.push_back(stats::mean(v));
      }
      lines.push_back(std::move(s));
    }
    svg::line_chart(out / "plots" / "reward_by_trial.svg", "Mean reward by trial", "trial",
                    "mean reward", lines);

    std::vector<svg::BarSeries> bars;
    for (const auto& [sample, f] : hybrid_fits) {
      svg::BarSeries s{sample, {}, {}};
      for (Eigen::Index i = 0; i < f.estimates.size(); ++i) {
        s.values.push_back(f.estimates[i]);
        s.errors.push_back(kZ95 * f.std_errors[i]);
      }
      bars.push_back(std::move(s));
    }
    svg::bar_chart(out / "plots" / "hybrid_fit.svg", "Hybrid probit weights", "estimate",
                   {"V", "V/TU", "RU"}, bars);
  }
}

// --- bias -------------------------------------------------------------------------

std::vector<bias::ScenarioResponse> bias_responses(const RunData& d) {
  std::vector<bias::ScenarioResponse> out;
  for (const auto& b : d.bias) out.push_back(b.response);
  return out;
}

std::string bias_reference(const std::string& prefix, Condition baseline, const std::string& term) {
  if (prefix == "bias") {
    if (baseline == Condition::neutral && term == "cond_anxious") return "bias_anxious_vs_neutral";
    if (baseline == Condition::neutral && term == "cond_happy") return "bias_happy_vs_neutral";
    if (baseline == Condition::happy && term == "cond_anxious") return "bias_anxious_vs_happy";
  } else {
    if (baseline == Condition::neutral && term == "cond_anxious") {
      return "flipped_anxious_vs_neutral";
    }
    if (baseline == Condition::happy && term == "cond_anxious") return "flipped_anxious_vs_happy";
  }
  return "";
}

void condition_fit_table(const fs::path& path, const std::string& prefix,
                         const std::vector<bias::BinaryObservation>& obs,
                         const ReferenceConstants& refs) {
  Csv csv(path, with_fit_columns({"baseline"}));
  std::set<Condition> conds;
  for (const auto& o : obs) conds.insert(o.condition);
  for (auto baseline : {Condition::neutral, Condition::happy}) {
    if (!conds.count(baseline) || conds.size() < 2) continue;
    if (baseline == Condition::happy && !conds.count(Condition::anxious)) continue;
    fit_rows(
        csv, {cond_name(baseline)}, [&] { return bias::condition_glm(obs, baseline); },
        [&](const std::string& term) {
          return ref_cell(refs, bias_reference(prefix, baseline, term));
        });
  }
}

void bias_reports(const RunData& d, const fs::path& out, const ReferenceConstants& refs,
                  const ReportOptions& opt) {
  std::map<std::string, const bias::Scenario*> scen;
  for (const auto& s : d.scenarios) scen[s.id] = &s;
  const auto responses = bias_responses(d);

  {
    Csv csv(out / "bias_results.csv", {"scenario_id", "category", "pre_prompt_id", "variant",
                                       "selected_index", "is_biased", "is_correct"});
    for (const auto& b : d.bias) {
      const auto& r = b.response;
      const auto& s = *scen.at(r.scenario_id);
      const bool parsed = r.selected_index.has_value();
      const int correct =
          r.variant == bias::Variant::ambiguous ? s.unknown_index : s.correct_index;
      csv.row({r.scenario_id, std::string(bias::to_string(b.category)), r.pre_prompt_id,
               std::string(bias::to_string(r.variant)), parsed ? num(*r.selected_index) : kNA,
               parsed ? num(static_cast<int>(*r.selected_index == s.biased_index)) : kNA,
               parsed ? num(static_cast<int>(*r.selected_index == correct)) : kNA});
    }
  }

  std::map<Condition, bias::Proportion> by_cond;
  std::optional<bias::BiasSummary> summary;
  {
    Csv csv(out / "bias_summary.csv", {"level", "group", "n_parsed", "n_biased", "n_excluded",
                                       "fraction", "ci_low", "ci_high", "note"});
    const auto row = [&](const std::string& level, const std::string& group,
                         const bias::Proportion& p) {
      csv.row({level, group, num(p.n_parsed), num(p.n_hits), num(p.n_excluded), num(p.fraction),
               num(p.ci_low), num(p.ci_high), ""});
    };
    try {
      summary = bias::bias_proportion(responses, d.scenarios);
      row("all", "all", summary->overall);
      for (auto c : bias::all_categories()) {
        auto it = summary->by_category.find(c);
        if (it != summary->by_category.end()) row("category", std::string(bias::to_string(c)), it->second);
      }
      for (auto c : kConditionOrder) {
        std::vector<bias::ScenarioResponse> sub;
        for (const auto& r : responses) {
          if (r.condition == c) sub.push_back(r);
        }
        if (sub.empty()) continue;
        try {
          by_cond[c] = bias::bias_proportion(sub, d.scenarios).overall;
          row("condition", cond_name(c), by_cond[c]);
        } catch (const EmptyInputError&) {
        }
      }
      for (const auto& id : d.pre_prompt_order) {
        auto it = summary->by_pre_prompt.find(id);
        if (it != summary->by_pre_prompt.end()) row("pre_prompt", id, it->second);
      }
    } catch (const Error& e) {
      csv.row({"all", "all", "0", "0", "", kNA, kNA, kNA,
               runner::error_type_name(e) + ": " + e.what()});
    }
  }

  const auto obs = bias::biased_observations(responses, d.scenarios);
  condition_fit_table(out / "bias_glm.csv", "bias", obs, refs);

  {
    Csv csv(out / "bias_category_effects.csv", with_fit_columns({"category"}));
    bool any = false;
    for (auto cat : bias::all_categories()) {
      std::vector<bias::BinaryObservation> sub;
      std::set<Condition> conds;
      for (const auto& o : obs) {
        if (o.category == cat) {
          sub.push_back(o);
          conds.insert(o.condition);
        }
      }
      if (!conds.count(Condition::neutral) || conds.size() < 2) continue;
      any = true;
      const std::string cname(bias::to_string(cat));
      fit_rows(
          csv, {cname}, [&] { return bias::condition_glm(sub, Condition::neutral, false); },
          [&](const std::string& term) {
            return term == "cond_anxious" ? ref_cell(refs, "bias_category_" + cname)
                                          : std::string();
          });
    }
    if (!any) csv.row({"all", "", kNA, kNA, kNA, kNA, "", "needs neutral and one other condition"});
  }

  std::vector<bias::ScenarioResponse> amb, dis;
  for (const auto& r : responses) (r.variant == bias::Variant::ambiguous ? amb : dis).push_back(r);
  std::map<Condition, bias::FlippedResult> flipped_by_cond;
  {
    Csv csv(out / "flipped_summary.csv",
            {"level", "group", "n_pairs", "n_correct", "n_flipped", "fraction", "note"});
    const auto row = [&](const std::string& level, const std::string& group,
                         const std::vector<bias::ScenarioResponse>& ds,
                         const std::vector<bias::ScenarioResponse>& as,
                         std::optional<Condition> c) {
      try {
        const auto f = bias::flipped_bias(ds, as, d.scenarios);
        if (c) flipped_by_cond[*c] = f;
        csv.row({level, group, num(f.n_pairs), num(f.n_correct), num(f.n_flipped),
                 num(f.fraction), ""});
      } catch (const Error& e) {
        csv.row({level, group, "", "0", "0", kNA, runner::error_type_name(e) + ": " + e.what()});
      }
    };
    row("all", "all", dis, amb, std::nullopt);
    for (auto c : kConditionOrder) {
      std::vector<bias::ScenarioResponse> ds, as;
      for (const auto& r : dis) {
        if (r.condition == c) ds.push_back(r);
      }
      for (const auto& r : amb) {
        if (r.condition == c) as.push_back(r);
      }
      if (!ds.empty()) row("condition", cond_name(c), ds, as, c);
    }
  }
  condition_fit_table(out / "flipped_glm.csv", "flipped",
                      bias::flipped_observations(dis, amb, d.scenarios), refs);

  if (opt.plots && summary) {
    std::vector<std::string> cats;
    for (auto c : bias::all_categories()) {
      if (summary->by_category.count(c)) cats.push_back(std::string(bias::to_string(c)));
    }
    std::vector<svg::BarSeries> bars;
    for (auto c : kConditionOrder) {
      svg::BarSeries s{cond_name(c), {}, {}};
      bool any = false;
      for (auto cat : bias::all_categories()) {
        if (!summary->by_category.count(cat)) continue;
        std::vector<bias::ScenarioResponse> sub;
        for (const auto& b : d.bias) {
          if (b.category == cat && b.response.condition == c) sub.push_back(b.response);
        }
        try {
          const auto p = bias::bias_proportion(sub, d.scenarios).overall;
          s.values.push_back(p.fraction);
          s.errors.push_back(0.5 * (p.ci_high - p.ci_low));
          any = true;
        } catch (const EmptyInputError&) {
          s.values.push_back(std::nan(""));
          s.errors.push_back(0.0);
        }
      }
      if (any) bars.push_back(std::move(s));
    }
    svg::bar_chart(out / "plots" / "bias_by_category.svg", "Proportion of biased answers",
                   "proportion biased", cats, bars);

    svg::BarSeries fl{"flipped", {}, {}};
    std::vector<std::string> fcats;
    for (const auto& [c, f] : flipped_by_cond) {
      fcats.push_back(cond_name(c));
      fl.values.push_back(f.fraction);
      const double n = static_cast<double>(f.n_correct);
      fl.errors.push_back(kZ95 * std::sqrt(f.fraction * (1.0 - f.fraction) / n));
    }
    svg::bar_chart(out / "plots" / "flipped_by_condition.svg", "Flipped answers",
                   "proportion flipped", fcats, {fl});
  }
}

// --- strength sweep -------------------------------------------------------------------

void sweep_reports(const RunData& d, const fs::path& out, const ReferenceConstants& refs,
                   const ReportOptions& opt) {
  std::map<std::string, std::vector<double>> scores;
  for (const auto& q : d.questionnaire) {
    if (q.response.score) scores[*q.response.pre_prompt_id].push_back(*q.response.score);
  }
  std::map<std::string, std::pair<std::size_t, std::size_t>> bias_counts;  // biased, parsed
  std::map<std::string, const bias::Scenario*> scen;
  for (const auto& s : d.scenarios) scen[s.id] = &s;
  for (const auto& b : d.bias) {
    const auto& r = b.response;
    if (r.variant != bias::Variant::ambiguous || !r.selected_index) continue;
    auto& c = bias_counts[r.pre_prompt_id];
    ++c.second;
    if (*r.selected_index == scen.at(r.scenario_id)->biased_index) ++c.first;
  }

  std::vector<double> strength, score, biasf;
  {
    Csv csv(out / "sweep_table.csv", {"pre_prompt_id", "condition", "strength", "n_scored",
                                      "mean_score", "n_bias", "bias_fraction"});
    for (const auto& id : d.pre_prompt_order) {
      const auto [cond, level] = d.pre_prompts.at(id);
      const auto& s = scores[id];
      const auto bc = bias_counts[id];
      const double m = mean_or_nan(s);
      const double f = bc.second ? static_cast<double>(bc.first) / static_cast<double>(bc.second)
                                 : std::nan("");
      csv.row({id, cond_name(cond), num(level), num(s.size()), num(m), num(bc.second), num(f)});
      if (std::isfinite(m) && std::isfinite(f)) {
        strength.push_back(level);
        score.push_back(m);
        biasf.push_back(f);
      }
    }
  }
  {
    Csv csv(out / "sweep_correlations.csv",
            {"pair", "r", "t", "df", "p_value", "n", "reference", "note"});
    const auto corr = [&](const std::string& name, const std::vector<double>& x,
                          const std::vector<double>& y, const std::string& key) {
      try {
        const auto r = stats::pearson(x, y);
        csv.row({name, num(r.estimate), num(r.statistic), num(r.df), num(r.p_value), num(x.size()),
                 ref_cell(refs, key), ""});
      } catch (const Error& e) {
        csv.row({name, kNA, kNA, kNA, kNA, num(x.size()), ref_cell(refs, key),
                 runner::error_type_name(e) + ": " + e.what()});
      }
    };
    corr("strength_vs_score", strength, score, "sweep_strength_score_r");
    corr("strength_vs_bias", strength, biasf, "sweep_strength_bias_r");
    corr("score_vs_bias", score, biasf, "sweep_score_bias_r");
  }
  if (opt.plots) {
    svg::scatter(out / "plots" / "sweep_strength_score.svg", "Induction strength vs STICSA score",
                 "strength", "mean score", strength, score);
    svg::scatter(out / "plots" / "sweep_strength_bias.svg", "Induction strength vs bias",
                 "strength", "proportion biased", strength, biasf);
    svg::scatter(out / "plots" / "sweep_score_bias.svg", "STICSA score vs bias", "mean score",
                 "proportion biased", score, biasf);
  }
}

}  // namespace

// --- loading --------------------------------------------------------------------------

fs::path default_reference_constants() {
  return fs::path(MPSYCH_DATA_DIR) / "reference_constants.json";
}

ReferenceConstants load_reference_constants(const fs::path& path) {
  ReferenceConstants out;
  if (path.empty() || !fs::exists(path)) return out;
  std::ifstream in(path);
  try {
    const auto j = json::parse(in);
    for (const auto& [key, v] : j.at("constants").items()) {
      out[key] = {v.at("value").get<double>(), v.value("description", "")};
    }
  } catch (const json::exception& e) {
    throw InputError("malformed reference constants " + path.string() + ": " + e.what());
  }
  return out;
}

RunData load_runs(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) throw InputError("no run directories given");
  RunData d;
  std::set<std::string> scenario_ids;
  for (std::size_t run = 0; run < run_dirs.size(); ++run) {
    const auto& dir = run_dirs[run];
    const auto plan = runner::load_manifest(dir);
    const std::string exp(runner::to_string(plan.experiment));
    if (run == 0) {
      d.experiment = exp;
      d.master_seed = plan.master_seed;
    } else if (exp != d.experiment) {
      throw SchemaError("cannot pool a " + exp + " run with " + d.experiment + " runs");
    }
    ++d.runs;

    std::vector<bias::Scenario> scenarios;
    if (!plan.scenarios.empty()) scenarios = bias::load_scenarios(plan.scenarios);
    std::map<std::string, std::size_t> scen_index;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      scen_index[scenarios[i].id] = i;
      if (scenario_ids.insert(scenarios[i].id).second) d.scenarios.push_back(scenarios[i]);
    }

    const auto scan = transcript::scan(dir / runner::kTranscriptFile, false);
    for (const auto& e : scan.entries) {
      const auto& p = e.payload;
      try {
        if (e.kind == "unit_failure") {
          d.failures.push_back({e.unit_id, p.at("error_type").get<std::string>(),
                                p.at("message").get<std::string>()});
          continue;
        }
        const std::string pre = p.at("pre_prompt_id").get<std::string>();
        const Condition cond = parse_condition(p.at("condition").get<std::string>());
        const int strength = p.at("strength").get<int>();
        note_pre_prompt(d, pre, cond, strength);
        if (e.kind == "questionnaire_response") {
          QuestionnaireRecord q;
          q.response.item_id = p.at("item_id").get<int>();
          q.response.phrasing = questionnaire::parse_phrasing(p.at("phrasing").get<std::string>());
          q.response.permutation_index = p.at("permutation_index").get<int>();
          q.response.pre_prompt_id = pre;
          q.response.raw_text = p.at("raw_text").get<std::string>();
          q.response.score = questionnaire::parse_response(q.response.raw_text);
          q.condition = cond;
          q.strength = strength;
          d.questionnaire.push_back(std::move(q));
        } else if (e.kind == "bandit_trial") {
          bandit::TrialRecord t;
          t.game_id = p.at("game_id").get<int>();
          t.trial_index = p.at("trial_index").get<int>();
          t.chosen_arm = p.at("chosen_arm").get<int>() == 1 ? bandit::Arm::first
                                                            : bandit::Arm::second;
          t.displayed_reward = p.at("reward").get<double>();
          const auto post = p.at("posterior").get<std::vector<double>>();
          if (post.size() != 4) throw IntegrityError("posterior must have 4 numbers");
          t.pre_choice_posterior = {{bandit::ArmBelief{post[0], post[1]},
                                     bandit::ArmBelief{post[2], post[3]}}};
          t.pre_prompt_id = pre;
          t.condition = cond;
          t.raw_completion = p.at("raw_completion").get<std::string>();
          if (p.contains("rejected_completion")) {
            t.rejected_completion = p.at("rejected_completion").get<std::string>();
          }
          d.trials.push_back(std::move(t));
        } else if (e.kind == "bias_response") {
          BiasRecord b;
          auto& r = b.response;
          r.scenario_id = p.at("scenario_id").get<std::string>();
          r.variant = bias::parse_variant(p.at("variant").get<std::string>());
          r.pre_prompt_id = pre;
          r.condition = cond;
          // Keep pairs from different runs apart when matching.
          r.replicate = p.at("replicate").get<int>() + static_cast<int>(run) * 1000;
          r.raw_text = p.at("raw_text").get<std::string>();
          auto it = scen_index.find(r.scenario_id);
          if (it == scen_index.end()) {
            throw IntegrityError("unknown scenario " + r.scenario_id);
          }
          bias::OptionOrder order;
          order.order = p.at("order").get<std::array<int, 3>>();
          r.selected_index = bias::parse_selection(r.raw_text, scenarios[it->second], order);
          b.category = scenarios[it->second].category;
          b.strength = strength;
          d.bias.push_back(std::move(b));
        } else {
          throw IntegrityError("unknown record kind " + e.kind);
        }
      } catch (const json::exception& ex) {
        throw IntegrityError(dir.string() + ": malformed payload at sequence number " +
                             std::to_string(e.seq) + ": " + ex.what());
      } catch (const IntegrityError& ex) {
        throw IntegrityError(dir.string() + ": sequence number " + std::to_string(e.seq) + ": " +
                             ex.what());
      }
    }
  }
  return d;
}

void write_reports(const std::vector<fs::path>& run_dirs, const fs::path& out_dir,
                   const ReportOptions& options) {
  write_reports(load_runs(run_dirs), out_dir, options);
}

void write_reports(const RunData& d, const fs::path& out_dir, const ReportOptions& options) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (options.plots) fs::create_directories(out_dir / "plots", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const auto refs = load_reference_constants(options.reference_constants);

  {
    Csv csv(out_dir / "errors.csv", {"unit_id", "error_type", "message"});
    for (const auto& f : d.failures) csv.row({f.unit_id, f.error_type, f.message});
  }
  {
    Csv csv(out_dir / "reference_constants.csv", {"key", "value", "description"});
    for (const auto& [k, v] : refs) csv.row({k, num(v.value), v.description});
  }
  if (!d.questionnaire.empty()) questionnaire_reports(d, out_dir, refs, options);
  if (!d.trials.empty()) bandit_reports(d, out_dir, refs, options);
  if (!d.bias.empty()) bias_reports(d, out_dir, refs, options);
  if (d.experiment == "strength_sweep") sweep_reports(d, out_dir, refs, options);
}

}  // namespace mpsych::report
