#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mpsych/agents.hpp"
#include "mpsych/error.hpp"
#include "mpsych/explore_fit.hpp"
#include "mpsych/induction.hpp"
#include "mpsych/report.hpp"
#include "mpsych/runner.hpp"

#ifndef MPSYCH_DATA_DIR
#define MPSYCH_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace mpsych;

namespace {

fs::path data_file(const char* name) { return fs::path(MPSYCH_DATA_DIR) / name; }

struct CommonArgs {
  std::string agent = "simulated";
  std::string model = "gpt-3.5-turbo-instruct";
  std::string base_url;
  double temperature = 0.0;
  int max_tokens = 32;
  std::string preprompts;
  std::string items;
  std::string scenarios;
  std::string script;
  std::string profile;
  int games = 200;
  int trials = 10;
  int permutations = 24;
  int splits = 100;
  int replicates = 3;
  int per_category = -1;
  std::string phrasings = "both";
  bool baseline = false;
  std::uint64_t seed = 0;
  std::string out;
  int workers = 0;
  bool plots = false;
  bool timestamps = false;
  std::size_t stop_after = 0;
};

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("--agent", a.agent, "remote, scripted or simulated")
      ->check(CLI::IsMember({"remote", "scripted", "simulated"}))
      ->capture_default_str();
  app->add_option("--model", a.model, "model name sent to the completions endpoint")
      ->capture_default_str();
  app->add_option("--base-url", a.base_url, "completions endpoint (default from environment)");
  app->add_option("--temperature", a.temperature)->capture_default_str();
  app->add_option("--max-tokens", a.max_tokens)->capture_default_str();
  app->add_option("--preprompts", a.preprompts, "pre-prompt bank (JSON)");
  app->add_option("--items", a.items, "questionnaire item bank (JSON)");
  app->add_option("--scenarios", a.scenarios, "bias scenarios (JSON)");
  app->add_option("--script", a.script, "script for --agent scripted (JSON)");
  app->add_option("--profile", a.profile, "behaviour profile for --agent simulated (JSON)");
  app->add_option("--seed", a.seed, "master seed")->capture_default_str();
  app->add_option("--out", a.out, "run directory to create")->required();
  app->add_option("--workers", a.workers, "parallel agent calls (0 = automatic)")
      ->capture_default_str();
  app->add_flag("--plots", a.plots, "also write SVG plots");
  app->add_flag("--timestamps", a.timestamps, "stamp transcript entries with wall-clock time");
  app->add_option("--stop-after", a.stop_after, "stop after this many units (resume later)");
}

runner::ExperimentPlan make_plan(runner::Experiment exp, const CommonArgs& a) {
  runner::ExperimentPlan p;
  p.experiment = exp;
  p.agent.kind = agents::parse_agent_kind(a.agent);
  p.agent.model_name = a.model;
  p.agent.temperature = a.temperature;
  p.agent.max_tokens = a.max_tokens;
  p.agent.seed = a.seed;
  p.base_url = a.base_url;
  p.script = a.script;
  p.profile = a.profile;
  p.master_seed = a.seed;
  p.output_dir = a.out;
  p.workers = a.workers;
  p.plots = a.plots;
  p.timestamps = a.timestamps;
  p.games = a.games;
  p.trials = a.trials;
  p.permutations = a.permutations;
  p.splits = a.splits;
  p.bias_replicates = a.replicates;
  p.include_baseline = a.baseline;
  if (a.phrasings == "original") {
    p.phrasings = {questionnaire::Phrasing::original};
  } else if (a.phrasings == "rephrased") {
    p.phrasings = {questionnaire::Phrasing::rephrased};
  }

  const auto pick = [](const std::string& given, const char* fallback) {
    return given.empty() ? (fallback ? data_file(fallback) : fs::path()) : fs::path(given);
  };
  switch (exp) {
    case runner::Experiment::questionnaire:
      p.items = pick(a.items, "items.json");
      p.preprompts = pick(a.preprompts, nullptr);
      break;
    case runner::Experiment::bandit:
      p.preprompts = pick(a.preprompts, "preprompts.json");
      break;
    case runner::Experiment::bias:
      p.preprompts = pick(a.preprompts, "preprompts.json");
      p.scenarios = pick(a.scenarios, "scenarios.json");
      break;
    case runner::Experiment::strength_sweep:
      p.preprompts = pick(a.preprompts, "preprompts_graded.json");
      p.items = pick(a.items, "items.json");
      p.scenarios = pick(a.scenarios, "scenarios.json");
      break;
  }
  p.per_category = a.per_category >= 0
                       ? a.per_category
                       : (exp == runner::Experiment::strength_sweep ? 30 : 0);
  return p;
}

runner::RunOptions run_options(std::size_t stop_after, bool repair) {
  runner::RunOptions o;
  if (stop_after > 0) o.stop_after = stop_after;
  o.repair = repair;
  o.log = [](const std::string& msg) { std::cerr << "mpsych: " << msg << '\n'; };
  return o;
}

void print_summary(const runner::RunSummary& s) {
  std::cout << "run directory: " << s.run_dir.string() << '\n'
            << "units: " << s.units_already_done + s.units_executed << " of " << s.units_total
            << " (" << s.units_executed << " executed now, " << s.unit_failures << " failed)\n"
            << (s.complete ? "status: complete\n" : "status: incomplete, continue with resume\n");
}

void print_fit(const stats::GlmFit& f) {
  std::cout << "term,estimate,std_error,z,p_value\n";
  for (const auto& r : f.table()) {
    std::cout << r.term << ',' << r.estimate << ',' << r.std_error << ',' << r.statistic << ','
              << r.p_value << '\n';
  }
  std::cout << "# log_likelihood=" << f.log_likelihood << " n=" << f.n_obs
            << " iterations=" << f.iterations << (f.converged ? "" : " (not converged)") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Psychiatric probes for text-completion models: questionnaires, bandits and bias "
               "scenarios under emotion induction"};
  app.require_subcommand(1);

  CommonArgs qa, ba, sa, wa;
  auto* q = app.add_subcommand("questionnaire", "administer the anxiety questionnaire");
  add_common(q, qa);
  q->add_option("--permutations", qa.permutations, "option orders per item (1-24)")
      ->capture_default_str();
  q->add_option("--phrasings", qa.phrasings, "original, rephrased or both")
      ->check(CLI::IsMember({"original", "rephrased", "both"}))
      ->capture_default_str();
  q->add_option("--splits", qa.splits, "random splits for split-half analysis")
      ->capture_default_str();
  q->add_flag("--baseline", qa.baseline, "also run without any pre-prompt");

  auto* b = app.add_subcommand("bandit", "play two-armed bandit games");
  add_common(b, ba);
  b->add_option("--games", ba.games, "games per pre-prompt")->capture_default_str();
  b->add_option("--trials", ba.trials, "trials per game")->capture_default_str();

  auto* s = app.add_subcommand("bias", "run ambiguous and disambiguated bias scenarios");
  add_common(s, sa);
  s->add_option("--replicates", sa.replicates, "option orders per scenario (1-6)")
      ->capture_default_str();
  s->add_option("--per-category", sa.per_category, "downsample scenarios per category");

  auto* w = app.add_subcommand("sweep", "graded induction strengths: questionnaire and bias");
  add_common(w, wa);
  w->add_option("--permutations", wa.permutations)->capture_default_str();
  w->add_option("--phrasings", wa.phrasings)
      ->check(CLI::IsMember({"original", "rephrased", "both"}))
      ->capture_default_str();
  w->add_option("--replicates", wa.replicates)->capture_default_str();
  w->add_option("--per-category", wa.per_category, "scenarios per category (default 30)");
  w->add_option("--splits", wa.splits)->capture_default_str();

  std::vector<std::string> fit_runs;
  std::string fit_model = "hybrid";
  std::string fit_contrast;
  bool fit_intercept = false;
  auto* f = app.add_subcommand("fit", "fit exploration models to bandit runs");
  f->add_option("runs", fit_runs, "bandit run directories")->required()->check(CLI::ExistingDirectory);
  f->add_option("--model", fit_model, "hybrid, exploitation_only, random_exploration, directed")
      ->capture_default_str();
  f->add_option("--contrast", fit_contrast,
                "baseline condition for a condition-contrast fit (e.g. anxious)");
  f->add_flag("--intercept", fit_intercept, "add an intercept column");

  std::vector<std::string> report_runs;
  std::string report_out, report_constants;
  bool report_plots = false;
  int report_splits = 100;
  auto* r = app.add_subcommand("report", "write analysis tables for one or more runs");
  r->add_option("runs", report_runs, "run directories to pool")->required()->check(CLI::ExistingDirectory);
  r->add_option("--out", report_out, "output directory")->required();
  r->add_option("--constants", report_constants, "reference constants file");
  r->add_option("--splits", report_splits)->capture_default_str();
  r->add_flag("--plots", report_plots, "also write SVG plots");

  std::string resume_dir;
  bool resume_repair = false;
  std::size_t resume_stop = 0;
  auto* u = app.add_subcommand("resume", "continue an interrupted run");
  u->add_option("run", resume_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  u->add_flag("--repair", resume_repair, "discard a damaged transcript tail first");
  u->add_option("--stop-after", resume_stop, "stop again after this many units");

  std::string gen_agent = "simulated", gen_model = "gpt-3.5-turbo-instruct", gen_base_url,
              gen_out, gen_levels = "canonical", gen_script, gen_profile;
  int gen_samples = 3;
  std::uint64_t gen_seed = 0;
  auto* g = app.add_subcommand("generate-preprompts", "ask an agent for induction narratives");
  g->add_option("--agent", gen_agent)->check(CLI::IsMember({"remote", "scripted", "simulated"}))
      ->capture_default_str();
  g->add_option("--model", gen_model)->capture_default_str();
  g->add_option("--base-url", gen_base_url);
  g->add_option("--script", gen_script);
  g->add_option("--profile", gen_profile);
  g->add_option("--levels", gen_levels, "canonical (-3, 0, 3) or graded (-5..-1, 1..5)")
      ->check(CLI::IsMember({"canonical", "graded"}))
      ->capture_default_str();
  g->add_option("--samples", gen_samples, "narratives per level")->capture_default_str();
  g->add_option("--seed", gen_seed)->capture_default_str();
  g->add_option("--out", gen_out, "pre-prompt bank to write")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto run = [](runner::Experiment e, const CommonArgs& a) {
      print_summary(runner::run_plan(make_plan(e, a), run_options(a.stop_after, false)));
    };
    if (*q) run(runner::Experiment::questionnaire, qa);
    if (*b) run(runner::Experiment::bandit, ba);
    if (*s) run(runner::Experiment::bias, sa);
    if (*w) run(runner::Experiment::strength_sweep, wa);

    if (*f) {
      std::vector<fs::path> dirs(fit_runs.begin(), fit_runs.end());
      const auto data = report::load_runs(dirs);
      if (data.trials.empty()) throw InputError("no bandit trials in the given runs");
      explore::ModelSpec spec{explore::parse_model_variant(fit_model), fit_intercept};
      print_fit(fit_contrast.empty()
                    ? explore::fit_model(data.trials, spec)
                    : explore::fit_condition_contrast(data.trials, parse_condition(fit_contrast),
                                                      spec));
    }

    if (*r) {
      report::ReportOptions ro;
      ro.plots = report_plots;
      ro.splits = report_splits;
      if (!report_constants.empty()) ro.reference_constants = report_constants;
      std::vector<fs::path> dirs(report_runs.begin(), report_runs.end());
      report::write_reports(dirs, report_out, ro);
      std::cout << "reports written to " << report_out << '\n';
    }

    if (*u) print_summary(runner::resume(resume_dir, run_options(resume_stop, resume_repair)));

    if (*g) {
      agents::AgentConfig cfg;
      cfg.kind = agents::parse_agent_kind(gen_agent);
      cfg.model_name = gen_model;
      cfg.max_tokens = 256;
      cfg.seed = gen_seed;
      agents::AgentResources res;
      if (!gen_script.empty()) {
        std::ifstream in(gen_script);
        if (!in) throw IoError("cannot open " + gen_script);
        res.script = agents::Script::from_json(nlohmann::json::parse(in));
      }
      if (!gen_profile.empty()) {
        std::ifstream in(gen_profile);
        if (!in) throw IoError("cannot open " + gen_profile);
        res.profile = agents::SimulatedProfile::from_json(nlohmann::json::parse(in));
      }
      if (cfg.kind == agents::AgentKind::remote) {
        res.remote = agents::RemoteOptions::from_environment(gen_base_url);
      }
      const auto agent = agents::make_agent(cfg, std::move(res));
      const std::vector<int> levels =
          gen_levels == "graded" ? induction::graded_levels() : std::vector<int>{-3, 0, 3};
      const auto bank = induction::generate_bank(*agent, levels, gen_samples, gen_seed);
      induction::save_preprompts(gen_out, bank);
      std::cout << "wrote " << bank.size() << " pre-prompts to " << gen_out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "mpsych: " << runner::error_type_name(e) << ": " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "mpsych: malformed JSON input: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
