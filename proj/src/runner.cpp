#include "mpsych/runner.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <thread>
#include <unordered_map>
#include <variant>

#include "mpsych/bandit.hpp"
#include "mpsych/bias_bench.hpp"
#include "mpsych/error.hpp"
#include "mpsych/induction.hpp"
#include "mpsych/report.hpp"
#include "mpsych/transcript.hpp"

namespace mpsych::runner {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::questionnaire: return "questionnaire";
    case Experiment::bandit: return "bandit";
    case Experiment::bias: return "bias";
    case Experiment::strength_sweep: return "strength_sweep";
  }
  return "?";
}

Experiment parse_experiment(std::string_view name) {
  if (name == "sweep") return Experiment::strength_sweep;
  for (auto e : {Experiment::questionnaire, Experiment::bandit, Experiment::bias,
                 Experiment::strength_sweep}) {
    if (to_string(e) == name) return e;
  }
  throw InputError("unknown experiment: " + std::string(name));
}

std::string error_type_name(const std::exception& e) {
#define MPSYCH_NAME_OF(T) \
  if (dynamic_cast<const T*>(&e)) return #T
  MPSYCH_NAME_OF(TransportError);
  MPSYCH_NAME_OF(UnmappedPromptError);
  MPSYCH_NAME_OF(InputError);
  MPSYCH_NAME_OF(PreconditionError);
  MPSYCH_NAME_OF(RangeError);
  MPSYCH_NAME_OF(EmptyInputError);
  MPSYCH_NAME_OF(DegenerateVarianceError);
  MPSYCH_NAME_OF(InvalidPosteriorError);
  MPSYCH_NAME_OF(InvalidObservationError);
  MPSYCH_NAME_OF(GameOverError);
  MPSYCH_NAME_OF(ParseFailureError);
  MPSYCH_NAME_OF(SeparationError);
  MPSYCH_NAME_OF(RankDeficiencyError);
  MPSYCH_NAME_OF(ConvergenceError);
  MPSYCH_NAME_OF(IntegrityError);
  MPSYCH_NAME_OF(SchemaError);
  MPSYCH_NAME_OF(IoError);
  MPSYCH_NAME_OF(Error);
#undef MPSYCH_NAME_OF
  return "std::exception";
}

// --- plan ---------------------------------------------------------------------

void ExperimentPlan::validate() const {
  agent.validate();
  const bool needs_items =
      experiment == Experiment::questionnaire || experiment == Experiment::strength_sweep;
  const bool needs_scenarios =
      experiment == Experiment::bias || experiment == Experiment::strength_sweep;
  if (needs_items && items.empty()) throw InputError("this experiment needs an item bank");
  if (needs_scenarios && scenarios.empty()) throw InputError("this experiment needs scenarios");
  if (experiment == Experiment::strength_sweep && preprompts.empty()) {
    throw InputError("a strength sweep needs a pre-prompt bank");
  }
  if (agent.kind == agents::AgentKind::scripted && script.empty()) {
    throw InputError("scripted agents need a script file");
  }
  if (permutations < 1 || permutations > 24) throw InputError("permutations must be in 1..24");
  if (phrasings.empty()) throw InputError("at least one phrasing is required");
  if (splits < 1) throw InputError("splits must be at least 1");
  if (games < 1) throw InputError("games must be at least 1");
  if (trials < 1) throw InputError("trials must be at least 1");
  if (bias_replicates < 1 || bias_replicates > 6) {
    throw InputError("bias replicates must be in 1..6");
  }
  if (per_category < 0) throw InputError("per_category must not be negative");
  if (workers < 0) throw InputError("workers must not be negative");
  if (output_dir.empty()) throw InputError("an output directory is required");
}

int ExperimentPlan::effective_workers() const {
  if (workers > 0) return workers;
  return agent.kind == agents::AgentKind::remote ? 4 : 1;
}

json ExperimentPlan::to_json() const {
  json phr = json::array();
  for (auto p : phrasings) phr.push_back(questionnaire::to_string(p));
  return {{"experiment", to_string(experiment)},
          {"agent",
           {{"kind", agents::to_string(agent.kind)},
            {"model", agent.model_name},
            {"temperature", agent.temperature},
            {"max_tokens", agent.max_tokens},
            {"seed", agent.seed}}},
          {"base_url", base_url},
          {"inputs",
           {{"preprompts", preprompts.generic_string()},
            {"items", items.generic_string()},
            {"scenarios", scenarios.generic_string()},
            {"script", script.generic_string()},
            {"profile", profile.generic_string()}}},
          {"include_baseline", include_baseline},
          {"permutations", permutations},
          {"phrasings", phr},
          {"splits", splits},
          {"games", games},
          {"trials", trials},
          {"bias_replicates", bias_replicates},
          {"per_category", per_category},
          {"master_seed", master_seed},
          {"workers", workers},
          {"plots", plots},
          {"timestamps", timestamps}};
}

ExperimentPlan ExperimentPlan::from_json(const json& j) {
  ExperimentPlan p;
  p.experiment = parse_experiment(j.at("experiment").get<std::string>());
  const auto& a = j.at("agent");
  p.agent.kind = agents::parse_agent_kind(a.at("kind").get<std::string>());
  p.agent.model_name = a.at("model").get<std::string>();
  p.agent.temperature = a.at("temperature").get<double>();
  p.agent.max_tokens = a.at("max_tokens").get<int>();
  p.agent.seed = a.at("seed").get<std::uint64_t>();
  p.base_url = j.value("base_url", "");
  const auto& in = j.at("inputs");
  p.preprompts = in.value("preprompts", "");
  p.items = in.value("items", "");
  p.scenarios = in.value("scenarios", "");
  p.script = in.value("script", "");
  p.profile = in.value("profile", "");
  p.include_baseline = j.at("include_baseline").get<bool>();
  p.permutations = j.at("permutations").get<int>();
  p.phrasings.clear();
  for (const auto& s : j.at("phrasings")) {
    p.phrasings.push_back(questionnaire::parse_phrasing(s.get<std::string>()));
  }
  p.splits = j.at("splits").get<int>();
  p.games = j.at("games").get<int>();
  p.trials = j.at("trials").get<int>();
  p.bias_replicates = j.at("bias_replicates").get<int>();
  p.per_category = j.at("per_category").get<int>();
  p.master_seed = j.at("master_seed").get<std::uint64_t>();
  p.workers = j.value("workers", 0);
  p.plots = j.value("plots", false);
  p.timestamps = j.value("timestamps", false);
  return p;
}

// --- unit expansion -----------------------------------------------------------

namespace {

struct QuestionnaireUnit {
  std::optional<std::size_t> pre;
  questionnaire::Phrasing phrasing;
  std::size_t item;
  int permutation;
};

struct BanditUnit {
  std::optional<std::size_t> pre;
  int game;
};

struct BiasUnit {
  std::optional<std::size_t> pre;
  std::size_t scenario;
  int replicate;
};

struct Unit {
  std::string id;
  std::uint64_t seed = 0;
  std::variant<QuestionnaireUnit, BanditUnit, BiasUnit> work;
};

struct Inputs {
  ExperimentPlan plan;
  std::vector<induction::PrePrompt> bank;
  std::vector<questionnaire::QuestionnaireItem> items;
  std::vector<bias::Scenario> scenarios;
  std::vector<std::vector<bias::OptionOrder>> orders;  // per scenario
  std::vector<Unit> units;
};

std::string pre_id(const Inputs& in, std::optional<std::size_t> pre) {
  return pre ? in.bank[*pre].id : std::string("none");
}

std::vector<std::optional<std::size_t>> pre_slots(const Inputs& in, bool allow_baseline) {
  std::vector<std::optional<std::size_t>> out;
  if (in.bank.empty() || (allow_baseline && in.plan.include_baseline)) out.push_back(std::nullopt);
  for (std::size_t i = 0; i < in.bank.size(); ++i) out.push_back(i);
  return out;
}

void add_questionnaire_units(Inputs& in) {
  for (auto pre : pre_slots(in, true)) {
    for (auto phr : in.plan.phrasings) {
      for (std::size_t it = 0; it < in.items.size(); ++it) {
        for (int k = 0; k < in.plan.permutations; ++k) {
          Unit u;
          u.id = "q/" + pre_id(in, pre) + "/" + std::string(questionnaire::to_string(phr)) + "/" +
                 std::to_string(in.items[it].id) + "/" + std::to_string(k);
          u.work = QuestionnaireUnit{pre, phr, it, k};
          in.units.push_back(std::move(u));
        }
      }
    }
  }
}

void add_bias_units(Inputs& in) {
  for (auto pre : pre_slots(in, false)) {
    for (std::size_t s = 0; s < in.scenarios.size(); ++s) {
      for (int r = 0; r < in.plan.bias_replicates; ++r) {
        Unit u;
        u.id = "s/" + pre_id(in, pre) + "/" + in.scenarios[s].id + "/" + std::to_string(r);
        u.work = BiasUnit{pre, s, r};
        in.units.push_back(std::move(u));
      }
    }
  }
}

Inputs load_inputs(const ExperimentPlan& plan) {
  Inputs in;
  in.plan = plan;
  if (!plan.preprompts.empty()) in.bank = induction::load_preprompts(plan.preprompts);
  if (!plan.items.empty()) in.items = questionnaire::load_items(plan.items);
  if (!plan.scenarios.empty()) {
    in.scenarios = bias::load_scenarios(plan.scenarios);
    if (plan.per_category > 0) {
      in.scenarios = bias::downsample_scenarios(
          in.scenarios, plan.per_category, derive_seed(plan.master_seed, "downsample", "bias"));
    }
    for (const auto& s : in.scenarios) {
      RandomSource rng(derive_seed(plan.master_seed, "option-order", s.id));
      in.orders.push_back(bias::option_orders(plan.bias_replicates, rng));
    }
  }

  switch (plan.experiment) {
    case Experiment::questionnaire:
      add_questionnaire_units(in);
      break;
    case Experiment::bandit:
      for (auto pre : pre_slots(in, false)) {
        for (int g = 0; g < plan.games; ++g) {
          Unit u;
          u.id = "b/" + pre_id(in, pre) + "/" + std::to_string(g);
          u.work = BanditUnit{pre, g};
          in.units.push_back(std::move(u));
        }
      }
      break;
    case Experiment::bias:
      add_bias_units(in);
      break;
    case Experiment::strength_sweep:
      add_questionnaire_units(in);
      add_bias_units(in);
      break;
  }

  const std::string exp(to_string(plan.experiment));
  std::unordered_map<std::uint64_t, std::size_t> seen;
  for (std::size_t i = 0; i < in.units.size(); ++i) {
    auto& u = in.units[i];
    u.seed = derive_seed(plan.master_seed, exp, u.id);
    auto [it, fresh] = seen.emplace(u.seed, i);
    if (!fresh) {
      throw IntegrityError("unit seed collision between " + in.units[it->second].id + " and " +
                           u.id);
    }
  }
  return in;
}

json tag_fields(const Inputs& in, std::optional<std::size_t> pre) {
  if (!pre) return {{"pre_prompt_id", "none"}, {"condition", "none"}, {"strength", 0}};
  const auto& p = in.bank[*pre];
  return {{"pre_prompt_id", p.id},
          {"condition", to_string(p.condition)},
          {"strength", p.strength_level}};
}

std::optional<agents::InductionTag> tag_of(const Inputs& in, std::optional<std::size_t> pre) {
  if (!pre) return std::nullopt;
  return in.bank[*pre].tag();
}

std::string with_block(const Inputs& in, std::optional<std::size_t> pre, const std::string& task) {
  return pre ? induction::compose(in.bank[*pre], task) : task;
}

transcript::UnitRecord run_unit(const Inputs& in, const agents::Agent& agent, std::size_t index) {
  const Unit& unit = in.units[index];
  transcript::UnitRecord rec;
  rec.unit_index = index;
  rec.unit_id = unit.id;
  try {
    if (const auto* q = std::get_if<QuestionnaireUnit>(&unit.work)) {
      const auto& item = in.items[q->item];
      const auto& perm = questionnaire::all_permutations()[static_cast<std::size_t>(q->permutation)];
      agents::CompletionRequest req;
      req.prompt = with_block(in, q->pre,
                              questionnaire::render_item(item, q->phrasing, perm));
      req.stop_sequences = {"\n"};
      agents::QuestionnaireContext ctx;
      ctx.item_id = item.id;
      for (std::size_t k = 0; k < 4; ++k) {
        ctx.presented_options[k] =
            questionnaire::kCanonicalOptions[static_cast<std::size_t>(perm.order[k])];
      }
      req.context = ctx;
      req.induction = tag_of(in, q->pre);
      req.unit_seed = unit.seed;
      json payload = tag_fields(in, q->pre);
      payload["phrasing"] = questionnaire::to_string(q->phrasing);
      payload["item_id"] = item.id;
      payload["permutation_index"] = q->permutation;
      payload["raw_text"] = agents::complete(agent, req);
      rec.entries.emplace_back("questionnaire_response", std::move(payload));
    } else if (const auto* b = std::get_if<BanditUnit>(&unit.work)) {
      bandit::BanditConfig cfg;
      cfg.n_trials = in.plan.trials;
      cfg.seed = unit.seed;
      bandit::GameSetup setup;
      setup.game_id = b->game;
      setup.seed = unit.seed;
      if (b->pre) setup.pre_prompt = in.bank[*b->pre];
      const auto trials = bandit::run_game(agent, cfg, setup);
      const json tags = tag_fields(in, b->pre);
      for (const auto& t : trials) {
        json payload = tags;
        payload["game_id"] = t.game_id;
        payload["trial_index"] = t.trial_index;
        payload["chosen_arm"] = bandit::arm_number(t.chosen_arm);
        payload["reward"] = t.displayed_reward;
        const auto& post = t.pre_choice_posterior;
        payload["posterior"] = {post.arms[0].mean, post.arms[0].variance, post.arms[1].mean,
                                post.arms[1].variance};
        payload["raw_completion"] = t.raw_completion;
        if (t.rejected_completion) payload["rejected_completion"] = *t.rejected_completion;
        rec.entries.emplace_back("bandit_trial", std::move(payload));
      }
    } else if (const auto* s = std::get_if<BiasUnit>(&unit.work)) {
      const auto& sc = in.scenarios[s->scenario];
      const auto& order = in.orders[s->scenario][static_cast<std::size_t>(s->replicate)];
      int step = 0;
      for (auto variant : {bias::Variant::ambiguous, bias::Variant::disambiguated}) {
        agents::CompletionRequest req;
        req.prompt = with_block(in, s->pre, bias::render_scenario(sc, variant, order));
        req.stop_sequences = {"\n"};
        req.context = bias::scenario_context(sc, variant, order);
        req.induction = tag_of(in, s->pre);
        req.unit_seed = unit.seed;
        req.step = step++;
        json payload = tag_fields(in, s->pre);
        payload["scenario_id"] = sc.id;
        payload["category"] = bias::to_string(sc.category);
        payload["variant"] = bias::to_string(variant);
        payload["replicate"] = s->replicate;
        payload["order"] = order.order;
        payload["raw_text"] = agents::complete(agent, req);
        rec.entries.emplace_back("bias_response", std::move(payload));
      }
    }
  } catch (const Error& e) {
    rec.entries.clear();
    rec.entries.emplace_back("unit_failure",
                             json{{"error_type", error_type_name(e)}, {"message", e.what()}});
  }
  return rec;
}

agents::AgentHandle build_agent(const ExperimentPlan& plan) {
  agents::AgentResources res;
  if (!plan.script.empty()) {
    std::ifstream in(plan.script);
    if (!in) throw IoError("cannot open script " + plan.script.string());
    try {
      res.script = agents::Script::from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw InputError("malformed script " + plan.script.string() + ": " + e.what());
    }
  }
  if (!plan.profile.empty()) {
    std::ifstream in(plan.profile);
    if (!in) throw IoError("cannot open profile " + plan.profile.string());
    try {
      res.profile = agents::SimulatedProfile::from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw InputError("malformed profile " + plan.profile.string() + ": " + e.what());
    }
  }
  if (plan.agent.kind == agents::AgentKind::remote) {
    res.remote = agents::RemoteOptions::from_environment(plan.base_url);
  }
  return agents::make_agent(plan.agent, std::move(res));
}

void log_line(const RunOptions& o, const std::string& msg) {
  if (o.log) o.log(msg);
}

RunSummary execute(const fs::path& run_dir, const ExperimentPlan& plan, const RunOptions& options) {
  const Inputs in = load_inputs(plan);
  const auto agent = options.agent_override ? options.agent_override : build_agent(plan);
  const fs::path tpath = run_dir / kTranscriptFile;
  const auto scan = transcript::scan(tpath, options.repair);
  if (scan.repaired) log_line(options, "repaired transcript; resuming after the last complete unit");

  // Completed units must be the plan's units, in order.
  for (const auto& e : scan.entries) {
    if (e.unit_index >= in.units.size() || in.units[e.unit_index].id != e.unit_id) {
      throw IntegrityError("transcript unit " + e.unit_id + " at sequence number " +
                           std::to_string(e.seq) + " does not match the run plan");
    }
  }

  RunSummary summary;
  summary.run_dir = run_dir;
  summary.units_total = in.units.size();
  summary.units_already_done = scan.complete_units;
  for (const auto& e : scan.entries) {
    if (e.kind == "unit_failure") ++summary.unit_failures;
  }

  std::size_t end = in.units.size();
  if (options.stop_after) end = std::min(end, scan.complete_units + *options.stop_after);
  const std::size_t begin = scan.complete_units;

  if (begin < end) {
    log_line(options, "executing units " + std::to_string(begin) + ".." + std::to_string(end) +
                          " of " + std::to_string(in.units.size()));
    transcript::Sink sink(tpath, std::string(to_string(plan.experiment)), begin, scan.next_seq,
                          plan.timestamps);
    std::atomic<std::size_t> next{begin};
    std::atomic<std::size_t> failures{0};
    std::atomic<bool> stop{false};
    std::exception_ptr fatal;
    std::mutex fatal_mu;

    auto work = [&] {
      while (!stop.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= end) return;
        try {
          auto rec = run_unit(in, *agent, i);
          if (rec.entries.size() == 1 && rec.entries[0].first == "unit_failure") {
            ++failures;
            log_line(options, "unit " + rec.unit_id + " failed: " +
                                  rec.entries[0].second.at("message").get<std::string>());
          }
          sink.submit(std::move(rec));
        } catch (...) {
          std::lock_guard lock(fatal_mu);
          if (!fatal) fatal = std::current_exception();
          stop = true;
        }
      }
    };
    const int n_workers = std::min<int>(plan.effective_workers(), static_cast<int>(end - begin));
    if (n_workers <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);
    summary.units_executed = sink.units_written();
    summary.unit_failures += failures.load();
  }

  summary.complete = begin + summary.units_executed == in.units.size();
  if (summary.complete) {
    report::ReportOptions ro;
    ro.plots = plan.plots;
    ro.splits = plan.splits;
    report::write_reports(std::vector<fs::path>{run_dir}, run_dir / kReportDir, ro);
    log_line(options, "reports written to " + (run_dir / kReportDir).string());
  } else {
    log_line(options, "stopped with " + std::to_string(begin + summary.units_executed) + " of " +
                          std::to_string(in.units.size()) + " units done");
  }
  return summary;
}

fs::path copy_input(const fs::path& src, const fs::path& run_dir, const std::string& name) {
  if (src.empty()) return {};
  if (!fs::exists(src)) throw IoError("input file not found: " + src.string());
  const fs::path rel = fs::path("inputs") / (name + ".json");
  fs::copy_file(src, run_dir / rel, fs::copy_options::overwrite_existing);
  return rel;
}

}  // namespace

std::vector<std::string> unit_ids(const ExperimentPlan& plan) {
  const auto in = load_inputs(plan);
  std::vector<std::string> ids;
  for (const auto& u : in.units) ids.push_back(u.id);
  return ids;
}

ExperimentPlan load_manifest(const fs::path& run_dir) {
  std::ifstream in(run_dir / kManifestFile);
  if (!in) throw IoError("no manifest in " + run_dir.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw IntegrityError("corrupted manifest in " + run_dir.string() + ": " + e.what());
  }
  if (j.value("schema_version", -1) != transcript::kSchemaVersion) {
    throw SchemaError("manifest schema version mismatch in " + run_dir.string());
  }
  ExperimentPlan plan;
  try {
    plan = ExperimentPlan::from_json(j.at("plan"));
  } catch (const json::exception& e) {
    throw IntegrityError("corrupted manifest in " + run_dir.string() + ": " + e.what());
  }
  for (fs::path* p : {&plan.preprompts, &plan.items, &plan.scenarios, &plan.script, &plan.profile}) {
    if (!p->empty() && p->is_relative()) *p = run_dir / *p;
  }
  plan.output_dir = run_dir;
  return plan;
}

RunSummary run_plan(const ExperimentPlan& plan, const RunOptions& options) {
  plan.validate();
  const fs::path run_dir = plan.output_dir;
  if (fs::exists(run_dir / kManifestFile)) {
    throw InputError(run_dir.string() + " already holds a run; use resume");
  }
  std::error_code ec;
  fs::create_directories(run_dir / "inputs", ec);
  if (ec) throw IoError("cannot create " + run_dir.string() + ": " + ec.message());

  ExperimentPlan stored = plan;
  stored.preprompts = copy_input(plan.preprompts, run_dir, "preprompts");
  stored.items = copy_input(plan.items, run_dir, "items");
  stored.scenarios = copy_input(plan.scenarios, run_dir, "scenarios");
  stored.script = copy_input(plan.script, run_dir, "script");
  stored.profile = copy_input(plan.profile, run_dir, "profile");

  // Expand once up front so that bad inputs fail before anything is written.
  ExperimentPlan resolved = stored;
  for (fs::path* p : {&resolved.preprompts, &resolved.items, &resolved.scenarios, &resolved.script,
                      &resolved.profile}) {
    if (!p->empty()) *p = run_dir / *p;
  }
  unit_ids(resolved);

  json manifest = {{"schema_version", transcript::kSchemaVersion},
                   {"tool", "mpsych"},
                   {"plan", stored.to_json()}};
  {
    std::ofstream out(run_dir / kManifestFile);
    if (!out) throw IoError("cannot write manifest in " + run_dir.string());
    out << manifest.dump(2) << '\n';
  }
  return execute(run_dir, load_manifest(run_dir), options);
}

RunSummary resume(const fs::path& run_dir, const RunOptions& options) {
  const ExperimentPlan plan = load_manifest(run_dir);
  return execute(run_dir, plan, options);
}

}  // namespace mpsych::runner
