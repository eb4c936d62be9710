#include "cmdtriage/app.hpp"

#include <fstream>
#include <iostream>

#include "cmdtriage/error.hpp"
#include "cmdtriage/evalkit.hpp"
#include "cmdtriage/prompt.hpp"
#include "cmdtriage/tabletop.hpp"
#include "cmdtriage/uq.hpp"

namespace cmdtriage::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw Error(what + " not found: " + p.string());
}

}  // namespace

void EngineConfig::validate() const {
  triage.validate();
  if (backend.kind == "mock") require_file(backend.rules_path, "mock rules file");
  require_file(embedding_table, "embedding table");
  require_file(context_set, "context set");
  if (dataset) require_file(*dataset, "dataset");
  if (triage.k == 0) throw PreconditionError("triage.k must be at least 1");
}

EngineConfig engine_config_from_json(const json& j, const fs::path& base_dir) {
  EngineConfig c;
  c.backend = gateway::backend_config_from_json(j.at("backend"), base_dir);
  if (j.contains("triage")) c.triage = triage::triage_config_from_json(j.at("triage"));
  const auto& paths = j.at("paths");
  c.embedding_table = resolve(base_dir, paths.at("embedding_table").get<std::string>());
  c.context_set = resolve(base_dir, paths.at("context_set").get<std::string>());
  if (paths.contains("dataset")) c.dataset = resolve(base_dir, paths.at("dataset").get<std::string>());
  const auto oov = j.value("embedding_oov", std::string("zero"));
  if (oov == "zero")
    c.oov = embed::OovPolicy::kZero;
  else if (oov == "hash")
    c.oov = embed::OovPolicy::kHash;
  else
    throw PreconditionError("embedding_oov must be 'zero' or 'hash'");
  if (j.contains("feasibility_keywords")) {
    const auto& k = j.at("feasibility_keywords");
    if (k.contains("negation")) c.keywords.negation = k.at("negation").get<std::vector<std::string>>();
    if (k.contains("affirmation")) c.keywords.affirmation = k.at("affirmation").get<std::vector<std::string>>();
  }
  return c;
}

EngineConfig load_engine_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    auto c = engine_config_from_json(j, path.parent_path());
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json to_json(const EngineConfig& c) {
  json t;
  triage::to_json(t, c.triage);
  json paths{{"embedding_table", c.embedding_table.string()}, {"context_set", c.context_set.string()}};
  if (c.dataset) paths["dataset"] = c.dataset->string();
  return json{{"backend", gateway::to_json(c.backend)},
              {"triage", t},
              {"paths", paths},
              {"embedding_oov", c.oov == embed::OovPolicy::kZero ? "zero" : "hash"},
              {"feasibility_keywords", {{"negation", c.keywords.negation}, {"affirmation", c.keywords.affirmation}}}};
}

triage::Resources make_resources(const EngineConfig& c) {
  triage::Resources r;
  r.backend = gateway::make_backend(c.backend);
  r.contexts = prompt::load_context_set(c.context_set);
  r.table = std::make_shared<const embed::EmbeddingTable>(embed::load_table(c.embedding_table, c.oov));
  r.keywords = c.keywords;
  return r;
}

int exit_code_for(triage::Label label) {
  switch (label) {
    case triage::Label::kClear: return kExitClear;
    case triage::Label::kAmbiguous: return kExitAmbiguous;
    case triage::Label::kInfeasible: return kExitInfeasible;
  }
  return kExitError;
}

void apply_overrides(EngineConfig& c, const Overrides& o) {
  if (o.seed) c.triage.seed = *o.seed;
  if (o.epsilon) c.triage.epsilon = *o.epsilon;
  if (o.estimator) c.triage.estimator = uq::estimator_from_string(*o.estimator);
  if (o.budget) c.triage.max_question_rounds = *o.budget;
  c.triage.validate();
}

namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

EngineConfig load_with(const fs::path& config_path, const Overrides& o) {
  auto c = load_engine_config(config_path);
  apply_overrides(c, o);
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

fs::path dataset_path(const EngineConfig& c, const std::optional<fs::path>& override_path) {
  if (override_path) return *override_path;
  if (c.dataset) return *c.dataset;
  throw PreconditionError("no dataset given and none configured");
}

}  // namespace

int cmd_triage(const fs::path& config_path, const TriageOptions& opt, std::ostream& out, std::ostream& err,
               std::istream* answers_in) {
  return guarded(err, [&] {
    const auto config = load_with(config_path, opt.overrides);
    const auto scene = prompt::load_scene(opt.scene_path);
    const auto resources = make_resources(config);

    triage::DialogueState state;
    state.goal = prompt::GoalCommand{opt.goal, opt.facts};
    state.scene = scene;

    if (opt.interactive) {
      std::istream& in = answers_in ? *answers_in : std::cin;
      const triage::AnswerSource ask = [&](const std::string& q, const triage::DialogueState&) {
        err << "question: " << q << "\n> " << std::flush;
        std::string line;
        if (!std::getline(in, line)) throw Error("no answer provided");
        return line;
      };
      state = triage::run_dialogue(state, config.triage, resources, ask);
    } else {
      triage::dialogue_step(state, config.triage, resources);
    }

    const auto& result = *state.last_result;
    json j = result;
    if (opt.interactive) {
      json history = json::array();
      for (const auto& [q, a] : state.history) history.push_back({{"question", q}, {"answer", a}});
      j["dialogue"] = {{"rounds_used", state.rounds_used},
                       {"status", triage::to_string(state.status)},
                       {"history", history}};
    }
    j["goal"] = opt.goal;
    j["seed"] = config.triage.seed;
    j["config"] = to_json(config);
    out << j.dump(2) << '\n';
    return exit_code_for(result.label);
  });
}

int cmd_eval(const fs::path& config_path, const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.metric != "uq" && opt.metric != "cls") throw PreconditionError("metric must be uq or cls");
    if (opt.format != "json" && opt.format != "text") throw PreconditionError("format must be json or text");
    const auto config = load_with(config_path, opt.overrides);
    const auto path = dataset_path(config, opt.dataset);
    const auto dataset = evalkit::load_sagc(path);
    if (dataset.records.empty()) throw PreconditionError("dataset " + path.string() + " has no records");
    const auto resources = make_resources(config);

    evalkit::MetricsReport report;
    report.mode = opt.metric;
    report.n = dataset.counts;

    if (opt.metric == "uq") {
      std::vector<bool> uncertain;
      for (const auto& r : dataset.records) uncertain.push_back(r.label != evalkit::GoldLabel::kCertain);
      // configured estimator first, then the remaining baselines
      std::vector<uq::Estimator> order{config.triage.estimator};
      for (auto e : uq::kAllEstimators)
        if (e != config.triage.estimator) order.push_back(e);
      for (auto e : order) {
        evalkit::EstimatorAuroc entry;
        entry.estimator = std::string(uq::to_string(e));
        auto cfg = config.triage;
        cfg.estimator = e;
        try {
          const auto scores = evalkit::score_records(dataset.records, cfg, resources);
          entry.auroc = evalkit::auroc(scores, uncertain);
        } catch (const CapabilityError& ex) {
          entry.supported = false;
          entry.reason = ex.what();
        }
        report.auroc.push_back(entry);
      }
    } else {
      const auto results = evalkit::classify_records(dataset.records, config.triage, resources);
      std::vector<evalkit::GoldLabel> predicted, gold;
      std::vector<bool> questioned, ambiguous;
      for (std::size_t i = 0; i < results.size(); ++i) {
        predicted.push_back(evalkit::from_triage(results[i].label));
        gold.push_back(dataset.records[i].label);
        questioned.push_back(results[i].question.has_value());
        ambiguous.push_back(dataset.records[i].label == evalkit::GoldLabel::kAmbiguous);
      }
      report.accuracy = evalkit::accuracy3(predicted, gold);
      const auto n_amb = dataset.counts[evalkit::index_of(evalkit::GoldLabel::kAmbiguous)];
      if (n_amb > 0 && n_amb < dataset.records.size()) report.timing = evalkit::timing_metric(questioned, ambiguous);
    }

    std::string text;
    if (opt.format == "json") {
      auto j = evalkit::to_json(report);
      j["dataset"] = path.string();
      j["seed"] = config.triage.seed;
      j["config"] = to_json(config);
      text = j.dump(2) + "\n";
    } else {
      text = "seed: " + std::to_string(config.triage.seed) + "\n" + evalkit::to_text_table(report);
    }
    if (opt.out_path) write_file(*opt.out_path, text);
    out << text;
    return 0;
  });
}

int cmd_simulate(const fs::path& config_path, const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto config = load_with(config_path, opt.overrides);
    auto entries = tabletop::load_batch(opt.batch_path);
    if (opt.budget) {
      if (*opt.budget < 0) throw PreconditionError("budget must be non-negative");
      for (auto& e : entries) e.budget = *opt.budget;
    }
    const auto resources = make_resources(config);
    const auto records = tabletop::run_batch(entries, config.triage, resources);

    std::string text = json{{"type", "config"},
                            {"batch", opt.batch_path.string()},
                            {"seed", config.triage.seed},
                            {"config", to_json(config)}}
                           .dump() +
                       "\n";
    for (const auto& r : records) text += tabletop::to_json(r).dump() + "\n";
    text += tabletop::to_json(tabletop::summarize(records)).dump() + "\n";
    if (opt.out_path) write_file(*opt.out_path, text);
    out << text;
    return 0;
  });
}

int cmd_calibrate(const fs::path& config_path, const CalibrateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto config = load_with(config_path, opt.overrides);
    const auto path = dataset_path(config, opt.dataset);
    const auto dataset = evalkit::load_sagc(path);
    const auto resources = make_resources(config);
    std::vector<triage::ValidationRow> rows;
    for (const auto& r : dataset.records)
      rows.push_back({prompt::GoalCommand{r.goal_text, {}}, r.scene, r.label == evalkit::GoldLabel::kCertain});
    const double eps = triage::calibrate_epsilon(rows, config.triage, resources);
    json j{{"epsilon", eps},
           {"estimator", uq::to_string(config.triage.estimator)},
           {"rows", rows.size()},
           {"dataset", path.string()},
           {"seed", config.triage.seed},
           {"config", to_json(config)}};
    out << j.dump(2) << '\n';
    return 0;
  });
}

int cmd_scene(const std::string& template_id, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    tabletop::BatchEntry entry;
    entry.template_id = template_id;
    entry.seed = seed;
    const auto state = tabletop::build_state(entry);
    const auto task = tabletop::build_task(entry, state);
    json j{{"template_id", template_id},
           {"seed", seed},
           {"goal", tabletop::goal_text(task)},
           {"bindings", task.bindings},
           {"scene", tabletop::to_scene_description(state)}};
    j["hidden_intent"] = task.hidden_intent ? json(*task.hidden_intent) : json(nullptr);
    out << j.dump(2) << '\n';
    return 0;
  });
}

}  // namespace cmdtriage::app
