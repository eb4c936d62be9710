#include "cmdtriage/triage.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <map>
#include <set>

#include "cmdtriage/error.hpp"

namespace cmdtriage::triage {

using nlohmann::json;

std::string_view to_string(Label label) {
  switch (label) {
    case Label::kClear: return "clear";
    case Label::kAmbiguous: return "ambiguous";
    case Label::kInfeasible: return "infeasible";
  }
  return "unknown";
}

Label label_from_string(std::string_view s) {
  if (s == "clear" || s == "certain") return Label::kClear;
  if (s == "ambiguous") return Label::kAmbiguous;
  if (s == "infeasible") return Label::kInfeasible;
  throw PreconditionError("unknown label '" + std::string(s) + "'");
}

std::string_view to_string(DialogueStatus s) {
  switch (s) {
    case DialogueStatus::kOpen: return "open";
    case DialogueStatus::kResolved: return "resolved";
    case DialogueStatus::kAbandoned: return "abandoned";
  }
  return "unknown";
}

void TriageConfig::validate() const {
  if (h < 2) throw PreconditionError("triage.h must be >= 2");
  if (k < 1) throw PreconditionError("triage.k must be >= 1");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw PreconditionError("triage.epsilon must be >= 0");
  if (max_question_rounds < 0) throw PreconditionError("triage.max_question_rounds must be >= 0");
  if (max_tokens < 1) throw PreconditionError("triage.max_tokens must be >= 1");
  if (!(sample_temperature >= 0.0) || !(zero_shot_temperature >= 0.0))
    throw PreconditionError("temperatures must be >= 0");
}

void to_json(json& j, const TriageConfig& c) {
  j = json{{"epsilon", c.epsilon},
           {"h", c.h},
           {"k", c.k},
           {"estimator", uq::to_string(c.estimator)},
           {"max_question_rounds", c.max_question_rounds},
           {"seed", c.seed},
           {"sample_temperature", c.sample_temperature},
           {"zero_shot_temperature", c.zero_shot_temperature},
           {"max_tokens", c.max_tokens},
           {"uncertainty_aware", c.uncertainty_aware}};
}

TriageConfig triage_config_from_json(const json& j) {
  TriageConfig c;
  c.epsilon = j.value("epsilon", c.epsilon);
  c.h = j.value("h", c.h);
  c.k = j.value("k", c.k);
  if (j.contains("estimator")) c.estimator = uq::estimator_from_string(j.at("estimator").get<std::string>());
  c.max_question_rounds = j.value("max_question_rounds", c.max_question_rounds);
  c.seed = j.value("seed", c.seed);
  c.sample_temperature = j.value("sample_temperature", c.sample_temperature);
  c.zero_shot_temperature = j.value("zero_shot_temperature", c.zero_shot_temperature);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.uncertainty_aware = j.value("uncertainty_aware", c.uncertainty_aware);
  c.validate();
  return c;
}

bool TriageResult::satisfies_invariants() const {
  switch (label) {
    case Label::kClear: return skill.has_value() && !skill->empty() && !question.has_value();
    case Label::kAmbiguous: return question.has_value();
    case Label::kInfeasible: return explanation.has_value();
  }
  return false;
}

void to_json(json& j, const TriageResult& r) {
  j = json{{"label", to_string(r.label)},
           {"sigma", {{"value", r.sigma.value}, {"estimator", uq::to_string(r.sigma.estimator)}, {"h", r.sigma.h}}}};
  if (r.skill) {
    json calls = json::array();
    for (const auto& c : *r.skill) calls.push_back({{"name", c.name}, {"args", c.args}});
    j["skill"] = {{"text", r.skill_text.value_or("")}, {"calls", calls}};
  }
  if (r.explanation) j["explanation"] = *r.explanation;
  if (r.question) j["question"] = *r.question;
  if (r.feasibility)
    j["feasibility"] = {{"feasible", r.feasibility->feasible},
                        {"raw_answer", r.feasibility->raw_answer},
                        {"matched_keyword", r.feasibility->matched_keyword}};
  if (r.fallback_skill) j["fallback_skill"] = *r.fallback_skill;
  j["generations"] = r.generations;
  json tr = json::array();
  for (const auto& e : r.transcript) tr.push_back({{"kind", e.kind}, {"prompt", e.prompt}, {"response", e.response}});
  j["transcript"] = tr;
  if (!r.notes.empty()) j["notes"] = r.notes;
}

void to_json(json& j, const DialogueState& s) {
  json history = json::array();
  for (const auto& [q, a] : s.history) history.push_back({{"question", q}, {"answer", a}});
  j = json{{"goal", {{"text", s.goal.text}, {"augmented_facts", s.goal.augmented_facts}}},
           {"scene", s.scene},
           {"rounds_used", s.rounds_used},
           {"history", history},
           {"status", to_string(s.status)}};
  j["pending_question"] = s.pending_question ? json(*s.pending_question) : json(nullptr);
  if (s.last_result) j["last_result"] = *s.last_result;
}

// ---------------------------------------------------------------------------

std::uint64_t variant_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 finalizer over (seed, index)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SigmaEstimate estimate_sigma(const prompt::GoalCommand& goal, const prompt::SceneDescription& scene,
                             const TriageConfig& config, const Resources& resources) {
  config.validate();
  scene.validate();
  if (goal.text.empty()) throw PreconditionError("goal text is empty");
  if (resources.contexts.size() < config.k)
    throw PreconditionError("context set has " + std::to_string(resources.contexts.size()) +
                            " exemplars, k=" + std::to_string(config.k));
  if (!resources.backend || !resources.table) throw PreconditionError("resources not loaded");

  const bool sampled = config.estimator == uq::Estimator::kContextSampling;
  SigmaEstimate out;
  std::vector<gateway::PromptRequest> requests;
  for (std::size_t i = 0; i < config.h; ++i) {
    // Baselines sample one fixed prompt; context sampling varies contexts and scene order.
    const auto vseed = sampled ? variant_seed(config.seed, i) : variant_seed(config.seed, 0);
    const auto idx = prompt::sample_context_indices(resources.contexts.size(), config.k, vseed);
    std::vector<prompt::ContextExemplar> ctx;
    for (auto c : idx) ctx.push_back(resources.contexts[c]);
    const auto shown = sampled ? prompt::shuffle_scene(scene, vseed) : scene;
    auto p = prompt::assemble_action_prompt(goal, shown, ctx, config.uncertainty_aware);
    p.provenance.context_indices = idx;
    if (sampled) {
      p.provenance.scene_permutation = prompt::scene_permutation(scene, vseed);
    } else {
      p.provenance.scene_permutation.resize(scene.objects.size() + scene.people.size());
      std::iota(p.provenance.scene_permutation.begin(), p.provenance.scene_permutation.end(), 0);
    }

    gateway::PromptRequest r;
    r.text = p.text;
    r.temperature = config.sample_temperature;
    r.max_tokens = config.max_tokens;
    r.want_token_probs = uq::needs_token_probs(config.estimator);
    r.stop_markers = {"\n\n"};
    requests.push_back(std::move(r));
    out.prompts.push_back(std::move(p));
  }

  auto samples = gateway::generate_h(std::move(requests), *resources.backend);
  out.samples = uq::make_sample_set(std::move(samples), *resources.table, scene.action_set);
  out.score = uq::score(config.estimator, out.samples);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1));
}

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    // U+2019 right single quotation mark -> '
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x99) {
      cur.push_back('\'');
      i += 2;
      continue;
    }
    if (std::isalnum(c) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct Hit {
  std::size_t pos = SIZE_MAX;
  std::size_t len = 0;
  std::string keyword;
};

Hit earliest(const std::vector<std::string>& words, const std::vector<std::string>& table) {
  Hit best;
  for (const auto& kw : table) {
    const auto kw_words = words_of(kw);
    if (kw_words.empty() || kw_words.size() > words.size()) continue;
    for (std::size_t i = 0; i + kw_words.size() <= words.size(); ++i) {
      if (!std::equal(kw_words.begin(), kw_words.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) continue;
      if (i < best.pos || (i == best.pos && kw_words.size() > best.len)) best = {i, kw_words.size(), kw};
      break;
    }
  }
  return best;
}

std::string normalize_line(std::string_view text) {
  const auto line = embed::first_line(text);
  std::string out;
  bool space = false;
  for (char c : line) {
    if (c == ' ' || c == '\t') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

FeasibilityVerdict parse_feasibility_answer(std::string_view answer, const FeasibilityKeywords& keywords) {
  FeasibilityVerdict v;
  v.raw_answer = std::string(answer);
  const auto trimmed = trim(answer);
  if (trimmed.empty()) {
    v.feasible = false;
    v.matched_keyword = "default-empty";
    return v;
  }
  const auto end = trimmed.find_first_of(".!?;\n");
  const auto words = words_of(std::string_view(trimmed).substr(0, end));
  const auto neg = earliest(words, keywords.negation);
  const auto aff = earliest(words, keywords.affirmation);
  if (neg.pos != SIZE_MAX && neg.pos < aff.pos) {
    v.feasible = false;
    v.matched_keyword = neg.keyword;
  } else {
    v.feasible = true;
    v.matched_keyword = aff.pos != SIZE_MAX ? aff.keyword : "default";
  }
  return v;
}

std::size_t majority_index(std::span<const gateway::GenerationSample> samples) {
  if (samples.empty()) throw PreconditionError("majority of an empty sample list");
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // line -> (count, first index)
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [it, fresh] = counts.try_emplace(normalize_line(samples[i].text), 0, i);
    ++it->second.first;
  }
  std::size_t best = 0, best_count = 0;
  for (const auto& [line, cf] : counts) {
    const auto [count, first] = cf;
    if (count > best_count || (count == best_count && first < best)) {
      best = first;
      best_count = count;
    }
  }
  return best;
}

namespace {

std::string zero_shot(const std::string& text, const char* kind, const TriageConfig& config,
                      const Resources& resources, TriageResult& result) {
  gateway::PromptRequest r;
  r.text = text;
  r.temperature = config.zero_shot_temperature;
  r.max_tokens = config.max_tokens;
  const auto sample = gateway::generate(r, *resources.backend);
  result.transcript.push_back({kind, text, sample.text});
  return sample.text;
}

void explain_and_ask(const std::string& base, bool ask, const TriageConfig& config,
                     const Resources& resources, TriageResult& result) {
  const auto reason_prompt = prompt::assemble_reason_prompt(base);
  const auto reason = zero_shot(reason_prompt.text, "reason", config, resources, result);
  result.explanation = trim(reason);
  if (!ask) return;
  const auto with_reason = base + "\n" + std::string(prompt::kReasonCue) + " " + trim(reason);
  const auto question_prompt = prompt::assemble_question_prompt(with_reason);
  result.question = trim(zero_shot(question_prompt.text, "question", config, resources, result));
}

}  // namespace

TriageResult decide(const SigmaEstimate& estimate, const prompt::GoalCommand& goal,
                    const prompt::SceneDescription& scene, const TriageConfig& config,
                    const Resources& resources) {
  TriageResult result;
  result.sigma = estimate.score;
  const auto& samples = estimate.samples.samples;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    result.generations.push_back(samples[i].text);
    result.transcript.push_back({"action[" + std::to_string(i) + "]", estimate.prompts.at(i).text, samples[i].text});
  }
  if (estimate.samples.all_degenerate()) result.notes.push_back("no keywords in any generation; sigma is the sentinel");

  const auto maj = majority_index(samples);
  const auto line = normalize_line(samples[maj].text);
  const auto calls = embed::parse_skill_calls(line, scene.action_set);

  if (estimate.score.value <= config.epsilon) {
    if (!calls.empty()) {
      result.label = Label::kClear;
      result.skill = calls;
      result.skill_text = line;
      return result;
    }
    result.notes.push_back("clear-path generation '" + line + "' has no skill call; downgraded to ambiguous");
    result.label = Label::kAmbiguous;
    explain_and_ask(estimate.prompts.at(maj).text + " " + samples[maj].text, true, config, resources, result);
    return result;
  }

  if (!calls.empty()) result.fallback_skill = line;
  const auto feas = prompt::assemble_feasibility_prompt(goal, scene);
  const auto answer = zero_shot(feas.text, "feasibility", config, resources, result);
  result.feasibility = parse_feasibility_answer(answer, resources.keywords);
  const auto base = feas.text + " " + trim(answer);
  if (!result.feasibility->feasible) {
    result.label = Label::kInfeasible;
    explain_and_ask(base, false, config, resources, result);
  } else {
    result.label = Label::kAmbiguous;
    explain_and_ask(base, true, config, resources, result);
  }
  return result;
}

TriageResult classify(const prompt::GoalCommand& goal, const prompt::SceneDescription& scene,
                      const TriageConfig& config, const Resources& resources) {
  return decide(estimate_sigma(goal, scene, config, resources), goal, scene, config, resources);
}

// ---------------------------------------------------------------------------

const TriageResult& dialogue_step(DialogueState& state, const TriageConfig& config, const Resources& resources) {
  if (state.status != DialogueStatus::kOpen) throw PreconditionError("dialogue is not open");
  if (state.pending_question) throw PreconditionError("dialogue has an unanswered question");
  auto result = classify(state.goal, state.scene, config, resources);
  switch (result.label) {
    case Label::kClear: state.status = DialogueStatus::kResolved; break;
    case Label::kInfeasible: state.status = DialogueStatus::kAbandoned; break;
    case Label::kAmbiguous:
      if (state.rounds_used < config.max_question_rounds)
        state.pending_question = result.question;
      else
        state.status = DialogueStatus::kAbandoned;
      break;
  }
  state.last_result = std::move(result);
  return *state.last_result;
}

void dialogue_answer(DialogueState& state, const std::string& answer) {
  if (state.status != DialogueStatus::kOpen || !state.pending_question)
    throw PreconditionError("no pending question to answer");
  state.history.emplace_back(*state.pending_question, answer);
  const auto fact = trim(answer);
  if (!fact.empty()) state.goal.augmented_facts.push_back(fact);
  state.pending_question.reset();
  ++state.rounds_used;
}

DialogueState run_dialogue(const DialogueState& initial, const TriageConfig& config,
                           const Resources& resources, const AnswerSource& answers) {
  if (initial.status != DialogueStatus::kOpen) throw PreconditionError("dialogue is not open");
  DialogueState state = initial;
  while (true) {
    dialogue_step(state, config, resources);
    if (state.status != DialogueStatus::kOpen) return state;
    const auto reply = answers(*state.pending_question, state);
    dialogue_answer(state, reply);
  }
}

// ---------------------------------------------------------------------------

double youden_threshold(std::span<const double> scores, const std::vector<bool>& is_certain) {
  if (scores.size() != is_certain.size()) throw PreconditionError("scores/labels length mismatch");
  std::size_t n_certain = 0;
  for (bool c : is_certain) n_certain += c ? 1 : 0;
  const std::size_t n_uncertain = scores.size() - n_certain;
  if (n_certain == 0 || n_uncertain == 0)
    throw PreconditionError("calibration needs both certain and uncertain rows");

  std::vector<double> candidates(scores.begin(), scores.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  double best_t = candidates.front();
  double best_j = -2.0;
  for (double t : candidates) {
    std::size_t tp = 0, fp = 0;  // flagged uncertain: score > t
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] <= t) continue;
      if (is_certain[i])
        ++fp;
      else
        ++tp;
    }
    const double j = static_cast<double>(tp) / static_cast<double>(n_uncertain) -
                     static_cast<double>(fp) / static_cast<double>(n_certain);
    if (j > best_j + 1e-12) {
      best_j = j;
      best_t = t;
    }
  }
  return best_t;
}

double calibrate_epsilon(std::span<const ValidationRow> validation, const TriageConfig& config,
                         const Resources& resources) {
  std::vector<double> scores(validation.size());
  std::vector<char> certain(validation.size());
  std::vector<std::string> errors(validation.size());
  const auto n = static_cast<long long>(validation.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    try {
      scores[i] = estimate_sigma(validation[i].goal, validation[i].scene, config, resources).score.value;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
    certain[i] = validation[i].is_certain;
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) throw Error("validation row " + std::to_string(i) + ": " + errors[i]);
  return youden_threshold(scores, std::vector<bool>(certain.begin(), certain.end()));
}

}  // namespace cmdtriage::triage
