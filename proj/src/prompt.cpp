#include "cmdtriage/prompt.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "cmdtriage/error.hpp"

namespace cmdtriage::prompt {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void check_unique(const std::vector<Entity>& list, const char* what) {
  std::set<std::string> seen;
  for (const auto& e : list)
    if (!seen.insert(e.name).second)
      throw PreconditionError(std::string("duplicate ") + what + " name '" + e.name + "'");
}

}  // namespace

void SceneDescription::validate() const {
  if (action_set.empty()) throw PreconditionError("scene action_set is empty");
  check_unique(objects, "object");
  check_unique(people, "person");
}

std::string normalize_goal(std::string_view text) {
  auto t = trim(text);
  while (!t.empty() && (t.back() == '.' || t.back() == '?')) t = trim(t.substr(0, t.size() - 1));
  return std::string(t);
}

std::string goal_line(const GoalCommand& goal) {
  auto line = normalize_goal(goal.text);
  if (!goal.augmented_facts.empty()) {
    std::vector<std::string> facts;
    for (const auto& f : goal.augmented_facts) facts.emplace_back(trim(f));
    line += ", given that: " + join(facts, "; ");
  }
  return line;
}

std::vector<std::size_t> sample_context_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 1 || k > n)
    throw PreconditionError("k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates: the first k slots are a uniform ordered draw
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

std::vector<ContextExemplar> sample_contexts(std::span<const ContextExemplar> context_set,
                                             std::size_t k, std::uint64_t seed) {
  std::vector<ContextExemplar> out;
  for (auto i : sample_context_indices(context_set.size(), k, seed)) out.push_back(context_set[i]);
  return out;
}

std::vector<std::size_t> scene_permutation(const SceneDescription& scene, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> objs(scene.objects.size());
  std::vector<std::size_t> people(scene.people.size());
  std::iota(objs.begin(), objs.end(), 0);
  std::iota(people.begin(), people.end(), scene.objects.size());
  std::shuffle(objs.begin(), objs.end(), rng);
  std::shuffle(people.begin(), people.end(), rng);
  objs.insert(objs.end(), people.begin(), people.end());
  return objs;
}

SceneDescription shuffle_scene(const SceneDescription& scene, std::uint64_t seed) {
  const auto perm = scene_permutation(scene, seed);
  SceneDescription out = scene;
  const auto n_obj = scene.objects.size();
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (i < n_obj)
      out.objects[i] = scene.objects[perm[i]];
    else
      out.people[i - n_obj] = scene.people[perm[i] - n_obj];
  }
  return out;
}

std::string wrap_uncertainty_aware(const GoalCommand& goal) {
  return std::string(kUncertaintyPrefix) + goal_line(goal);
}

std::string render_entity(const Entity& e) {
  if (e.attributes.empty()) return e.name;
  std::vector<std::string> attrs;
  for (const auto& [k, v] : e.attributes) attrs.push_back(k + ": " + v);
  return e.name + " (" + join(attrs, ", ") + ")";
}

std::string render_scene(const SceneDescription& scene) {
  std::vector<std::string> objs, people;
  for (const auto& o : scene.objects) objs.push_back(render_entity(o));
  for (const auto& p : scene.people) people.push_back(render_entity(p));
  return "objects = [" + join(objs, ", ") + "]; people = [" + join(people, ", ") + "]; actions = [" +
         join(scene.action_set, ", ") + "]";
}

std::string render_exemplar(const ContextExemplar& c) {
  return "scene: " + c.scene_snippet + "\ngoal: " + c.goal_text + "\nrobot: " + c.skill_text;
}

AssembledPrompt assemble_action_prompt(const GoalCommand& goal, const SceneDescription& scene,
                                       std::span<const ContextExemplar> contexts,
                                       bool uncertainty_aware) {
  if (contexts.empty()) throw PreconditionError("action prompt needs at least one context");
  std::string text;
  for (const auto& c : contexts) text += render_exemplar(c) + "\n\n";
  text += "scene: " + render_scene(scene) + "\n";
  text += "goal: " + (uncertainty_aware ? wrap_uncertainty_aware(goal) : goal_line(goal)) + "\n";
  text += "robot:";
  AssembledPrompt p{std::move(text), {}};
  p.provenance.uncertainty_aware = uncertainty_aware;
  p.provenance.kind = PromptKind::kAction;
  return p;
}

AssembledPrompt assemble_feasibility_prompt(const GoalCommand& goal, const SceneDescription& scene) {
  std::vector<std::string> objs, people;
  for (const auto& o : scene.objects) objs.push_back(render_entity(o));
  for (const auto& p : scene.people) people.push_back(render_entity(p));
  std::string text = "scene: objects = [" + join(objs, ", ") + "]; people = [" + join(people, ", ") + "]\n";
  text += "actions = [" + join(scene.action_set, ", ") + "]\n";
  text += "I am a " + scene.robot_type + " robot. Considering the action set, can I " + goal_line(goal) + "?";
  AssembledPrompt p{std::move(text), {}};
  p.provenance.kind = PromptKind::kFeasibility;
  return p;
}

AssembledPrompt assemble_reason_prompt(const std::string& transcript) {
  if (transcript.empty()) throw PreconditionError("reason prompt needs a transcript");
  AssembledPrompt p{transcript + "\n" + std::string(kReasonCue), {}};
  p.provenance.kind = PromptKind::kReason;
  return p;
}

AssembledPrompt assemble_question_prompt(const std::string& transcript) {
  if (transcript.empty()) throw PreconditionError("question prompt needs a transcript");
  AssembledPrompt p{transcript + "\n" + std::string(kQuestionCue), {}};
  p.provenance.kind = PromptKind::kQuestion;
  return p;
}

// ---------------------------------------------------------------------------

void to_json(json& j, const Entity& e) {
  if (e.attributes.empty()) {
    j = e.name;
    return;
  }
  j = json{{"name", e.name}};
  for (const auto& [k, v] : e.attributes) j[k] = v;
}

void from_json(const json& j, Entity& e) {
  e.attributes.clear();
  if (j.is_string()) {
    e.name = j.get<std::string>();
    return;
  }
  e.name = j.at("name").get<std::string>();
  for (const auto& [k, v] : j.items())
    if (k != "name") e.attributes[k] = v.is_string() ? v.get<std::string>() : v.dump();
}

void to_json(json& j, const SceneDescription& s) {
  j = json{{"robot_type", s.robot_type}, {"objects", s.objects}, {"people", s.people},
           {"action_set", s.action_set}};
}

void from_json(const json& j, SceneDescription& s) {
  s.robot_type = j.at("robot_type").get<std::string>();
  s.objects = j.value("objects", std::vector<Entity>{});
  s.people = j.value("people", std::vector<Entity>{});
  s.action_set = j.at("action_set").get<std::vector<std::string>>();
}

void to_json(json& j, const ContextExemplar& c) {
  j = json{{"scene_snippet", c.scene_snippet}, {"goal_text", c.goal_text}, {"skill_text", c.skill_text}};
}

void from_json(const json& j, ContextExemplar& c) {
  c.scene_snippet = j.at("scene_snippet").get<std::string>();
  c.goal_text = j.at("goal_text").get<std::string>();
  c.skill_text = j.at("skill_text").get<std::string>();
  if (c.scene_snippet.empty() || c.goal_text.empty() || c.skill_text.empty())
    throw ParseError("context exemplar has an empty field");
}

namespace {

json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error(std::string("cannot open ") + what + " " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + " " + path.string() + ": " + e.what());
  }
}

}  // namespace

SceneDescription load_scene(const std::filesystem::path& path) {
  const auto j = read_json_file(path, "scene file");
  try {
    auto scene = j.get<SceneDescription>();
    scene.validate();
    return scene;
  } catch (const json::exception& e) {
    throw ParseError("scene file " + path.string() + ": " + e.what());
  }
}

std::vector<ContextExemplar> load_context_set(const std::filesystem::path& path) {
  const auto j = read_json_file(path, "context set");
  try {
    return j.get<std::vector<ContextExemplar>>();
  } catch (const json::exception& e) {
    throw ParseError("context set " + path.string() + ": " + e.what());
  }
}

}  // namespace cmdtriage::prompt
