#include "cmdtriage/tabletop.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <fstream>
#include <random>
#include <set>

#include "cmdtriage/error.hpp"
#include "cmdtriage/evalkit.hpp"

namespace cmdtriage::tabletop {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Fisher-Yates driven by raw engine output so scenes are identical across
// standard library implementations.
std::vector<std::size_t> permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng() % i]);
  return p;
}

std::string slot_name(std::size_t i) { return "table slot " + std::to_string(i + 1); }

// Places the given entity names on distinct table slots in a seeded order.
void lay_out(TabletopState& s, const std::vector<std::string>& names, std::mt19937_64& rng) {
  const auto order = permutation(names.size(), rng);
  for (std::size_t i = 0; i < names.size(); ++i) s.stacks[slot_name(i)] = {names[order[i]]};
}

}  // namespace

// ---------------------------------------------------------------------------
// State

std::pair<std::string, std::size_t> TabletopState::position_of(const std::string& entity) const {
  for (const auto& [base, stack] : stacks) {
    const auto it = std::find(stack.begin(), stack.end(), entity);
    if (it != stack.end()) return {base, static_cast<std::size_t>(it - stack.begin())};
  }
  throw PreconditionError("unknown entity '" + entity + "'");
}

std::string TabletopState::location_of(const std::string& entity) const { return position_of(entity).first; }

std::vector<std::string> TabletopState::names_of(EntityKind kind) const {
  std::vector<std::string> out;
  for (const auto& [name, info] : entities)
    if (info.kind == kind) out.push_back(name);
  return out;
}

std::map<std::string, std::string> TabletopState::locations_of(EntityKind kind) const {
  std::map<std::string, std::string> out;
  for (const auto& name : names_of(kind)) out[name] = location_of(name);
  return out;
}

std::size_t TabletopState::entity_count() const {
  std::size_t n = 0;
  for (const auto& [base, stack] : stacks) n += stack.size();
  return n;
}

bool TabletopState::is_corner(const std::string& name) const {
  return std::find(kCorners.begin(), kCorners.end(), name) != kCorners.end();
}

bool TabletopState::is_person(const std::string& name) const {
  return std::find(people.begin(), people.end(), name) != people.end();
}

TabletopState init_scene(std::uint64_t seed, std::size_t n_blocks, std::size_t n_bowls) {
  if (n_blocks < 1 || n_bowls < 1) throw PreconditionError("a scene needs at least one block and one bowl");
  if (n_blocks + n_bowls > kPalette.size())
    throw PreconditionError("palette exhausted: " + std::to_string(n_blocks + n_bowls) + " colours requested, " +
                            std::to_string(kPalette.size()) + " available");
  std::mt19937_64 rng(seed);
  const auto colours = permutation(kPalette.size(), rng);
  TabletopState s;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_blocks + n_bowls; ++i) {
    const auto& colour = kPalette[colours[i]];
    const bool block = i < n_blocks;
    const auto name = colour + (block ? " block" : " bowl");
    s.entities[name] = EntityInfo{block ? EntityKind::kBlock : EntityKind::kBowl, colour, false};
    names.push_back(name);
  }
  lay_out(s, names, rng);
  return s;
}

TabletopState init_paired_scene(std::uint64_t seed, std::size_t n_pairs) {
  if (n_pairs < 1) throw PreconditionError("a paired scene needs at least one pair");
  if (n_pairs > kPalette.size()) throw PreconditionError("palette exhausted");
  std::mt19937_64 rng(seed);
  const auto colours = permutation(kPalette.size(), rng);
  TabletopState s;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const auto& colour = kPalette[colours[i]];
    s.entities[colour + " block"] = EntityInfo{EntityKind::kBlock, colour, false};
    s.entities[colour + " bowl"] = EntityInfo{EntityKind::kBowl, colour, false};
    names.push_back(colour + " block");
    names.push_back(colour + " bowl");
  }
  lay_out(s, names, rng);
  return s;
}

TabletopState init_handover_scene(std::uint64_t seed, std::size_t n_items, std::size_t n_people) {
  if (n_items < 1 || n_people < 1) throw PreconditionError("a handover scene needs items and people");
  if (n_items > kItems.size() || n_people > kPeople.size()) throw PreconditionError("item or people list exhausted");
  std::mt19937_64 rng(seed);
  const auto items = permutation(kItems.size(), rng);
  const auto people = permutation(kPeople.size(), rng);
  TabletopState s;
  std::vector<std::string> names;
  bool any_drink = false;
  for (std::size_t i = 0; i < n_items; ++i) {
    // the first three list entries are drinks
    const bool drink = items[i] < 3;
    any_drink = any_drink || drink;
    s.entities[kItems[items[i]]] = EntityInfo{EntityKind::kItem, "", drink};
    names.push_back(kItems[items[i]]);
  }
  if (!any_drink) {
    // keep drink tasks resolvable: swap the last item for the first drink drawn
    const auto& last = names.back();
    s.entities.erase(last);
    for (auto idx : items)
      if (idx < 3) {
        names.back() = kItems[idx];
        s.entities[kItems[idx]] = EntityInfo{EntityKind::kItem, "", true};
        break;
      }
  }
  for (std::size_t i = 0; i < n_people; ++i) s.people.push_back(kPeople[people[i]]);
  std::sort(s.people.begin(), s.people.end());
  lay_out(s, names, rng);
  return s;
}

TabletopState apply_action(const TabletopState& state, const Action& action) {
  const auto src_it = state.entities.find(action.source);
  if (src_it == state.entities.end()) throw PreconditionError("unknown entity '" + action.source + "'");
  if (src_it->second.kind == EntityKind::kBowl) throw PreconditionError("bowls cannot be moved");
  if (action.target == action.source) throw PreconditionError("cannot place an entity onto itself");

  const auto [src_base, src_height] = state.position_of(action.source);
  if (src_height + 1 != state.stacks.at(src_base).size())
    throw PreconditionError("'" + action.source + "' is under another entity");

  std::string base;
  if (action.kind == Action::Kind::kHandover) {
    if (!state.is_person(action.target)) throw PreconditionError("unknown person '" + action.target + "'");
    base = action.target;
  } else if (state.is_corner(action.target)) {
    base = action.target;
  } else {
    const auto dst_it = state.entities.find(action.target);
    if (dst_it == state.entities.end()) throw PreconditionError("unknown target '" + action.target + "'");
    switch (dst_it->second.kind) {
      case EntityKind::kBowl: base = action.target; break;
      case EntityKind::kBlock: {
        const auto [b, h] = state.position_of(action.target);
        if (h + 1 != state.stacks.at(b).size())
          throw PreconditionError("'" + action.target + "' is under another entity");
        base = b;
        break;
      }
      case EntityKind::kItem: throw PreconditionError("cannot place onto '" + action.target + "'");
    }
  }

  TabletopState next = state;
  auto& from = next.stacks[src_base];
  from.pop_back();
  if (from.empty()) next.stacks.erase(src_base);
  next.stacks[base].push_back(action.source);
  ++next.moves;
  return next;
}

// ---------------------------------------------------------------------------
// Templates

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kClear: return "clear";
    case Category::kAmbiguous: return "ambiguous";
    case Category::kInfeasible: return "infeasible";
  }
  return "unknown";
}

const std::vector<TemplateInfo>& templates() {
  static const std::vector<TemplateInfo> list = {
      {"pick_place", Category::kClear, {"block", "bowl"}, {}, "pick the {block} and put on the {bowl}"},
      {"all_on_corner", Category::kClear, {"corner"}, {}, "place all blocks on the {corner}"},
      {"all_in_bowl", Category::kClear, {"bowl"}, {}, "place all blocks on the {bowl}"},
      {"different_corners", Category::kClear, {}, {}, "put all blocks on different corners"},
      {"matching_color", Category::kClear, {}, {}, "place blocks on matching color"},
      {"mismatching_color", Category::kClear, {}, {}, "place blocks on mismatching color"},
      {"stack_on_corner", Category::kClear, {"corner"}, {}, "stack all blocks on the {corner}"},
      {"pick_user_block", Category::kAmbiguous, {"bowl"}, {"block"},
       "pick the block that the user wants and place on the {bowl}"},
      {"place_user_bowl", Category::kAmbiguous, {"block"}, {"bowl"},
       "pick the {block} and put on the bowl that the user wants"},
      {"pick_block_put_bowl", Category::kAmbiguous, {}, {"block", "bowl"}, "pick the block and put in the bowl"},
      {"stack_all", Category::kAmbiguous, {}, {"corner"}, "stack all blocks"},
      {"give_to", Category::kClear, {"item", "person"}, {}, "give the {item} to {person}"},
      {"give_to_someone", Category::kAmbiguous, {"item"}, {"person"}, "give the {item} to someone"},
      {"give_drink_to", Category::kAmbiguous, {"person"}, {"item"}, "give something to drink to {person}"},
      {"give_drink_to_someone", Category::kAmbiguous, {}, {"item", "person"}, "give something to drink to someone"},
      {"wipe_desk", Category::kInfeasible, {}, {}, "wipe the desk"},
      {"smash", Category::kInfeasible, {"item"}, {}, "smash the {item}"},
      {"put_on_ground", Category::kInfeasible, {"item"}, {}, "put the {item} on the ground"},
  };
  return list;
}

const TemplateInfo& template_info(const std::string& id) {
  for (const auto& t : templates())
    if (t.id == id) return t;
  throw PreconditionError("unknown template '" + id + "'");
}

void TaskSpec::validate() const {
  const auto& info = template_info(template_id);
  for (const auto& slot : info.bound_slots) {
    const auto it = bindings.find(slot);
    if (it == bindings.end() || it->second.empty())
      throw PreconditionError("template '" + template_id + "' needs slot '" + slot + "'");
  }
  if (bindings.size() != info.bound_slots.size())
    throw PreconditionError("template '" + template_id + "' got unexpected bindings");
  if (gold_ambiguous != !info.hidden_slots.empty())
    throw PreconditionError("ambiguity flag disagrees with template '" + template_id + "'");
  if (hidden_intent) {
    if (!gold_ambiguous) throw PreconditionError("hidden intent on a fully specified task");
    for (const auto& slot : info.hidden_slots)
      if (!hidden_intent->count(slot)) throw PreconditionError("hidden intent misses slot '" + slot + "'");
    if (hidden_intent->size() != info.hidden_slots.size())
      throw PreconditionError("hidden intent has unexpected slots");
  }
}

TaskSpec make_task(const std::string& template_id, std::map<std::string, std::string> bindings,
                   std::optional<std::map<std::string, std::string>> hidden_intent) {
  TaskSpec t;
  t.template_id = template_id;
  t.bindings = std::move(bindings);
  t.gold_ambiguous = !template_info(template_id).hidden_slots.empty();
  t.hidden_intent = std::move(hidden_intent);
  t.validate();
  return t;
}

std::string goal_text(const TaskSpec& task) {
  std::string out = template_info(task.template_id).goal_format;
  for (const auto& [slot, value] : task.bindings) {
    const auto key = "{" + slot + "}";
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size()))
      out.replace(pos, key.size(), value);
  }
  return out;
}

namespace {

std::string slot_value(const TaskSpec& task, const std::string& slot) {
  if (const auto it = task.bindings.find(slot); it != task.bindings.end()) return it->second;
  if (task.hidden_intent)
    if (const auto it = task.hidden_intent->find(slot); it != task.hidden_intent->end()) return it->second;
  throw PreconditionError("slot '" + slot + "' is unresolved");
}

bool all_blocks_at(const TabletopState& s, const std::string& base) {
  for (const auto& [name, loc] : s.locations_of(EntityKind::kBlock))
    if (loc != base) return false;
  return true;
}

bool stacked_at(const TabletopState& s, const std::string& corner) {
  const auto it = s.stacks.find(corner);
  if (it == s.stacks.end()) return false;
  const auto blocks = s.names_of(EntityKind::kBlock);
  // one stack at the corner holding every block and nothing else
  return it->second.size() == blocks.size() && all_blocks_at(s, corner);
}

}  // namespace

bool check_success(const TaskSpec& task, const TabletopState& state) {
  task.validate();
  if (task.gold_ambiguous && !task.hidden_intent) throw PreconditionError("unresolved task");
  const auto& info = template_info(task.template_id);
  const auto& id = info.id;

  if (info.category == Category::kInfeasible) return state.moves == 0;

  if (id == "pick_place" || id == "pick_user_block" || id == "place_user_bowl" || id == "pick_block_put_bowl") {
    const auto bowl = slot_value(task, "bowl");
    if (!state.entities.count(bowl)) throw PreconditionError("unknown bowl '" + bowl + "'");
    return state.location_of(slot_value(task, "block")) == bowl;
  }
  if (id == "all_on_corner") return all_blocks_at(state, slot_value(task, "corner"));
  if (id == "all_in_bowl") return all_blocks_at(state, slot_value(task, "bowl"));
  if (id == "different_corners") {
    std::set<std::string> used;
    for (const auto& [name, loc] : state.locations_of(EntityKind::kBlock))
      if (!state.is_corner(loc) || !used.insert(loc).second) return false;
    return true;
  }
  if (id == "matching_color" || id == "mismatching_color") {
    const bool want_match = id == "matching_color";
    for (const auto& [name, loc] : state.locations_of(EntityKind::kBlock)) {
      const auto it = state.entities.find(loc);
      if (it == state.entities.end() || it->second.kind != EntityKind::kBowl) return false;
      if ((it->second.color == state.entities.at(name).color) != want_match) return false;
    }
    return true;
  }
  if (id == "stack_on_corner" || id == "stack_all") return stacked_at(state, slot_value(task, "corner"));
  if (id == "give_to" || id == "give_to_someone" || id == "give_drink_to" || id == "give_drink_to_someone")
    return state.location_of(slot_value(task, "item")) == slot_value(task, "person");
  throw PreconditionError("no success predicate for '" + id + "'");
}

// ---------------------------------------------------------------------------
// Oracle

namespace {

const std::map<std::string, std::vector<std::string>>& slot_triggers() {
  static const std::map<std::string, std::vector<std::string>> t = {
      {"block", {"which block", "what block", "which blocks", "what color block"}},
      {"bowl", {"which bowl", "what bowl", "where"}},
      {"corner", {"which corner", "what corner", "where"}},
      {"person", {"who", "whom", "which person"}},
      {"item", {"which drink", "what drink", "what kind of drink", "which item", "what item", "which object",
                "what object", "what would", "what should"}},
  };
  return t;
}

// Lowercased, punctuation replaced by spaces, padded for whole-word search.
std::string padded_words(std::string_view text) {
  std::string out = " ";
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    out.push_back(std::isalnum(u) || c == '\'' ? static_cast<char>(std::tolower(u)) : ' ');
  }
  out.push_back(' ');
  return out;
}

std::string reveal(const std::string& slot, const std::string& value) {
  return slot == "person" ? value : "the " + value;
}

}  // namespace

std::string oracle_answer(const std::string& question, const TaskSpec& task) {
  if (!task.gold_ambiguous) throw PreconditionError("oracle consulted on a fully specified task");
  if (!task.hidden_intent) throw PreconditionError("oracle needs the hidden intent");
  const auto q = padded_words(question);
  std::vector<std::string> parts;
  for (const auto& slot : template_info(task.template_id).hidden_slots) {
    for (const auto& phrase : slot_triggers().at(slot)) {
      if (q.find(" " + phrase + " ") != std::string::npos) {
        parts.push_back(reveal(slot, task.hidden_intent->at(slot)));
        break;
      }
    }
  }
  if (parts.empty()) return std::string(kUninformativeAnswer);
  std::string out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out += " and " + parts[i];
  return out;
}

// ---------------------------------------------------------------------------
// Execution

prompt::SceneDescription to_scene_description(const TabletopState& state, const std::string& robot_type) {
  prompt::SceneDescription d;
  d.robot_type = robot_type;
  for (const auto& [name, info] : state.entities) {
    prompt::Entity e{name, {}};
    if (!info.color.empty()) e.attributes["color"] = info.color;
    if (info.drink) e.attributes["drink"] = "yes";
    d.objects.push_back(std::move(e));
  }
  if (!state.names_of(EntityKind::kBlock).empty())
    for (const auto& c : kCorners) d.objects.push_back(prompt::Entity{c, {}});
  for (const auto& p : state.people) d.people.push_back(prompt::Entity{p, {}});
  d.action_set.push_back("robot.pick_and_place(<object>, <place>)");
  if (!state.people.empty()) d.action_set.push_back("robot.give(<object>, <person>)");
  return d;
}

namespace {

std::string resolve_name(const TabletopState& state, std::string_view raw) {
  auto key = lower(raw);
  const auto b = key.find_first_not_of(" \t\"'");
  const auto e = key.find_last_not_of(" \t\"'");
  key = b == std::string::npos ? std::string() : key.substr(b, e - b + 1);
  if (key.rfind("the ", 0) == 0) key = key.substr(4);
  for (const auto& [name, info] : state.entities)
    if (lower(name) == key) return name;
  for (const auto& c : kCorners)
    if (c == key) return c;
  for (const auto& p : state.people)
    if (lower(p) == key) return p;
  throw PreconditionError("unknown entity '" + std::string(raw) + "'");
}

}  // namespace

TabletopState execute(const TabletopState& state, const std::vector<embed::SkillCall>& calls,
                      std::vector<std::string>* executed) {
  TabletopState s = state;
  for (const auto& call : calls) {
    Action a;
    if (call.name == "robot.pick_and_place")
      a.kind = Action::Kind::kPickAndPlace;
    else if (call.name == "robot.give")
      a.kind = Action::Kind::kHandover;
    else
      throw PreconditionError("unsupported skill '" + call.name + "'");
    if (call.args.size() != 2) throw PreconditionError(call.name + " takes two arguments");
    a.source = resolve_name(s, call.args[0]);
    a.target = resolve_name(s, call.args[1]);
    s = apply_action(s, a);
    if (executed) executed->push_back(embed::render_skill_call(call));
  }
  return s;
}

EpisodeResult run_episode(const TaskSpec& task, const TabletopState& state, const triage::TriageConfig& config,
                          const triage::Resources& resources, int budget) {
  EpisodeResult r;
  try {
    if (budget < 0) throw PreconditionError("question budget must be non-negative");
    task.validate();
    triage::DialogueState ds;
    ds.goal = prompt::GoalCommand{goal_text(task), {}};
    ds.scene = to_scene_description(state);
    auto cfg = config;
    cfg.max_question_rounds = budget;

    const triage::AnswerSource answers = [&](const std::string& q, const triage::DialogueState&) {
      const auto a = task.gold_ambiguous ? oracle_answer(q, task) : std::string(kUninformativeAnswer);
      r.transcript.push_back("robot: " + q);
      r.transcript.push_back("user: " + a);
      return a;
    };
    const auto final_state = triage::run_dialogue(ds, cfg, resources, answers);
    r.rounds_used = final_state.rounds_used;
    r.asked_question = r.rounds_used > 0;
    const auto& res = *final_state.last_result;
    r.label = res.label;
    r.transcript.push_back("label: " + std::string(triage::to_string(res.label)));

    std::vector<embed::SkillCall> calls;
    if (res.label == triage::Label::kClear && res.skill) {
      calls = *res.skill;
    } else if (res.label == triage::Label::kAmbiguous && res.fallback_skill) {
      calls = embed::parse_skill_calls(embed::first_line(*res.fallback_skill), ds.scene.action_set);
      r.transcript.push_back("guess: " + embed::first_line(*res.fallback_skill));
    } else if (res.explanation) {
      r.transcript.push_back("explanation: " + *res.explanation);
    }
    const auto after = execute(state, calls, &r.actions);
    r.success = check_success(task, after);
  } catch (const std::exception& e) {
    r.success = false;
    r.error = e.what();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Batches

BatchEntry batch_entry_from_json(const json& j) {
  BatchEntry e;
  e.template_id = j.at("template_id").get<std::string>();
  template_info(e.template_id);
  if (j.contains("bindings")) e.bindings = j.at("bindings").get<std::map<std::string, std::string>>();
  if (j.contains("hidden_intent") && !j.at("hidden_intent").is_null())
    e.hidden_intent = j.at("hidden_intent").get<std::map<std::string, std::string>>();
  e.seed = j.value("seed", std::uint64_t{0});
  e.budget = j.value("budget", 1);
  if (e.budget < 0) throw PreconditionError("budget must be non-negative");
  e.scene = j.value("scene", std::string());
  e.n_blocks = j.value("n_blocks", e.n_blocks);
  e.n_bowls = j.value("n_bowls", e.n_bowls);
  e.n_items = j.value("n_items", e.n_items);
  e.n_people = j.value("n_people", e.n_people);
  return e;
}

std::vector<BatchEntry> load_batch(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open batch " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const json& list = j.is_object() ? j.at("episodes") : j;
  if (!list.is_array()) throw ParseError(path.string() + ": expected a list of episodes");
  std::vector<BatchEntry> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    try {
      out.push_back(batch_entry_from_json(list[i]));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": episode " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::string scene_kind(const BatchEntry& e) {
  if (!e.scene.empty()) return e.scene;
  const auto& id = e.template_id;
  if (id == "matching_color" || id == "mismatching_color") return "paired";
  if (id.rfind("give", 0) == 0 || id == "wipe_desk" || id == "smash" || id == "put_on_ground") return "handover";
  return "distinct";
}

}  // namespace

TabletopState build_state(const BatchEntry& entry) {
  const auto kind = scene_kind(entry);
  if (kind == "distinct") return init_scene(entry.seed, entry.n_blocks, entry.n_bowls);
  if (kind == "paired") return init_paired_scene(entry.seed, entry.n_blocks);
  if (kind == "handover") return init_handover_scene(entry.seed, entry.n_items, entry.n_people);
  throw PreconditionError("unknown scene kind '" + kind + "'");
}

TaskSpec build_task(const BatchEntry& entry, const TabletopState& state) {
  const auto& info = template_info(entry.template_id);
  std::mt19937_64 rng(entry.seed ^ 0x5bd1e995ULL);
  const auto draw = [&](const std::string& slot, bool drinks_only) {
    std::vector<std::string> pool;
    if (slot == "block") pool = state.names_of(EntityKind::kBlock);
    if (slot == "bowl") pool = state.names_of(EntityKind::kBowl);
    if (slot == "corner") pool.assign(kCorners.begin(), kCorners.end());
    if (slot == "person") pool = state.people;
    if (slot == "item")
      for (const auto& name : state.names_of(EntityKind::kItem))
        if (!drinks_only || state.entities.at(name).drink) pool.push_back(name);
    if (pool.empty()) throw PreconditionError("scene has nothing to fill slot '" + slot + "'");
    return pool[rng() % pool.size()];
  };
  const bool drinks = entry.template_id.find("drink") != std::string::npos;

  auto bindings = entry.bindings;
  for (const auto& slot : info.bound_slots)
    if (!bindings.count(slot)) bindings[slot] = draw(slot, false);
  auto hidden = entry.hidden_intent;
  if (!info.hidden_slots.empty() && !hidden) {
    hidden.emplace();
    for (const auto& slot : info.hidden_slots) (*hidden)[slot] = draw(slot, drinks);
  }
  return make_task(entry.template_id, std::move(bindings), std::move(hidden));
}

std::vector<EpisodeRecord> run_batch(const std::vector<BatchEntry>& entries, const triage::TriageConfig& config,
                                     const triage::Resources& resources) {
  std::vector<EpisodeRecord> out(entries.size());
  std::vector<std::exception_ptr> errors(entries.size());
  const auto n = static_cast<long long>(entries.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    try {
      auto& rec = out[i];
      rec.index = static_cast<std::size_t>(i);
      rec.entry = entries[i];
      const auto state = build_state(rec.entry);
      rec.task = build_task(rec.entry, state);
      rec.goal = goal_text(rec.task);
      rec.result = run_episode(rec.task, state, config, resources, rec.entry.budget);
      rec.success_before =
          rec.entry.budget == 0 ? rec.result.success : run_episode(rec.task, state, config, resources, 0).success;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

BatchSummary summarize(const std::vector<EpisodeRecord>& records) {
  BatchSummary s;
  s.episodes = records.size();
  std::vector<bool> questioned, ambiguous, before, after;
  std::size_t wins = 0;
  for (const auto& r : records) {
    questioned.push_back(r.result.asked_question);
    ambiguous.push_back(r.task.gold_ambiguous);
    wins += r.result.success ? 1 : 0;
    if (r.task.gold_ambiguous) {
      before.push_back(r.success_before);
      after.push_back(r.result.success);
    }
  }
  s.ambiguous = before.size();
  if (!records.empty()) s.success_rate = static_cast<double>(wins) / static_cast<double>(records.size());
  if (s.ambiguous > 0 && s.ambiguous < records.size()) s.timing = evalkit::timing_metric(questioned, ambiguous);
  if (s.ambiguous > 0) s.success_gap = evalkit::success_gap(before, after);
  return s;
}

json to_json(const EpisodeRecord& r) {
  json j{{"type", "episode"},
         {"index", r.index},
         {"template_id", r.task.template_id},
         {"category", to_string(template_info(r.task.template_id).category)},
         {"goal", r.goal},
         {"bindings", r.task.bindings},
         {"seed", r.entry.seed},
         {"budget", r.entry.budget},
         {"gold_ambiguous", r.task.gold_ambiguous},
         {"asked_question", r.result.asked_question},
         {"rounds_used", r.result.rounds_used},
         {"success", r.result.success},
         {"success_before", r.success_before},
         {"actions", r.result.actions},
         {"transcript", r.result.transcript}};
  j["hidden_intent"] = r.task.hidden_intent ? json(*r.task.hidden_intent) : json(nullptr);
  j["label"] = r.result.label ? json(triage::to_string(*r.result.label)) : json(nullptr);
  if (!r.result.error.empty()) j["error"] = r.result.error;
  return j;
}

json to_json(const BatchSummary& s) {
  json j{{"type", "summary"},
         {"episodes", s.episodes},
         {"ambiguous", s.ambiguous},
         {"success_rate", s.success_rate}};
  j["timing"] = s.timing ? json(*s.timing) : json(nullptr);
  j["success_gap"] = s.success_gap ? json(*s.success_gap) : json(nullptr);
  return j;
}

}  // namespace cmdtriage::tabletop
