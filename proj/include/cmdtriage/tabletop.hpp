#pragma once

// Symbolic pick-and-place world: task templates, a scripted user oracle,
// and episode execution through the triage dialogue.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmdtriage/embed.hpp"
#include "cmdtriage/prompt.hpp"
#include "cmdtriage/triage.hpp"

namespace cmdtriage::tabletop {

inline const std::array<std::string, 6> kPalette = {"red", "blue", "green", "yellow", "purple", "orange"};
inline const std::array<std::string, 4> kCorners = {"top left corner", "top right corner",
                                                    "bottom left corner", "bottom right corner"};
inline const std::array<std::string, 6> kItems = {"water bottle", "coke can", "coffee cup",
                                                  "apple",        "banana",   "bag of chips"};
inline const std::array<std::string, 4> kPeople = {"Alice", "Bob", "Chris", "Dana"};

enum class EntityKind { kBlock, kBowl, kItem };

struct EntityInfo {
  EntityKind kind = EntityKind::kBlock;
  std::string color;   // blocks and bowls
  bool drink = false;  // items

  bool operator==(const EntityInfo&) const = default;
};

struct TabletopState {
  std::map<std::string, EntityInfo> entities;
  std::vector<std::string> people;
  // base location -> entities bottom to top. Bases are table slots, bowls,
  // corners and people (for handed-over items).
  std::map<std::string, std::vector<std::string>> stacks;
  int moves = 0;

  /// Base location of an entity; throws PreconditionError if unknown.
  std::string location_of(const std::string& entity) const;
  /// Stack containing the entity and its height in it.
  std::pair<std::string, std::size_t> position_of(const std::string& entity) const;
  std::vector<std::string> names_of(EntityKind kind) const;
  /// Name -> base location, per kind.
  std::map<std::string, std::string> locations_of(EntityKind kind) const;
  std::size_t entity_count() const;
  bool is_corner(const std::string& name) const;
  bool is_person(const std::string& name) const;

  bool operator==(const TabletopState&) const = default;
};

/// Blocks and bowls with colours drawn from the palette without replacement.
TabletopState init_scene(std::uint64_t seed, std::size_t n_blocks, std::size_t n_bowls);
/// n_pairs colours, each with a block and a bowl of that colour.
TabletopState init_paired_scene(std::uint64_t seed, std::size_t n_pairs);
/// Items (drinks among them) and people for handover tasks.
TabletopState init_handover_scene(std::uint64_t seed, std::size_t n_items, std::size_t n_people);

struct Action {
  enum class Kind { kPickAndPlace, kHandover };
  Kind kind = Kind::kPickAndPlace;
  std::string source;
  std::string target;
};

/// Moves `source` (topmost of its stack) onto `target`: a bowl, corner, the
/// top block of a stack, or a person for handovers.
TabletopState apply_action(const TabletopState& state, const Action& action);

enum class Category { kClear, kAmbiguous, kInfeasible };
std::string_view to_string(Category c);

struct TemplateInfo {
  std::string id;
  Category category;
  std::vector<std::string> bound_slots;   // must be given in bindings
  std::vector<std::string> hidden_slots;  // only known to the user
  std::string goal_format;                // {slot} placeholders
};

const std::vector<TemplateInfo>& templates();
const TemplateInfo& template_info(const std::string& id);

struct TaskSpec {
  std::string template_id;
  std::map<std::string, std::string> bindings;
  bool gold_ambiguous = false;
  std::optional<std::map<std::string, std::string>> hidden_intent;

  /// Throws PreconditionError when bindings or hidden intent do not fit the template.
  void validate() const;
};

TaskSpec make_task(const std::string& template_id, std::map<std::string, std::string> bindings,
                   std::optional<std::map<std::string, std::string>> hidden_intent = std::nullopt);

std::string goal_text(const TaskSpec& task);

/// Declarative success predicate of the (resolved) task on a state.
bool check_success(const TaskSpec& task, const TabletopState& state);

/// Scripted user: reveals hidden slots the question asks about.
std::string oracle_answer(const std::string& question, const TaskSpec& task);
inline constexpr std::string_view kUninformativeAnswer = "I'm not sure what you mean";

prompt::SceneDescription to_scene_description(const TabletopState& state, const std::string& robot_type = "tabletop");

/// Executes parsed skill calls in order (entity names matched case-insensitively,
/// a leading "the " ignored).
TabletopState execute(const TabletopState& state, const std::vector<embed::SkillCall>& calls,
                      std::vector<std::string>* executed = nullptr);

struct EpisodeResult {
  bool success = false;
  bool asked_question = false;
  std::vector<std::string> actions;
  std::vector<std::string> transcript;
  std::optional<triage::Label> label;
  int rounds_used = 0;
  std::string error;
};

EpisodeResult run_episode(const TaskSpec& task, const TabletopState& state, const triage::TriageConfig& config,
                          const triage::Resources& resources, int budget);

// ---------------------------------------------------------------------------
// Batches

struct BatchEntry {
  std::string template_id;
  std::map<std::string, std::string> bindings;
  std::optional<std::map<std::string, std::string>> hidden_intent;
  std::uint64_t seed = 0;
  int budget = 1;
  std::string scene;  // distinct | paired | handover; empty picks by template
  std::size_t n_blocks = 3;
  std::size_t n_bowls = 3;
  std::size_t n_items = 4;
  std::size_t n_people = 2;
};

BatchEntry batch_entry_from_json(const nlohmann::json& j);
std::vector<BatchEntry> load_batch(const std::filesystem::path& path);

TabletopState build_state(const BatchEntry& entry);
/// Hidden intent from the entry, or drawn from the scene by the entry seed.
TaskSpec build_task(const BatchEntry& entry, const TabletopState& state);

struct EpisodeRecord {
  std::size_t index = 0;
  BatchEntry entry;
  TaskSpec task;
  std::string goal;
  EpisodeResult result;
  bool success_before = false;  // same episode replayed with budget 0
};

struct BatchSummary {
  std::size_t episodes = 0;
  std::size_t ambiguous = 0;
  std::optional<double> timing;
  std::optional<double> success_gap;
  double success_rate = 0.0;
};

/// Runs every entry (parallel over entries) plus its budget-0 replay.
std::vector<EpisodeRecord> run_batch(const std::vector<BatchEntry>& entries, const triage::TriageConfig& config,
                                     const triage::Resources& resources);
BatchSummary summarize(const std::vector<EpisodeRecord>& records);

nlohmann::json to_json(const EpisodeRecord& record);
nlohmann::json to_json(const BatchSummary& summary);

}  // namespace cmdtriage::tabletop
