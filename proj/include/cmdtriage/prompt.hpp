#pragma once

// Prompt assembly: context-sampled few-shot action prompts, the
// uncertainty-aware goal prefix, and the zero-shot feasibility, reason and
// question prompts.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cmdtriage::prompt {

struct Entity {
  std::string name;
  std::map<std::string, std::string> attributes;  // e.g. color, location

  bool operator==(const Entity&) const = default;
};

struct SceneDescription {
  std::string robot_type;
  std::vector<Entity> objects;
  std::vector<Entity> people;
  std::vector<std::string> action_set;  // skill signatures, slots written as <name>

  /// Throws PreconditionError on an empty action set or duplicate entity names.
  void validate() const;
  bool operator==(const SceneDescription&) const = default;
};

struct GoalCommand {
  std::string text;
  std::vector<std::string> augmented_facts;
};

struct ContextExemplar {
  std::string scene_snippet;
  std::string goal_text;
  std::string skill_text;
};

enum class PromptKind { kAction, kFeasibility, kReason, kQuestion };

struct Provenance {
  std::vector<std::size_t> context_indices;
  std::vector<std::size_t> scene_permutation;  // object order, then people order
  bool uncertainty_aware = false;
  PromptKind kind = PromptKind::kAction;
};

struct AssembledPrompt {
  std::string text;
  Provenance provenance;
};

inline constexpr std::string_view kUncertaintyPrefix = "Considering ambiguity of a goal, ";
inline constexpr std::string_view kReasonCue = "This code is uncertain because";
inline constexpr std::string_view kQuestionCue = "What can I ask the user? Please ";

/// Trims whitespace and strips terminal '.' / '?'.
std::string normalize_goal(std::string_view text);

/// Goal text plus the ", given that: f1; f2" splice when facts are present.
std::string goal_line(const GoalCommand& goal);

/// Indices of k distinct exemplars out of n, in random order; deterministic per seed.
std::vector<std::size_t> sample_context_indices(std::size_t n, std::size_t k, std::uint64_t seed);
std::vector<ContextExemplar> sample_contexts(std::span<const ContextExemplar> context_set,
                                             std::size_t k, std::uint64_t seed);

/// Permutation applied by shuffle_scene: objects first, then people (offset by |objects|).
std::vector<std::size_t> scene_permutation(const SceneDescription& scene, std::uint64_t seed);
SceneDescription shuffle_scene(const SceneDescription& scene, std::uint64_t seed);

std::string wrap_uncertainty_aware(const GoalCommand& goal);

std::string render_entity(const Entity& e);
/// Single-line scene rendering used in action prompts and exemplar snippets.
std::string render_scene(const SceneDescription& scene);
std::string render_exemplar(const ContextExemplar& c);

AssembledPrompt assemble_action_prompt(const GoalCommand& goal, const SceneDescription& scene,
                                       std::span<const ContextExemplar> contexts,
                                       bool uncertainty_aware);
AssembledPrompt assemble_feasibility_prompt(const GoalCommand& goal, const SceneDescription& scene);
AssembledPrompt assemble_reason_prompt(const std::string& transcript);
AssembledPrompt assemble_question_prompt(const std::string& transcript);

// JSON surfaces: scene files and context-set files.
void to_json(nlohmann::json& j, const Entity& e);
void from_json(const nlohmann::json& j, Entity& e);
void to_json(nlohmann::json& j, const SceneDescription& s);
void from_json(const nlohmann::json& j, SceneDescription& s);
void to_json(nlohmann::json& j, const ContextExemplar& c);
void from_json(const nlohmann::json& j, ContextExemplar& c);

SceneDescription load_scene(const std::filesystem::path& path);
std::vector<ContextExemplar> load_context_set(const std::filesystem::path& path);

}  // namespace cmdtriage::prompt
