#pragma once

// The command triage cascade: estimate sigma under context sampling, gate it
// against epsilon, check feasibility of uncertain goals, generate the reason
// and a clarifying question, and drive the multi-round dialogue.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmdtriage/embed.hpp"
#include "cmdtriage/gateway.hpp"
#include "cmdtriage/prompt.hpp"
#include "cmdtriage/uq.hpp"

namespace cmdtriage::triage {

enum class Label { kClear, kAmbiguous, kInfeasible };

std::string_view to_string(Label label);
Label label_from_string(std::string_view s);

struct FeasibilityKeywords {
  std::vector<std::string> negation = {"no",     "not",        "cannot",     "can't",   "unable",
                                       "not able", "impossible", "infeasible", "outside", "beyond"};
  std::vector<std::string> affirmation = {"yes", "i can", "sure", "certainly"};
};

struct TriageConfig {
  double epsilon = 0.5;
  std::size_t h = 5;
  std::size_t k = 3;
  uq::Estimator estimator = uq::Estimator::kContextSampling;
  int max_question_rounds = 1;
  std::uint64_t seed = 0;
  double sample_temperature = 0.7;
  double zero_shot_temperature = 0.0;
  int max_tokens = 64;
  bool uncertainty_aware = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const TriageConfig& c);
/// Missing fields keep their defaults.
TriageConfig triage_config_from_json(const nlohmann::json& j);

struct FeasibilityVerdict {
  bool feasible = false;
  std::string raw_answer;
  std::string matched_keyword;
};

struct TranscriptEntry {
  std::string kind;  // action[i] | feasibility | reason | question
  std::string prompt;
  std::string response;
};

struct TriageResult {
  Label label = Label::kAmbiguous;
  uq::UncertaintyScore sigma;
  std::optional<std::vector<embed::SkillCall>> skill;
  std::optional<std::string> skill_text;
  std::optional<std::string> explanation;
  std::optional<std::string> question;
  std::optional<FeasibilityVerdict> feasibility;
  // Majority generation kept on uncertain paths; executed only as a guess.
  std::optional<std::string> fallback_skill;
  std::vector<std::string> generations;
  std::vector<TranscriptEntry> transcript;
  std::vector<std::string> notes;

  /// Clear => skill, no question; Ambiguous => question; Infeasible => explanation.
  bool satisfies_invariants() const;
};

void to_json(nlohmann::json& j, const TriageResult& r);

struct Resources {
  std::shared_ptr<const gateway::Backend> backend;
  std::vector<prompt::ContextExemplar> contexts;
  std::shared_ptr<const embed::EmbeddingTable> table;
  FeasibilityKeywords keywords;
};

struct SigmaEstimate {
  uq::UncertaintyScore score;
  uq::SampleSet samples;
  std::vector<prompt::AssembledPrompt> prompts;
};

/// Seed of the i-th context-sampling variant.
std::uint64_t variant_seed(std::uint64_t seed, std::size_t index);

SigmaEstimate estimate_sigma(const prompt::GoalCommand& goal, const prompt::SceneDescription& scene,
                             const TriageConfig& config, const Resources& resources);

FeasibilityVerdict parse_feasibility_answer(std::string_view answer,
                                            const FeasibilityKeywords& keywords = {});

/// Index of the most frequent first line; ties go to the lowest index.
std::size_t majority_index(std::span<const gateway::GenerationSample> samples);

/// The cascade after sigma is known.
TriageResult decide(const SigmaEstimate& estimate, const prompt::GoalCommand& goal,
                    const prompt::SceneDescription& scene, const TriageConfig& config,
                    const Resources& resources);

TriageResult classify(const prompt::GoalCommand& goal, const prompt::SceneDescription& scene,
                      const TriageConfig& config, const Resources& resources);

// ---------------------------------------------------------------------------
// Dialogue

enum class DialogueStatus { kOpen, kResolved, kAbandoned };
std::string_view to_string(DialogueStatus s);

struct DialogueState {
  prompt::GoalCommand goal;
  prompt::SceneDescription scene;
  int rounds_used = 0;
  std::vector<std::pair<std::string, std::string>> history;  // (question, answer)
  DialogueStatus status = DialogueStatus::kOpen;
  std::optional<std::string> pending_question;
  std::optional<TriageResult> last_result;
};

void to_json(nlohmann::json& j, const DialogueState& s);

/// Supplies the user's answer to a clarifying question. May throw.
using AnswerSource = std::function<std::string(const std::string& question, const DialogueState& state)>;

/// One classification round: updates status and pending question.
const TriageResult& dialogue_step(DialogueState& state, const TriageConfig& config,
                                  const Resources& resources);
/// Feeds an answer to the pending question back into the goal.
void dialogue_answer(DialogueState& state, const std::string& answer);

DialogueState run_dialogue(const DialogueState& state, const TriageConfig& config,
                           const Resources& resources, const AnswerSource& answers);

// ---------------------------------------------------------------------------
// Threshold calibration

struct ValidationRow {
  prompt::GoalCommand goal;
  prompt::SceneDescription scene;
  bool is_certain = false;
};

/// Threshold maximizing Youden's J, deciding "certain" iff score <= threshold.
/// Candidates are the distinct scores; ties go to the smallest threshold.
double youden_threshold(std::span<const double> scores, const std::vector<bool>& is_certain);

double calibrate_epsilon(std::span<const ValidationRow> validation, const TriageConfig& config,
                         const Resources& resources);

}  // namespace cmdtriage::triage
