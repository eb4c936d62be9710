#pragma once

// Dataset handling and metrics: AUROC, three-way accuracy, question timing,
// success-rate gap.

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmdtriage/prompt.hpp"
#include "cmdtriage/triage.hpp"

namespace cmdtriage::evalkit {

enum class GoldLabel { kCertain, kAmbiguous, kInfeasible };

std::string_view to_string(GoldLabel l);
GoldLabel gold_label_from_string(std::string_view s);
/// Certain <-> Clear, Ambiguous <-> Ambiguous, Infeasible <-> Infeasible.
GoldLabel from_triage(triage::Label l);
inline std::size_t index_of(GoldLabel l) { return static_cast<std::size_t>(l); }

struct SagcRecord {
  std::string goal_text;
  std::string robot_type;  // cook | clean | massage | other
  prompt::SceneDescription scene;
  GoldLabel label = GoldLabel::kCertain;
  std::string scene_id;
};

void to_json(nlohmann::json& j, const SagcRecord& r);
SagcRecord record_from_json(const nlohmann::json& j);

struct Dataset {
  std::vector<SagcRecord> records;
  std::array<std::size_t, 3> counts{};  // indexed by GoldLabel
};

/// Newline-delimited JSON, one record per line; blank lines are skipped.
Dataset load_sagc(const std::filesystem::path& path);

/// Rank AUROC with mid-rank ties (Mann-Whitney U / n+ n-). Positives are
/// the uncertain rows; a higher score means more uncertain.
double auroc(std::span<const double> scores, const std::vector<bool>& is_positive);

using Confusion = std::array<std::array<std::size_t, 3>, 3>;  // [gold][predicted]

struct Accuracy {
  double accuracy = 0.0;
  Confusion confusion{};
};

Accuracy accuracy3(std::span<const GoldLabel> predictions, std::span<const GoldLabel> gold);

enum class TimingVariant {
  kPerClassRate,   // P(question | ambiguous) - P(question | not ambiguous)
  kQuestionShare,  // among questioned rows: share ambiguous - share not ambiguous
};

double timing_metric(const std::vector<bool>& questioned, const std::vector<bool>& is_ambiguous,
                     TimingVariant variant = TimingVariant::kPerClassRate);

/// (after success rate - before success rate) in percentage points.
double success_gap(const std::vector<bool>& before, const std::vector<bool>& after);

enum class StratifyKey { kRobotType, kLabel, kSceneId };
StratifyKey stratify_key_from_string(std::string_view s);
std::map<std::string, std::vector<SagcRecord>> stratify(std::span<const SagcRecord> records, StratifyKey key);

inline constexpr int kReportSchemaVersion = 1;

struct EstimatorAuroc {
  std::string estimator;
  bool supported = true;
  double auroc = 0.0;
  std::string reason;  // why unsupported
};

struct MetricsReport {
  std::string mode;  // uq | cls
  std::vector<EstimatorAuroc> auroc;
  std::optional<Accuracy> accuracy;
  std::optional<double> timing;
  std::optional<double> a_gap;
  std::array<std::size_t, 3> n{};
};

nlohmann::json to_json(const MetricsReport& report);
/// Aligned-column text rendering of the report.
std::string to_text_table(const MetricsReport& report);

/// Scores every record with one estimator (parallel over records).
/// Throws CapabilityError when the estimator needs unavailable token probabilities.
std::vector<double> score_records(std::span<const SagcRecord> records, const triage::TriageConfig& config,
                                  const triage::Resources& resources);

/// Classifies every record (parallel over records).
std::vector<triage::TriageResult> classify_records(std::span<const SagcRecord> records,
                                                   const triage::TriageConfig& config,
                                                   const triage::Resources& resources);

}  // namespace cmdtriage::evalkit
