#include "cmdtriage/evalkit.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cmdtriage/error.hpp"

namespace cmdtriage::evalkit {

using nlohmann::json;

std::string_view to_string(GoldLabel l) {
  switch (l) {
    case GoldLabel::kCertain: return "certain";
    case GoldLabel::kAmbiguous: return "ambiguous";
    case GoldLabel::kInfeasible: return "infeasible";
  }
  return "unknown";
}

GoldLabel gold_label_from_string(std::string_view s) {
  if (s == "certain") return GoldLabel::kCertain;
  if (s == "ambiguous") return GoldLabel::kAmbiguous;
  if (s == "infeasible") return GoldLabel::kInfeasible;
  throw ParseError("unknown label '" + std::string(s) + "'");
}

GoldLabel from_triage(triage::Label l) {
  switch (l) {
    case triage::Label::kClear: return GoldLabel::kCertain;
    case triage::Label::kAmbiguous: return GoldLabel::kAmbiguous;
    case triage::Label::kInfeasible: return GoldLabel::kInfeasible;
  }
  return GoldLabel::kAmbiguous;
}

void to_json(json& j, const SagcRecord& r) {
  j = json{{"goal_text", r.goal_text}, {"robot_type", r.robot_type}, {"scene", r.scene},
           {"label", to_string(r.label)}, {"scene_id", r.scene_id}};
}

SagcRecord record_from_json(const json& j) {
  SagcRecord r;
  r.goal_text = j.at("goal_text").get<std::string>();
  if (r.goal_text.empty()) throw ParseError("goal_text is empty");
  r.robot_type = j.at("robot_type").get<std::string>();
  static const std::vector<std::string> robots = {"cook", "clean", "massage", "other"};
  if (std::find(robots.begin(), robots.end(), r.robot_type) == robots.end())
    throw ParseError("unknown robot_type '" + r.robot_type + "'");
  auto scene = j.at("scene");
  if (!scene.contains("robot_type")) scene["robot_type"] = r.robot_type;
  r.scene = scene.get<prompt::SceneDescription>();
  r.scene.validate();
  r.label = gold_label_from_string(j.at("label").get<std::string>());
  r.scene_id = j.at("scene_id").get<std::string>();
  return r;
}

Dataset load_sagc(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset " + path.string());
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ds.records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": malformed record: " + e.what(), lineno);
    } catch (const PreconditionError& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    }
    ++ds.counts[index_of(ds.records.back().label)];
  }
  return ds;
}

double auroc(std::span<const double> scores, const std::vector<bool>& is_positive) {
  if (scores.size() != is_positive.size()) throw PreconditionError("scores/labels length mismatch");
  const auto n = scores.size();
  std::size_t n_pos = 0;
  for (bool p : is_positive) n_pos += p ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw PreconditionError("AUROC needs both positive and negative rows");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // sum of 1-based mid-ranks of the positives
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t)
      if (is_positive[order[t]]) rank_sum += mid;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

Accuracy accuracy3(std::span<const GoldLabel> predictions, std::span<const GoldLabel> gold) {
  if (predictions.size() != gold.size()) throw PreconditionError("predictions/gold length mismatch");
  if (gold.empty()) throw PreconditionError("accuracy of an empty set");
  Accuracy a;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++a.confusion[index_of(gold[i])][index_of(predictions[i])];
    if (gold[i] == predictions[i]) ++hits;
  }
  a.accuracy = static_cast<double>(hits) / static_cast<double>(gold.size());
  return a;
}

double timing_metric(const std::vector<bool>& questioned, const std::vector<bool>& is_ambiguous,
                     TimingVariant variant) {
  if (questioned.size() != is_ambiguous.size()) throw PreconditionError("timing: length mismatch");
  std::size_t amb = 0, other = 0, q_amb = 0, q_other = 0;
  for (std::size_t i = 0; i < questioned.size(); ++i) {
    if (is_ambiguous[i]) {
      ++amb;
      q_amb += questioned[i] ? 1 : 0;
    } else {
      ++other;
      q_other += questioned[i] ? 1 : 0;
    }
  }
  if (amb == 0 || other == 0) throw PreconditionError("timing needs ambiguous and non-ambiguous rows");
  if (variant == TimingVariant::kPerClassRate)
    return static_cast<double>(q_amb) / static_cast<double>(amb) -
           static_cast<double>(q_other) / static_cast<double>(other);
  const auto asked = q_amb + q_other;
  if (asked == 0) return 0.0;
  return (static_cast<double>(q_amb) - static_cast<double>(q_other)) / static_cast<double>(asked);
}

double success_gap(const std::vector<bool>& before, const std::vector<bool>& after) {
  if (before.size() != after.size()) throw PreconditionError("success_gap: episode sets differ");
  if (before.empty()) throw PreconditionError("success_gap of an empty episode set");
  const auto rate = [](const std::vector<bool>& v) {
    return static_cast<double>(std::count(v.begin(), v.end(), true)) / static_cast<double>(v.size());
  };
  return 100.0 * (rate(after) - rate(before));
}

StratifyKey stratify_key_from_string(std::string_view s) {
  if (s == "robot_type") return StratifyKey::kRobotType;
  if (s == "label") return StratifyKey::kLabel;
  if (s == "scene_id") return StratifyKey::kSceneId;
  throw PreconditionError("unknown stratify key '" + std::string(s) + "'");
}

std::map<std::string, std::vector<SagcRecord>> stratify(std::span<const SagcRecord> records, StratifyKey key) {
  std::map<std::string, std::vector<SagcRecord>> groups;
  for (const auto& r : records) {
    switch (key) {
      case StratifyKey::kRobotType: groups[r.robot_type].push_back(r); break;
      case StratifyKey::kLabel: groups[std::string(to_string(r.label))].push_back(r); break;
      case StratifyKey::kSceneId: groups[r.scene_id].push_back(r); break;
    }
  }
  return groups;
}

// ---------------------------------------------------------------------------

json to_json(const MetricsReport& r) {
  json j{{"schema_version", kReportSchemaVersion},
         {"mode", r.mode},
         {"n", {{"certain", r.n[0]}, {"ambiguous", r.n[1]}, {"infeasible", r.n[2]}}}};
  if (!r.auroc.empty()) {
    json list = json::array();
    for (const auto& e : r.auroc) {
      json item{{"estimator", e.estimator}, {"supported", e.supported}};
      item["auroc"] = e.supported ? json(e.auroc) : json(nullptr);
      if (!e.reason.empty()) item["reason"] = e.reason;
      list.push_back(item);
    }
    j["auroc"] = list;
  }
  if (r.accuracy) {
    j["accuracy3"] = r.accuracy->accuracy;
    json m = json::array();
    for (const auto& row : r.accuracy->confusion) m.push_back(row);
    j["confusion"] = {{"labels", {"certain", "ambiguous", "infeasible"}}, {"matrix", m}};
  }
  if (r.timing) j["timing"] = *r.timing;
  if (r.a_gap) j["a_gap"] = *r.a_gap;
  return j;
}

std::string to_text_table(const MetricsReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "mode: " << r.mode << "   n: certain=" << r.n[0] << " ambiguous=" << r.n[1]
     << " infeasible=" << r.n[2] << '\n';
  if (!r.auroc.empty()) {
    os << std::left << std::setw(22) << "estimator" << std::right << std::setw(10) << "AUROC" << '\n';
    for (const auto& e : r.auroc) {
      os << std::left << std::setw(22) << e.estimator << std::right << std::setw(10);
      if (e.supported)
        os << e.auroc;
      else
        os << "unsupported";
      os << '\n';
    }
  }
  if (r.accuracy) {
    os << "accuracy3: " << r.accuracy->accuracy << '\n';
    const char* names[] = {"certain", "ambiguous", "infeasible"};
    os << std::left << std::setw(12) << "gold\\pred";
    for (auto* n : names) os << std::right << std::setw(12) << n;
    os << '\n';
    for (std::size_t g = 0; g < 3; ++g) {
      os << std::left << std::setw(12) << names[g];
      for (std::size_t p = 0; p < 3; ++p) os << std::right << std::setw(12) << r.accuracy->confusion[g][p];
      os << '\n';
    }
  }
  if (r.timing) os << "timing: " << *r.timing << '\n';
  if (r.a_gap) os << "a_gap: " << *r.a_gap << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

template <typename Out, typename Fn>
std::vector<Out> parallel_map(std::size_t n, Fn fn) {
  std::vector<Out> out(n);
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      out[i] = fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace

std::vector<double> score_records(std::span<const SagcRecord> records, const triage::TriageConfig& config,
                                  const triage::Resources& resources) {
  if (uq::needs_token_probs(config.estimator) && !resources.backend->supports_token_probs())
    throw CapabilityError(std::string(uq::to_string(config.estimator)) +
                          " needs token probabilities, backend provides none");
  return parallel_map<double>(records.size(), [&](std::size_t i) {
    const prompt::GoalCommand goal{records[i].goal_text, {}};
    return triage::estimate_sigma(goal, records[i].scene, config, resources).score.value;
  });
}

std::vector<triage::TriageResult> classify_records(std::span<const SagcRecord> records,
                                                   const triage::TriageConfig& config,
                                                   const triage::Resources& resources) {
  return parallel_map<triage::TriageResult>(records.size(), [&](std::size_t i) {
    const prompt::GoalCommand goal{records[i].goal_text, {}};
    return triage::classify(goal, records[i].scene, config, resources);
  });
}

}  // namespace cmdtriage::evalkit
