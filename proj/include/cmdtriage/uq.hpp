#pragma once

// Uncertainty estimators over a set of sampled generations.
//
// All scores share one orientation: larger means more uncertain.
//   context_sampling   mean pairwise embedding distance over unordered pairs
//   predictive_entropy sum over positions of the top-K renormalized entropy (nats)
//   normalized_entropy predictive entropy divided by the sequence length
//   semantic_entropy   -1/|L| * sum_i log p(L_i) over equivalence classes
//   lexical_similarity 1 - mean pairwise cosine similarity

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmdtriage/embed.hpp"
#include "cmdtriage/gateway.hpp"
#include "cmdtriage/kernels.hpp"

namespace cmdtriage::uq {

enum class Estimator {
  kContextSampling,
  kPredictiveEntropy,
  kNormalizedEntropy,
  kSemanticEntropy,
  kLexicalSimilarity,
};

inline constexpr Estimator kAllEstimators[] = {
    Estimator::kContextSampling, Estimator::kPredictiveEntropy, Estimator::kNormalizedEntropy,
    Estimator::kSemanticEntropy, Estimator::kLexicalSimilarity};

std::string_view to_string(Estimator e);
Estimator estimator_from_string(std::string_view name);
bool needs_token_probs(Estimator e);

struct SampleSet {
  std::vector<gateway::GenerationSample> samples;
  std::vector<embed::Vector> embeddings;
  std::vector<std::uint8_t> degenerate;  // 1 where no keywords survived extraction
  double sentinel_distance = 0.0;
  // Skill signatures used for keyword extraction and the default equivalence.
  std::vector<std::string> templates;

  std::size_t h() const { return samples.size(); }
  /// Throws PreconditionError unless h >= 2 and the parallel lists agree.
  void validate() const;
  bool all_degenerate() const;
};

/// Extracts keywords and embeds each sample; samples with no keywords are
/// flagged degenerate and paired at 2 x the table's max norm.
SampleSet make_sample_set(std::vector<gateway::GenerationSample> samples,
                          const embed::EmbeddingTable& table, std::vector<std::string> templates);

struct UncertaintyScore {
  double value = 0.0;
  Estimator estimator = Estimator::kContextSampling;
  std::size_t h = 0;
};

UncertaintyScore context_sampling_uncertainty(const SampleSet& set);

UncertaintyScore predictive_entropy(const gateway::GenerationSample& sample);
UncertaintyScore normalized_entropy(const gateway::GenerationSample& sample);

using EquivalenceFn =
    std::function<bool(const gateway::GenerationSample&, const gateway::GenerationSample&)>;

/// True iff both samples yield the same keyword set (empty when nothing is extractable).
bool default_equivalence(const gateway::GenerationSample& a, const gateway::GenerationSample& b,
                         std::span<const std::string> templates);
EquivalenceFn keyword_equivalence(std::vector<std::string> templates);

/// Class index per sample under the equivalence (first-seen order).
std::vector<std::size_t> cluster(const SampleSet& set, const EquivalenceFn& equivalence);
/// p(L_i|x): normalized sequence probabilities summed within each class.
std::vector<double> semantic_class_probs(const SampleSet& set, const EquivalenceFn& equivalence);

UncertaintyScore semantic_entropy(std::span<const double> class_probs, std::size_t h = 0);
UncertaintyScore semantic_entropy(const SampleSet& set, const EquivalenceFn& equivalence);

UncertaintyScore lexical_similarity(const SampleSet& set);

/// Set-level dispatch. Per-sample entropies are averaged over the set.
UncertaintyScore score(Estimator estimator, const SampleSet& set);

}  // namespace cmdtriage::uq
