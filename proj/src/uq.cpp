#include "cmdtriage/uq.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cmdtriage/error.hpp"

namespace cmdtriage::uq {

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::kContextSampling: return "context_sampling";
    case Estimator::kPredictiveEntropy: return "predictive_entropy";
    case Estimator::kNormalizedEntropy: return "normalized_entropy";
    case Estimator::kSemanticEntropy: return "semantic_entropy";
    case Estimator::kLexicalSimilarity: return "lexical_similarity";
  }
  return "unknown";
}

Estimator estimator_from_string(std::string_view name) {
  for (auto e : kAllEstimators)
    if (to_string(e) == name) return e;
  throw PreconditionError("unknown estimator '" + std::string(name) + "'");
}

bool needs_token_probs(Estimator e) {
  return e == Estimator::kPredictiveEntropy || e == Estimator::kNormalizedEntropy ||
         e == Estimator::kSemanticEntropy;
}

void SampleSet::validate() const {
  if (samples.size() < 2) throw PreconditionError("sample set needs h >= 2");
  if (embeddings.size() != samples.size() || degenerate.size() != samples.size())
    throw PreconditionError("sample set lists disagree in length");
  for (const auto& e : embeddings)
    if (e.dimension() != embeddings.front().dimension())
      throw PreconditionError("sample set embeddings differ in dimension");
}

bool SampleSet::all_degenerate() const {
  return !degenerate.empty() && std::all_of(degenerate.begin(), degenerate.end(), [](auto d) { return d != 0; });
}

SampleSet make_sample_set(std::vector<gateway::GenerationSample> samples,
                          const embed::EmbeddingTable& table, std::vector<std::string> templates) {
  SampleSet set;
  set.templates = std::move(templates);
  set.sentinel_distance = 2.0 * table.max_norm();
  for (const auto& s : samples) {
    try {
      set.embeddings.push_back(embed::embed(embed::extract_keywords(s.text, set.templates), table));
      set.degenerate.push_back(0);
    } catch (const embed::EmptyKeywordsError&) {
      set.embeddings.push_back(embed::Vector{std::vector<double>(table.dimension(), 0.0)});
      set.degenerate.push_back(1);
    }
  }
  set.samples = std::move(samples);
  return set;
}

namespace {

struct Flat {
  std::vector<double> data;
  kernels::PointSet points;
};

Flat flatten(const SampleSet& set) {
  Flat f;
  const auto dim = set.embeddings.front().dimension();
  f.data.reserve(set.h() * dim);
  for (const auto& e : set.embeddings) f.data.insert(f.data.end(), e.components.begin(), e.components.end());
  f.points = {set.h(), dim, f.data, set.degenerate, set.sentinel_distance};
  return f;
}

const gateway::TokenProbs& require_probs(const gateway::GenerationSample& s) {
  if (!s.token_probs) throw PreconditionError("sample carries no token probabilities");
  return *s.token_probs;
}

}  // namespace

UncertaintyScore context_sampling_uncertainty(const SampleSet& set) {
  set.validate();
  const auto flat = flatten(set);
  const double sum = kernels::pair_distance_sum(flat.points);
  return {sum / kernels::pair_count(set.h()), Estimator::kContextSampling, set.h()};
}

UncertaintyScore predictive_entropy(const gateway::GenerationSample& sample) {
  double total = 0.0;
  for (const auto& pos : require_probs(sample)) {
    double z = 0.0;
    for (const auto& alt : pos.top) z += alt.prob;
    if (!(z > 0.0)) throw PreconditionError("token position has no probability mass");
    for (const auto& alt : pos.top) {
      const double q = alt.prob / z;
      if (q > 0.0) total -= q * std::log(q);
    }
  }
  return {std::max(total, 0.0), Estimator::kPredictiveEntropy, 1};
}

UncertaintyScore normalized_entropy(const gateway::GenerationSample& sample) {
  const auto t = require_probs(sample).size();
  if (t == 0) throw PreconditionError("normalized entropy of an empty sequence");
  return {predictive_entropy(sample).value / static_cast<double>(t), Estimator::kNormalizedEntropy, 1};
}

bool default_equivalence(const gateway::GenerationSample& a, const gateway::GenerationSample& b,
                         std::span<const std::string> templates) {
  auto keyset = [&](const gateway::GenerationSample& s) {
    std::set<std::string> out;
    try {
      for (auto& w : embed::extract_keywords(s.text, templates).words) out.insert(std::move(w));
    } catch (const embed::EmptyKeywordsError&) {
    }
    return out;
  };
  return keyset(a) == keyset(b);
}

EquivalenceFn keyword_equivalence(std::vector<std::string> templates) {
  return [templates = std::move(templates)](const gateway::GenerationSample& a,
                                            const gateway::GenerationSample& b) {
    return default_equivalence(a, b, templates);
  };
}

std::vector<std::size_t> cluster(const SampleSet& set, const EquivalenceFn& equivalence) {
  std::vector<std::size_t> cls(set.h());
  std::vector<std::size_t> reps;
  for (std::size_t i = 0; i < set.h(); ++i) {
    std::size_t c = 0;
    while (c < reps.size() && !equivalence(set.samples[reps[c]], set.samples[i])) ++c;
    if (c == reps.size()) reps.push_back(i);
    cls[i] = c;
  }
  return cls;
}

std::vector<double> semantic_class_probs(const SampleSet& set, const EquivalenceFn& equivalence) {
  if (set.h() == 0) throw PreconditionError("semantic entropy of an empty sample set");
  // log sequence probability of the chosen tokens
  std::vector<double> logp(set.h(), 0.0);
  for (std::size_t i = 0; i < set.h(); ++i) {
    for (const auto& pos : require_probs(set.samples[i])) {
      auto it = std::find_if(pos.top.begin(), pos.top.end(), [&](const auto& a) { return a.token == pos.token; });
      if (it == pos.top.end())
        throw PreconditionError("chosen token '" + pos.token + "' missing from its top-K list");
      logp[i] += std::log(it->prob);
    }
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  double z = 0.0;
  for (double lp : logp) z += std::exp(lp - mx);

  const auto cls = cluster(set, equivalence);
  const auto n_cls = *std::max_element(cls.begin(), cls.end()) + 1;
  std::vector<double> probs(n_cls, 0.0);
  for (std::size_t i = 0; i < set.h(); ++i) probs[cls[i]] += std::exp(logp[i] - mx) / z;
  return probs;
}

UncertaintyScore semantic_entropy(std::span<const double> class_probs, std::size_t h) {
  if (class_probs.empty()) throw PreconditionError("semantic entropy needs at least one class");
  double total = 0.0, mass = 0.0;
  for (double p : class_probs) {
    if (!(p > 0.0)) throw PreconditionError("class probability must be > 0");
    mass += p;
    total += std::log(p);
  }
  if (mass > 1.0 + 1e-6) throw PreconditionError("class probabilities sum above 1");
  const double se = -total / static_cast<double>(class_probs.size());
  return {std::max(se, 0.0), Estimator::kSemanticEntropy, h};
}

UncertaintyScore semantic_entropy(const SampleSet& set, const EquivalenceFn& equivalence) {
  const auto probs = semantic_class_probs(set, equivalence);
  return semantic_entropy(probs, set.h());
}

UncertaintyScore lexical_similarity(const SampleSet& set) {
  set.validate();
  const auto flat = flatten(set);
  const double mean_sim = kernels::pair_cosine_sum(flat.points) / kernels::pair_count(set.h());
  return {std::max(1.0 - mean_sim, 0.0), Estimator::kLexicalSimilarity, set.h()};
}

UncertaintyScore score(Estimator estimator, const SampleSet& set) {
  switch (estimator) {
    case Estimator::kContextSampling: return context_sampling_uncertainty(set);
    case Estimator::kLexicalSimilarity: return lexical_similarity(set);
    case Estimator::kSemanticEntropy: return semantic_entropy(set, keyword_equivalence(set.templates));
    case Estimator::kPredictiveEntropy:
    case Estimator::kNormalizedEntropy: {
      set.validate();
      double sum = 0.0;
      for (const auto& s : set.samples)
        sum += estimator == Estimator::kPredictiveEntropy ? predictive_entropy(s).value
                                                          : normalized_entropy(s).value;
      return {sum / static_cast<double>(set.h()), estimator, set.h()};
    }
  }
  throw PreconditionError("unhandled estimator");
}

}  // namespace cmdtriage::uq
