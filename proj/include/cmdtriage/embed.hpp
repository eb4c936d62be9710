#pragma once

// Keyword extraction from skill-call generations and word-vector embedding.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmdtriage/error.hpp"

namespace cmdtriage::embed {

enum class OovPolicy { kZero, kHash };

struct Vector {
  std::vector<double> components;

  std::size_t dimension() const { return components.size(); }
  bool operator==(const Vector&) const = default;
};

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dimension, OovPolicy policy = OovPolicy::kZero);

  /// Inserts or replaces. Returns false when the word was already present.
  bool insert(std::string word, std::vector<double> vec);
  const std::vector<double>* find(const std::string& word) const;

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return entries_.size(); }
  OovPolicy oov_policy() const { return policy_; }
  void set_oov_policy(OovPolicy p) { policy_ = p; }
  double max_norm() const { return max_norm_; }
  /// Words in insertion order (first insertion position kept on replace).
  const std::vector<std::string>& words() const { return order_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  std::size_t dimension_;
  OovPolicy policy_;
  std::unordered_map<std::string, std::vector<double>> entries_;
  std::vector<std::string> order_;
  std::vector<std::string> warnings_;
  double max_norm_ = 0.0;
};

/// Reads the textual format: header "vocab_size dimension", then
/// "word v1 ... vd" per line.
EmbeddingTable load_table(const std::filesystem::path& path, OovPolicy policy = OovPolicy::kZero);
/// Writes the same format with shortest round-trip number formatting.
void save_table(const EmbeddingTable& table, const std::filesystem::path& path);

struct KeywordSet {
  std::vector<std::string> words;
};

/// Thrown when nothing embeddable remains after template subtraction.
class EmptyKeywordsError : public Error {
 public:
  using Error::Error;
};

/// The fixed 50-word function-word list.
const std::vector<std::string>& stopwords();
bool is_stopword(std::string_view word);

std::string first_line(std::string_view text);

/// Lowercased alphanumeric tokens with stopwords removed.
std::vector<std::string> content_words(std::string_view text);

struct SkillCall {
  std::string name;
  std::vector<std::string> args;
  bool operator==(const SkillCall&) const = default;
};

/// Every occurrence of any template on the line, in order of position.
/// A template is a signature such as "robot.pick_and_place(<obj>, <place>)".
std::vector<SkillCall> parse_skill_calls(std::string_view line,
                                         std::span<const std::string> templates);
std::string render_skill_call(const SkillCall& call);

/// Slot fillers of the first generated line, lowercased, stopwords removed.
/// Falls back to all content words when no template matches.
KeywordSet extract_keywords(std::string_view generation, std::span<const std::string> templates);
KeywordSet extract_keywords(std::string_view generation, const std::string& skill_template);

/// Unweighted mean of keyword vectors. `all_oov` reports the zero-policy
/// degenerate case (result is the zero vector).
Vector embed(const KeywordSet& keywords, const EmbeddingTable& table, bool* all_oov = nullptr);

double distance(const Vector& a, const Vector& b);
/// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(const Vector& a, const Vector& b);

}  // namespace cmdtriage::embed
