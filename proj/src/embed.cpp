#include "cmdtriage/embed.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>
#include <unordered_set>

namespace cmdtriage::embed {

EmbeddingTable::EmbeddingTable(std::size_t dimension, OovPolicy policy)
    : dimension_(dimension), policy_(policy) {
  if (dimension == 0) throw PreconditionError("embedding dimension must be >= 1");
}

bool EmbeddingTable::insert(std::string word, std::vector<double> vec) {
  if (vec.size() != dimension_)
    throw PreconditionError("vector for '" + word + "' has " + std::to_string(vec.size()) +
                            " components, expected " + std::to_string(dimension_));
  double sq = 0.0;
  for (double v : vec) {
    if (!std::isfinite(v)) throw PreconditionError("non-finite component for '" + word + "'");
    sq += v * v;
  }
  max_norm_ = std::max(max_norm_, std::sqrt(sq));
  auto [it, fresh] = entries_.insert_or_assign(word, std::move(vec));
  if (fresh) order_.push_back(std::move(word));
  return fresh;
}

const std::vector<double>* EmbeddingTable::find(const std::string& word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

EmbeddingTable load_table(const std::filesystem::path& path, OovPolicy policy) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding table " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("embedding table is empty: missing header", 1);
  const auto header = split_ws(line);
  std::size_t vocab = 0, dim = 0;
  if (header.size() != 2 || !parse_number(header[0], vocab) || !parse_number(header[1], dim) || dim == 0)
    throw ParseError("malformed header, expected \"vocab_size dimension\"", 1);

  EmbeddingTable table(dim, policy);
  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != dim + 1)
      throw ParseError("row has " + std::to_string(fields.size() - 1) + " values, expected " +
                           std::to_string(dim),
                       lineno);
    std::vector<double> vec(dim);
    for (std::size_t d = 0; d < dim; ++d)
      if (!parse_number(fields[d + 1], vec[d]) || !std::isfinite(vec[d]))
        throw ParseError("bad number '" + std::string(fields[d + 1]) + "'", lineno);
    ++rows;
    if (rows > vocab)
      throw ParseError("more rows than the declared vocab_size " + std::to_string(vocab), lineno);
    std::string word(fields[0]);
    if (!table.insert(word, std::move(vec)))
      table.add_warning("duplicate word '" + word + "' at line " + std::to_string(lineno) +
                        ", last occurrence wins");
  }
  if (rows < vocab)
    throw ParseError("header declares " + std::to_string(vocab) + " words but file has " +
                     std::to_string(rows) + " (short by " + std::to_string(vocab - rows) + ")");
  return table;
}

void save_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write embedding table " + path.string());
  out << table.size() << ' ' << table.dimension() << '\n';
  char buf[64];
  for (const auto& w : table.words()) {
    out << w;
    for (double v : *table.find(w)) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ' ' << std::string_view(buf, p - buf);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& stopwords() {
  static const std::vector<std::string> words = {
      "a",    "an",    "the",  "i",    "you",  "he",    "she",    "it",    "we",   "they",
      "me",   "him",   "her",  "them", "my",   "your",  "his",    "its",   "our",  "their",
      "is",   "am",    "are",  "was",  "were", "be",    "been",   "will",  "would", "can",
      "could", "should", "to", "of",   "in",   "on",    "at",     "for",   "with", "from",
      "by",   "and",   "or",   "but",  "if",   "then",  "that",   "this",  "these", "those"};
  return words;
}

bool is_stopword(std::string_view word) {
  static const std::unordered_set<std::string_view> set(stopwords().begin(), stopwords().end());
  return set.contains(word);
}

std::string first_line(std::string_view text) {
  const auto b = text.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  text.remove_prefix(b);
  auto line = text.substr(0, text.find('\n'));
  while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
    line.remove_suffix(1);
  return std::string(line);
}

std::vector<std::string> content_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !is_stopword(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || ch == '\'')
      cur.push_back(static_cast<char>(std::tolower(c)));
    else
      flush();
  }
  flush();
  return out;
}

namespace {

std::regex template_regex(const std::string& tmpl) {
  static const std::string specials = R"(\^$.|?*+()[]{})";
  std::string re;
  bool in_ws = false;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    const char c = tmpl[i];
    if (c == '<') {
      const auto close = tmpl.find('>', i);
      if (close != std::string::npos) {
        re += R"(([^,()\n]*))";
        i = close;
        in_ws = false;
        continue;
      }
    }
    if (c == ' ' || c == '\t') {
      if (!in_ws) re += R"(\s*)";
      in_ws = true;
      continue;
    }
    in_ws = false;
    if (specials.find(c) != std::string::npos) re += '\\';
    re += c;
  }
  return std::regex(re, std::regex::ECMAScript);
}

std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

struct Located {
  std::size_t pos;
  SkillCall call;
};

}  // namespace

std::vector<SkillCall> parse_skill_calls(std::string_view line_view,
                                         std::span<const std::string> templates) {
  const std::string line(line_view);
  std::vector<Located> found;
  for (const auto& tmpl : templates) {
    const auto name = trim_copy(tmpl.substr(0, tmpl.find('(')));
    const auto re = template_regex(tmpl);
    for (auto it = std::sregex_iterator(line.begin(), line.end(), re); it != std::sregex_iterator(); ++it) {
      SkillCall call{name, {}};
      for (std::size_t g = 1; g < it->size(); ++g) call.args.push_back(trim_copy((*it)[g].str()));
      found.push_back({static_cast<std::size_t>(it->position()), std::move(call)});
    }
  }
  std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.pos < b.pos; });
  std::vector<SkillCall> out;
  for (auto& f : found) out.push_back(std::move(f.call));
  return out;
}

std::string render_skill_call(const SkillCall& call) {
  std::string s = call.name + "(";
  for (std::size_t i = 0; i < call.args.size(); ++i) {
    if (i) s += ", ";
    s += call.args[i];
  }
  return s + ")";
}

KeywordSet extract_keywords(std::string_view generation, std::span<const std::string> templates) {
  const auto line = first_line(generation);
  const auto calls = parse_skill_calls(line, templates);
  KeywordSet out;
  if (calls.empty()) {
    out.words = content_words(line);
  } else {
    for (const auto& c : calls)
      for (const auto& arg : c.args)
        for (auto& w : content_words(arg)) out.words.push_back(std::move(w));
  }
  if (out.words.empty())
    throw EmptyKeywordsError("no keywords left in generation '" + line + "'");
  return out;
}

KeywordSet extract_keywords(std::string_view generation, const std::string& skill_template) {
  return extract_keywords(generation, std::span<const std::string>(&skill_template, 1));
}

namespace {

std::vector<double> hash_vector(const std::string& word, std::size_t dim) {
  std::vector<double> v(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    std::uint64_t h = 14695981039346656037ULL ^ (d * 0x9e3779b97f4a7c15ULL);
    for (unsigned char c : word) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    v[d] = static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53) * 2.0 - 1.0;
  }
  return v;
}

}  // namespace

Vector embed(const KeywordSet& keywords, const EmbeddingTable& table, bool* all_oov) {
  const auto dim = table.dimension();
  Vector out{std::vector<double>(dim, 0.0)};
  if (all_oov) *all_oov = false;
  if (keywords.words.empty()) {
    if (all_oov) *all_oov = true;
    return out;
  }
  std::size_t hits = 0;
  for (const auto& w : keywords.words) {
    if (const auto* v = table.find(w)) {
      ++hits;
      for (std::size_t d = 0; d < dim; ++d) out.components[d] += (*v)[d];
    } else if (table.oov_policy() == OovPolicy::kHash) {
      const auto hv = hash_vector(w, dim);
      for (std::size_t d = 0; d < dim; ++d) out.components[d] += hv[d];
    }
  }
  const double n = static_cast<double>(keywords.words.size());
  for (auto& c : out.components) c /= n;
  if (all_oov && hits == 0 && table.oov_policy() == OovPolicy::kZero) *all_oov = true;
  return out;
}

double distance(const Vector& a, const Vector& b) {
  if (a.dimension() != b.dimension())
    throw PreconditionError("dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                            std::to_string(b.dimension()));
  double sq = 0.0;
  for (std::size_t d = 0; d < a.dimension(); ++d) {
    const double diff = a.components[d] - b.components[d];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.dimension() != b.dimension())
    throw PreconditionError("dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                            std::to_string(b.dimension()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t d = 0; d < a.dimension(); ++d) {
    dot += a.components[d] * b.components[d];
    na += a.components[d] * a.components[d];
    nb += b.components[d] * b.components[d];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace cmdtriage::embed
