#pragma once

// Generation interface over a scriptable mock backend and an HTTP
// chat-completion backend.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

namespace cmdtriage::gateway {

struct TokenAlternative {
  std::string token;
  double prob = 0.0;
};

/// One emitted position: the chosen token and the returned top-K alternatives.
struct TokenPosition {
  std::string token;
  std::vector<TokenAlternative> top;
};

using TokenProbs = std::vector<TokenPosition>;

struct PromptRequest {
  std::string text;
  double temperature = 0.0;
  int max_tokens = 128;
  bool want_token_probs = false;
  std::vector<std::string> stop_markers;
  // Position of this request inside a generate_h batch; set by generate_h.
  std::optional<std::size_t> variant_index;

  void validate() const;
};

struct GenerationSample {
  std::string text;
  std::optional<TokenProbs> token_probs;
  std::string backend_id;
  double latency_ms = 0.0;
};

/// Throws ParseError unless every position holds probabilities in (0,1]
/// summing to at most 1 + 1e-6.
void validate_token_probs(const TokenProbs& probs);

/// Shareable, read-only generation handle. Implementations are thread-safe.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual bool supports_token_probs() const = 0;
  virtual GenerationSample generate(const PromptRequest& request) const = 0;
};

/// Validates the request and the capability, then delegates to the backend.
GenerationSample generate(const PromptRequest& request, const Backend& backend);

/// Issues all variants concurrently and returns samples in variant order.
/// Requires at least two variants. A failure is rethrown as BatchError
/// naming the lowest failing index.
std::vector<GenerationSample> generate_h(std::vector<PromptRequest> variants,
                                         const Backend& backend);

// ---------------------------------------------------------------------------
// Mock backend

struct ScriptedRule {
  enum class Mode { kCycle, kSeeded };

  // All substrings must occur in the prompt. Empty when `pattern` is used.
  std::vector<std::string> match;
  // ECMAScript regex searched over the prompt; capture groups may be
  // referenced from responses as $1, $2, ...
  std::optional<std::string> pattern;
  std::vector<std::string> responses;
  // Parallel to `responses` when present; entries may be empty.
  std::vector<std::optional<TokenProbs>> canned_probs;
  Mode mode = Mode::kCycle;
  int delay_ms = 0;
};

ScriptedRule rule_from_json(const nlohmann::json& j);
std::vector<ScriptedRule> load_rules(const std::filesystem::path& path);

class MockBackend final : public Backend {
 public:
  explicit MockBackend(std::vector<ScriptedRule> rules, std::uint64_t seed = 0);

  std::string id() const override { return "mock"; }
  bool supports_token_probs() const override { return supports_probs_; }
  GenerationSample generate(const PromptRequest& request) const override;

  std::size_t rule_count() const { return rules_.size(); }

 private:
  struct CompiledRule {
    ScriptedRule rule;
    std::optional<std::regex> regex;
  };

  std::vector<CompiledRule> rules_;
  std::uint64_t seed_;
  bool supports_probs_ = false;
  std::unique_ptr<std::atomic<std::size_t>[]> counters_;
};

// ---------------------------------------------------------------------------
// HTTP backend

enum class ApiStyle { kChat, kCompletions };

struct HttpBackendConfig {
  std::string base_url;         // e.g. https://api.openai.com/v1
  std::string api_key_env_var;  // empty: no Authorization header
  std::string model_name;
  int timeout_ms = 30000;
  ApiStyle api_style = ApiStyle::kChat;
  bool supports_logprobs = false;
  int top_k = 5;
  int max_attempts = 3;
  int initial_backoff_ms = 250;
};

nlohmann::json build_request_body(const PromptRequest& request, const HttpBackendConfig& config);

/// Extracts the first choice (text and, when asked, token probabilities).
GenerationSample parse_response_body(const nlohmann::json& body, ApiStyle style,
                                     bool want_token_probs);

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string id() const override { return "http:" + config_.model_name; }
  bool supports_token_probs() const override { return config_.supports_logprobs; }
  GenerationSample generate(const PromptRequest& request) const override;

 private:
  HttpBackendConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // endpoint path including any base prefix
  std::string api_key_;
};

struct BackendConfig {
  std::string kind = "mock";  // "mock" | "http"
  std::filesystem::path rules_path;
  std::uint64_t mock_seed = 0;
  HttpBackendConfig http;
};

BackendConfig backend_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir);
nlohmann::json to_json(const BackendConfig& config);
std::shared_ptr<const Backend> make_backend(const BackendConfig& config);

}  // namespace cmdtriage::gateway
