#include "cmdtriage/gateway.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <thread>

#include "cmdtriage/error.hpp"

namespace cmdtriage::gateway {

using nlohmann::json;

void PromptRequest::validate() const {
  if (text.empty()) throw PreconditionError("prompt text is empty");
  if (max_tokens < 1) throw PreconditionError("max_tokens must be >= 1");
  if (!std::isfinite(temperature) || temperature < 0.0)
    throw PreconditionError("temperature must be finite and >= 0");
}

void validate_token_probs(const TokenProbs& probs) {
  for (std::size_t t = 0; t < probs.size(); ++t) {
    double sum = 0.0;
    for (const auto& alt : probs[t].top) {
      if (!(alt.prob > 0.0 && alt.prob <= 1.0))
        throw ParseError("token probability out of (0,1] at position " + std::to_string(t));
      sum += alt.prob;
    }
    if (probs[t].top.empty())
      throw ParseError("no token alternatives at position " + std::to_string(t));
    if (sum > 1.0 + 1e-6)
      throw ParseError("token probabilities sum above 1 at position " + std::to_string(t));
  }
}

GenerationSample generate(const PromptRequest& request, const Backend& backend) {
  request.validate();
  if (request.want_token_probs && !backend.supports_token_probs())
    throw CapabilityError("backend '" + backend.id() + "' does not provide token probabilities");
  auto sample = backend.generate(request);
  if (sample.token_probs) validate_token_probs(*sample.token_probs);
  return sample;
}

std::vector<GenerationSample> generate_h(std::vector<PromptRequest> variants,
                                         const Backend& backend) {
  if (variants.size() < 2) throw PreconditionError("generate_h needs at least 2 variants");
  for (std::size_t i = 0; i < variants.size(); ++i) {
    variants[i].validate();
    variants[i].variant_index = i;
  }

  std::vector<std::future<GenerationSample>> pending;
  pending.reserve(variants.size());
  for (const auto& v : variants)
    pending.push_back(std::async(std::launch::async, [&backend, &v] { return generate(v, backend); }));

  std::vector<GenerationSample> out;
  out.reserve(variants.size());
  std::optional<BatchError> failure;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    try {
      out.push_back(pending[i].get());
    } catch (const std::exception& e) {
      if (!failure) failure.emplace(i, e.what());
    }
  }
  if (failure) throw *failure;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

TokenProbs token_probs_from_json(const json& j) {
  TokenProbs out;
  for (const auto& pos : j) {
    TokenPosition p;
    p.token = pos.at("token").get<std::string>();
    for (const auto& alt : pos.at("top")) {
      if (alt.is_array())
        p.top.push_back({alt.at(0).get<std::string>(), alt.at(1).get<double>()});
      else
        p.top.push_back({alt.at("token").get<std::string>(), alt.at("prob").get<double>()});
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

ScriptedRule rule_from_json(const json& j) {
  ScriptedRule r;
  if (j.contains("match")) {
    const auto& m = j.at("match");
    if (m.is_string())
      r.match.push_back(m.get<std::string>());
    else
      r.match = m.get<std::vector<std::string>>();
  }
  if (j.contains("pattern")) r.pattern = j.at("pattern").get<std::string>();
  if (r.match.empty() && !r.pattern) throw ParseError("rule needs 'match' or 'pattern'");
  if (!j.contains("responses")) throw ParseError("rule has no 'responses'");
  r.responses = j.at("responses").get<std::vector<std::string>>();
  if (r.responses.empty()) throw ParseError("rule has no responses");
  if (j.contains("canned_probs")) {
    const auto& cp = j.at("canned_probs");
    if (cp.size() != r.responses.size())
      throw ParseError("canned_probs must parallel responses");
    for (const auto& e : cp) {
      if (e.is_null())
        r.canned_probs.emplace_back();
      else
        r.canned_probs.emplace_back(token_probs_from_json(e));
    }
  }
  const auto mode = j.value("mode", std::string("cycle"));
  if (mode == "cycle")
    r.mode = ScriptedRule::Mode::kCycle;
  else if (mode == "seeded")
    r.mode = ScriptedRule::Mode::kSeeded;
  else
    throw ParseError("unknown rule mode '" + mode + "'");
  r.delay_ms = j.value("delay_ms", 0);
  return r;
}

std::vector<ScriptedRule> load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mock rules file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("mock rules " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError("mock rules file must hold a JSON list");
  std::vector<ScriptedRule> rules;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    try {
      rules.push_back(rule_from_json(doc[i]));
    } catch (const json::exception& e) {
      throw ParseError("mock rule " + std::to_string(i) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("mock rule " + std::to_string(i) + ": " + e.what());
    }
  }
  return rules;
}

MockBackend::MockBackend(std::vector<ScriptedRule> rules, std::uint64_t seed)
    : seed_(seed), counters_(std::make_unique<std::atomic<std::size_t>[]>(rules.size())) {
  rules_.reserve(rules.size());
  for (auto& r : rules) {
    if (r.responses.empty()) throw PreconditionError("scripted rule has no responses");
    std::optional<std::regex> re;
    if (r.pattern) re.emplace(*r.pattern, std::regex::ECMAScript);
    for (const auto& cp : r.canned_probs)
      if (cp) supports_probs_ = true;
    rules_.push_back({std::move(r), std::move(re)});
  }
  for (std::size_t i = 0; i < rules_.size(); ++i) counters_[i].store(0);
}

GenerationSample MockBackend::generate(const PromptRequest& request) const {
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t ri = 0; ri < rules_.size(); ++ri) {
    const auto& [rule, regex] = rules_[ri];
    std::smatch m;
    bool hit = true;
    for (const auto& needle : rule.match)
      if (request.text.find(needle) == std::string::npos) hit = false;
    if (hit && regex) hit = std::regex_search(request.text, m, *regex);
    if (!hit) continue;

    const std::size_t n = rule.responses.size();
    std::size_t idx = 0;
    if (rule.mode == ScriptedRule::Mode::kSeeded) {
      auto h = fnv1a(14695981039346656037ULL ^ seed_, request.text);
      h = fnv1a(h, std::to_string(request.variant_index.value_or(0)));
      idx = h % n;
    } else if (request.variant_index) {
      idx = *request.variant_index % n;
    } else {
      idx = counters_[ri].fetch_add(1) % n;
    }

    if (rule.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(rule.delay_ms));

    GenerationSample s;
    s.text = regex ? m.format(rule.responses[idx]) : rule.responses[idx];
    s.backend_id = id();
    if (request.want_token_probs) {
      if (rule.canned_probs.empty() || !rule.canned_probs[idx])
        throw CapabilityError("mock rule " + std::to_string(ri) +
                              " has no canned token probabilities for response " +
                              std::to_string(idx));
      s.token_probs = rule.canned_probs[idx];
    }
    s.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return s;
  }
  const auto head = request.text.size() > 160 ? "..." + request.text.substr(request.text.size() - 160)
                                              : request.text;
  throw RuleMissError("no mock rule matches prompt: " + head);
}

// ---------------------------------------------------------------------------

BackendConfig backend_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  BackendConfig c;
  c.kind = j.value("kind", std::string("mock"));
  if (c.kind == "mock") {
    const auto rules = j.at("rules_path").get<std::string>();
    c.rules_path = std::filesystem::path(rules).is_absolute() ? std::filesystem::path(rules) : base_dir / rules;
    c.mock_seed = j.value("seed", std::uint64_t{0});
  } else if (c.kind == "http") {
    auto& h = c.http;
    h.base_url = j.at("base_url").get<std::string>();
    h.api_key_env_var = j.value("api_key_env_var", std::string());
    h.model_name = j.at("model_name").get<std::string>();
    h.timeout_ms = j.value("timeout_ms", 30000);
    const auto style = j.value("api_style", std::string("chat"));
    if (style == "chat")
      h.api_style = ApiStyle::kChat;
    else if (style == "completions")
      h.api_style = ApiStyle::kCompletions;
    else
      throw ParseError("unknown api_style '" + style + "'");
    h.supports_logprobs = j.value("supports_logprobs", false);
    h.top_k = j.value("top_k", 5);
    h.max_attempts = j.value("max_attempts", 3);
    h.initial_backoff_ms = j.value("initial_backoff_ms", 250);
    if (h.timeout_ms <= 0 || h.top_k < 1 || h.max_attempts < 1 || h.initial_backoff_ms < 0)
      throw ParseError("http backend: numeric field out of range");
  } else {
    throw ParseError("unknown backend kind '" + c.kind + "'");
  }
  return c;
}

json to_json(const BackendConfig& c) {
  if (c.kind == "mock") return {{"kind", "mock"}, {"rules_path", c.rules_path.string()}, {"seed", c.mock_seed}};
  const auto& h = c.http;
  return {{"kind", "http"},
          {"base_url", h.base_url},
          {"api_key_env_var", h.api_key_env_var},
          {"model_name", h.model_name},
          {"timeout_ms", h.timeout_ms},
          {"api_style", h.api_style == ApiStyle::kChat ? "chat" : "completions"},
          {"supports_logprobs", h.supports_logprobs},
          {"top_k", h.top_k}};
}

std::shared_ptr<const Backend> make_backend(const BackendConfig& config) {
  if (config.kind == "mock")
    return std::make_shared<MockBackend>(load_rules(config.rules_path), config.mock_seed);
  if (config.kind == "http") return std::make_shared<HttpBackend>(config.http);
  throw PreconditionError("unknown backend kind '" + config.kind + "'");
}

}  // namespace cmdtriage::gateway
