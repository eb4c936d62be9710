#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "cmdtriage/error.hpp"
#include "cmdtriage/gateway.hpp"

namespace cmdtriage::gateway {

using nlohmann::json;

json build_request_body(const PromptRequest& request, const HttpBackendConfig& config) {
  json body{{"model", config.model_name},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  if (config.api_style == ApiStyle::kChat) {
    body["messages"] = json::array({{{"role", "user"}, {"content", request.text}}});
    if (request.want_token_probs) {
      body["logprobs"] = true;
      body["top_logprobs"] = config.top_k;
    }
  } else {
    body["prompt"] = request.text;
    if (request.want_token_probs) body["logprobs"] = config.top_k;
  }
  if (!request.stop_markers.empty()) body["stop"] = request.stop_markers;
  return body;
}

namespace {

TokenProbs chat_logprobs(const json& lp) {
  TokenProbs out;
  for (const auto& pos : lp.at("content")) {
    TokenPosition p;
    p.token = pos.at("token").get<std::string>();
    const auto top = pos.value("top_logprobs", json::array());
    if (top.empty()) {
      p.top.push_back({p.token, std::exp(pos.at("logprob").get<double>())});
    } else {
      for (const auto& alt : top)
        p.top.push_back({alt.at("token").get<std::string>(), std::exp(alt.at("logprob").get<double>())});
    }
    out.push_back(std::move(p));
  }
  return out;
}

TokenProbs completion_logprobs(const json& lp) {
  TokenProbs out;
  const auto& tokens = lp.at("tokens");
  const auto& top = lp.at("top_logprobs");
  if (top.size() != tokens.size()) throw ParseError("logprobs: tokens/top_logprobs length mismatch");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    TokenPosition p;
    p.token = tokens[i].get<std::string>();
    for (const auto& [tok, logp] : top[i].items()) p.top.push_back({tok, std::exp(logp.get<double>())});
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

GenerationSample parse_response_body(const json& body, ApiStyle style, bool want_token_probs) {
  try {
    const auto& choices = body.at("choices");
    if (!choices.is_array() || choices.empty()) throw ParseError("response has no choices");
    const auto& first = choices.at(0);
    GenerationSample s;
    if (style == ApiStyle::kChat)
      s.text = first.at("message").at("content").get<std::string>();
    else
      s.text = first.at("text").get<std::string>();
    if (want_token_probs) {
      if (!first.contains("logprobs") || first.at("logprobs").is_null())
        throw CapabilityError("server returned no logprobs");
      s.token_probs = style == ApiStyle::kChat ? chat_logprobs(first.at("logprobs"))
                                               : completion_logprobs(first.at("logprobs"));
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed completion response: ") + e.what());
  }
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const auto& url = config_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw PreconditionError("base_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + (config_.api_style == ApiStyle::kChat ? "/chat/completions" : "/completions");

  if (!config_.api_key_env_var.empty()) {
    const char* key = std::getenv(config_.api_key_env_var.c_str());
    if (!key || !*key)
      throw PreconditionError("environment variable " + config_.api_key_env_var + " is not set");
    api_key_ = key;
  }
}

GenerationSample HttpBackend::generate(const PromptRequest& request) const {
  const auto body = build_request_body(request, config_).dump();
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      const auto backoff = config_.initial_backoff_ms * (1 << (attempt - 2));
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    }
    httplib::Client client(origin_);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body, attempt);

    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("completion body is not JSON: ") + e.what());
    }
    auto sample = parse_response_body(parsed, config_.api_style, request.want_token_probs);
    sample.backend_id = id();
    sample.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return sample;
  }
  throw TransportError(last_error, config_.max_attempts);
}

}  // namespace cmdtriage::gateway
