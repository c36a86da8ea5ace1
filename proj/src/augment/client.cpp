#include <atomic>
#include <cstdlib>
#include <regex>
#include <thread>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "xdd/augment.hpp"
#include "xdd/error.hpp"

namespace xdd::augment {

using nlohmann::json;

void LlmConfig::validate() const {
  if (endpoint.empty()) throw ConfigError("llm.endpoint is required for online augmentation");
  if (model.empty()) throw ConfigError("llm.model is required for online augmentation");
  if (!(temperature >= 0.0)) throw ConfigError("llm.temperature must be >= 0");
  if (max_tokens <= 0) throw ConfigError("llm.max_tokens must be positive");
  if (timeout.count() <= 0) throw ConfigError("llm.timeout_ms must be positive");
  if (retry.max_attempts < 1) throw ConfigError("llm.max_attempts must be at least 1");
  if (retry.backoff.count() < 0) throw ConfigError("llm.backoff_ms must be >= 0");
  if (token_env.empty()) throw ConfigError("llm.token_env must name an environment variable");
  if (concurrency < 1) throw ConfigError("llm.concurrency must be at least 1");
}

json LlmConfig::to_json() const {
  return {{"endpoint", endpoint},
          {"model", model},
          {"temperature", temperature},
          {"max_tokens", max_tokens},
          {"timeout_ms", timeout.count()},
          {"max_attempts", retry.max_attempts},
          {"backoff_ms", retry.backoff.count()},
          {"token_env", token_env},
          {"concurrency", concurrency}};
}

LlmConfig LlmConfig::from_json(const json& j) {
  LlmConfig c;
  try {
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
    c.retry.max_attempts = j.value("max_attempts", c.retry.max_attempts);
    c.retry.backoff = std::chrono::milliseconds(j.value("backoff_ms", c.retry.backoff.count()));
    c.token_env = j.value("token_env", c.token_env);
    c.concurrency = j.value("concurrency", c.concurrency);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("llm config: ") + e.what());
  }
  return c;
}

json request_body(const PromptSpec& spec, const LlmConfig& cfg) {
  return {{"model", cfg.model},
          {"messages", json::array({{{"role", "user"}, {"content", spec.rendered_text}}})},
          {"temperature", cfg.temperature},
          {"max_tokens", cfg.max_tokens}};
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw ConfigError("llm.endpoint '" + url + "' is not an http(s) URL");
  }
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

bool retryable(int status) { return status == 429 || status >= 500; }

std::string extract_content(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception&) {
    throw ProviderError("completion response is not valid JSON");
  }
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw ProviderError("completion response has no choices");
  }
  const auto& first = doc["choices"][0];
  if (!first.contains("message") || !first["message"].contains("content") ||
      !first["message"]["content"].is_string()) {
    throw ProviderError("completion response lacks choices[0].message.content");
  }
  auto content = first["message"]["content"].get<std::string>();
  if (content.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ProviderError("provider returned an empty completion");
  }
  return content;
}

}  // namespace

std::string generate_commentary(const PromptSpec& spec, const LlmConfig& cfg) {
  cfg.validate();
  const char* token = std::getenv(cfg.token_env.c_str());
  if (!token || !*token) {
    throw ConfigError("environment variable " + cfg.token_env + " holding the API token is not set");
  }
  const auto ep = split_endpoint(cfg.endpoint);
  httplib::Client client(ep.origin);
  const auto secs = [](std::chrono::milliseconds ms) {
    return std::pair<time_t, time_t>(ms.count() / 1000, (ms.count() % 1000) * 1000);
  };
  const auto [s, us] = secs(cfg.timeout);
  client.set_connection_timeout(s, us);
  client.set_read_timeout(s, us);
  client.set_write_timeout(s, us);

  const httplib::Headers headers{{"Authorization", std::string("Bearer ") + token}};
  const auto body = request_body(spec, cfg).dump();

  std::string last_error;
  auto backoff = cfg.retry.backoff;
  for (int attempt = 1; attempt <= cfg.retry.max_attempts; ++attempt) {
    auto res = client.Post(ep.path, headers, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      return extract_content(res->body);
    }
    if (res) {
      last_error = "HTTP " + std::to_string(res->status);
      if (!retryable(res->status)) {
        throw TransportError("chat completion failed with " + last_error + " after " +
                                 std::to_string(attempt) + " attempt(s)",
                             attempt);
      }
    } else {
      last_error = httplib::to_string(res.error());
    }
    spdlog::debug("chat completion attempt {}/{} failed: {}", attempt, cfg.retry.max_attempts,
                  last_error);
    if (attempt < cfg.retry.max_attempts && backoff.count() > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw TransportError("chat completion failed after " + std::to_string(cfg.retry.max_attempts) +
                           " attempt(s): " + last_error,
                       cfg.retry.max_attempts);
}

std::vector<CommentaryResult> generate_batch(std::span<const PromptSpec> specs,
                                             const LlmConfig& cfg) {
  cfg.validate();
  std::vector<CommentaryResult> results(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        results[i].commentary = generate_commentary(specs[i], cfg);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };
  const std::size_t n = std::min(cfg.concurrency, specs.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  return results;
}

}  // namespace xdd::augment
