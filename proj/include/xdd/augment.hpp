#pragma once

// Natural-language commentary for explanations: prompt rendering from
// editable templates, a class-indexed one-shot example bank, a
// chat-completion client and a deterministic offline renderer.

#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xdd/textpipe.hpp"
#include "xdd/xdd_head.hpp"

namespace xdd::augment {

enum class PromptVariant { base, advanced };
std::string to_string(PromptVariant v);
PromptVariant parse_prompt_variant(const std::string& name);

struct PromptInputs {
  std::string post;
  text::ClassLabel label = text::ClassLabel::not_depressed;
  std::vector<heads::ExplanationPair> explanation;
};

struct PromptSpec {
  PromptVariant variant = PromptVariant::base;
  std::string rendered_text;
  PromptInputs inputs;
  std::optional<std::string> example_id;  // advanced only
};

struct ExampleBankEntry {
  std::string id;
  text::ClassLabel label = text::ClassLabel::not_depressed;
  std::string post;
  std::vector<heads::ExplanationPair> explanation;
  std::string commentary;
  std::string provenance;
};

class ExampleBank {
 public:
  ExampleBank() = default;
  explicit ExampleBank(std::vector<ExampleBankEntry> entries);

  /// The bank shipped with the library (one worked example per class).
  static ExampleBank bundled();
  /// JSON array of {id, class, post, explanation: [{word, weight}], commentary}.
  static ExampleBank parse(std::string_view json_text, const std::string& source = "bank");
  static ExampleBank from_file(const std::filesystem::path& path);

  const std::vector<ExampleBankEntry>& entries() const { return entries_; }
  /// First entry of `label` by id; nullptr when the class has none.
  const ExampleBankEntry* select(text::ClassLabel label) const;

 private:
  std::vector<ExampleBankEntry> entries_;
};

/// Templates use {{post}}, {{class}}, {{explanation}} and (advanced only)
/// {{example}}. Substitution is a single pass, so placeholder-like text in a
/// post is left alone.
struct PromptTemplates {
  std::string base;
  std::string advanced;

  static PromptTemplates bundled();
  /// Reads base.txt and advanced.txt from `dir`.
  static PromptTemplates from_dir(const std::filesystem::path& dir);
};

/// One-line JSON rendering of a bank entry as embedded in advanced prompts.
std::string example_json(const ExampleBankEntry& entry);

/// DomainError when the explanation is empty.
PromptSpec build_base_prompt(std::string_view post, text::ClassLabel label,
                             std::span<const heads::ExplanationPair> explanation,
                             const PromptTemplates& templates = PromptTemplates::bundled());
/// ConfigError naming the class when the bank has no entry for it.
PromptSpec build_advanced_prompt(std::string_view post, text::ClassLabel label,
                                 std::span<const heads::ExplanationPair> explanation,
                                 const ExampleBank& bank,
                                 const PromptTemplates& templates = PromptTemplates::bundled());

/// Template commentary naming the class and the top three words.
std::string offline_render(const PromptSpec& spec);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};  // doubled after every failed attempt
};

struct LlmConfig {
  std::string endpoint;  // full URL of the chat-completions route
  std::string model;
  double temperature = 0.0;
  int max_tokens = 256;
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry;
  std::string token_env = "XDD_LLM_TOKEN";  // name of the variable, never the token
  std::size_t concurrency = 4;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing fields keep their defaults.
  static LlmConfig from_json(const nlohmann::json& j);
};

/// {model, messages: [{role: "user", content}], temperature, max_tokens}
nlohmann::json request_body(const PromptSpec& spec, const LlmConfig& cfg);

/// One chat-completion call with retries on connection failures, 429 and
/// 5xx. Throws ConfigError (no token), TransportError (after retries, with
/// the attempt count) or ProviderError (empty or malformed completion).
std::string generate_commentary(const PromptSpec& spec, const LlmConfig& cfg);

struct CommentaryResult {
  std::optional<std::string> commentary;
  std::string error;  // set when commentary is empty
};

/// Runs up to cfg.concurrency requests at once. result[i] belongs to
/// specs[i] regardless of completion order.
std::vector<CommentaryResult> generate_batch(std::span<const PromptSpec> specs,
                                             const LlmConfig& cfg);

}  // namespace xdd::augment
