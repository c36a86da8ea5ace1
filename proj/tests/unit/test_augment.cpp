#include <doctest.h>

#include <cstdlib>
#include <regex>
#include <set>
#include <sstream>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "stub_llm.hpp"
#include "synthetic.hpp"
#include "xdd/augment.hpp"
#include "xdd/error.hpp"

using namespace xdd;
using namespace xdd::augment;
using xdd::testing::StubLlm;
using xdd::testing::StubReply;

namespace {

const std::filesystem::path kGoldens = std::filesystem::path(XDD_TEST_DATA_DIR) / "goldens";
constexpr const char* kToken = "sk-test-7f3a9c1e";

std::string tag_of(const ExampleBankEntry& e) { return e.id.substr(0, e.id.find('-')); }

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

// Routes every log line into a string for the lifetime of the object.
struct LogCapture {
  std::ostringstream buffer;
  std::shared_ptr<spdlog::logger> previous = spdlog::default_logger();
  LogCapture() {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(buffer);
    auto logger = std::make_shared<spdlog::logger>("capture", sink);
    logger->set_level(spdlog::level::trace);
    spdlog::set_default_logger(logger);
  }
  ~LogCapture() { spdlog::set_default_logger(previous); }
};

struct TokenEnv {
  TokenEnv() { ::setenv("XDD_TEST_TOKEN", kToken, 1); }
  ~TokenEnv() { ::unsetenv("XDD_TEST_TOKEN"); }
};

LlmConfig stub_config(const StubLlm& stub) {
  LlmConfig cfg;
  cfg.endpoint = stub.endpoint();
  cfg.model = "stub-model";
  cfg.token_env = "XDD_TEST_TOKEN";
  cfg.retry.backoff = std::chrono::milliseconds(1);
  cfg.timeout = std::chrono::milliseconds(5000);
  return cfg;
}

PromptSpec sample_spec() {
  const std::vector<heads::ExplanationPair> pairs = {{"tired", 0.4, 1}, {"alone", 0.3, 3}};
  return build_base_prompt("tired and alone", text::ClassLabel::moderately_depressed, pairs);
}

}  // namespace

TEST_CASE("prompts match the committed goldens") {
  const auto bank = ExampleBank::bundled();
  REQUIRE(bank.entries().size() == 3);
  for (const auto& e : bank.entries()) {
    const auto tag = tag_of(e);
    CAPTURE(tag);
    const auto base = build_base_prompt(e.post, e.label, e.explanation);
    const auto advanced = build_advanced_prompt(e.post, e.label, e.explanation, bank);
    CHECK(base.rendered_text == xdd::testing::read_file(kGoldens / ("base_" + tag + ".txt")));
    CHECK(advanced.rendered_text ==
          xdd::testing::read_file(kGoldens / ("advanced_" + tag + ".txt")));
  }
}

TEST_CASE("the severe golden leads with failure") {
  const auto golden = xdd::testing::read_file(kGoldens / "advanced_severe.txt");
  CHECK(golden.find("Day 19 on antidepressants") != std::string::npos);
  CHECK(golden.find("{\"failure\": 0.1183, \"fatigued\": 0.1175") != std::string::npos);
}

TEST_CASE("advanced prompts embed exactly one class-matched example") {
  const auto bank = ExampleBank::bundled();
  const std::vector<heads::ExplanationPair> pairs = {{"word", 0.9, 1}};
  for (auto label : text::kAllClasses) {
    const auto spec = build_advanced_prompt("some post", label, pairs, bank);
    REQUIRE(spec.example_id.has_value());
    const auto* entry = bank.select(label);
    REQUIRE(entry != nullptr);
    CHECK(*spec.example_id == entry->id);
    CHECK(entry->label == label);
    CHECK(count(spec.rendered_text, "\"commentary\": ") == 1);
    const std::string class_field = "\"class\": \"" + std::string(text::canonical_name(label)) + "\"";
    CHECK(count(spec.rendered_text, class_field) == 1);
    CHECK(spec.rendered_text.find(example_json(*entry)) != std::string::npos);
  }
  CHECK_FALSE(build_base_prompt("p", text::ClassLabel::not_depressed, pairs).example_id.has_value());
}

TEST_CASE("prompt construction errors") {
  const std::vector<heads::ExplanationPair> none;
  CHECK_THROWS_AS(build_base_prompt("p", text::ClassLabel::not_depressed, none), DomainError);
  const std::vector<heads::ExplanationPair> pairs = {{"word", 0.9, 1}};
  const ExampleBank empty;
  try {
    (void)build_advanced_prompt("p", text::ClassLabel::severely_depressed, pairs, empty);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("SEVERELY_DEPRESSED") != std::string::npos);
  }
  CHECK(parse_prompt_variant("advanced") == PromptVariant::advanced);
  CHECK_THROWS_AS(parse_prompt_variant("fancy"), ConfigError);
}

TEST_CASE("placeholder text inside a post is not substituted") {
  const std::vector<heads::ExplanationPair> pairs = {{"class", 0.5, 1}};
  const auto spec = build_base_prompt("my {{class}} and {{explanation}}", text::ClassLabel::not_depressed, pairs);
  CHECK(spec.rendered_text.find("my {{class}} and {{explanation}}") != std::string::npos);
}

TEST_CASE("example bank parsing") {
  const auto ok = ExampleBank::parse(
      R"([{"id": "x", "class": "NOT_DEPRESSED", "post": "p", "commentary": "c",
           "explanation": [{"word": "w", "weight": 0.5}]}])");
  REQUIRE(ok.entries().size() == 1);
  CHECK(ok.select(text::ClassLabel::not_depressed)->id == "x");
  CHECK(ok.select(text::ClassLabel::severely_depressed) == nullptr);
  CHECK_THROWS_AS(ExampleBank::parse("{"), ParseError);
  CHECK_THROWS_AS(ExampleBank::parse("{}"), ParseError);
  CHECK_THROWS_AS(ExampleBank::parse(
                      R"([{"id": "x", "class": "MILD", "post": "p", "commentary": "c",
                           "explanation": [{"word": "w", "weight": 0.5}]}])"),
                  ParseError);
  CHECK_THROWS_AS(ExampleBank::parse(
                      R"([{"id": "x", "class": "NOT_DEPRESSED", "post": "p", "commentary": "c",
                           "explanation": [{"word": "w", "weight": 1.5}]}])"),
                  ParseError);
}

TEST_CASE("templates from a directory must carry their placeholders") {
  xdd::testing::TempDir dir("templates");
  std::ofstream(dir / "base.txt") << "{{post}} {{class}} {{explanation}}";
  std::ofstream(dir / "advanced.txt") << "{{post}} {{class}} {{explanation}} {{example}}";
  const auto t = PromptTemplates::from_dir(dir.path());
  const std::vector<heads::ExplanationPair> pairs = {{"w", 0.5, 1}};
  CHECK(build_base_prompt("P", text::ClassLabel::not_depressed, pairs, t).rendered_text ==
        "P NOT_DEPRESSED {\"w\": 0.5000}");
  std::ofstream(dir / "advanced.txt", std::ios::trunc) << "{{post}} {{class}} {{explanation}}";
  CHECK_THROWS_AS(PromptTemplates::from_dir(dir.path()), ConfigError);
}

TEST_CASE("offline render is deterministic and quotes only explanation words") {
  const auto bank = ExampleBank::bundled();
  for (const auto& e : bank.entries()) {
    const auto spec = build_advanced_prompt(e.post, e.label, e.explanation, bank);
    const auto first = offline_render(spec);
    CHECK(first == offline_render(spec));
    CHECK(first.find(text::canonical_name(e.label)) != std::string::npos);
    std::set<std::string> allowed;
    for (const auto& p : e.explanation) allowed.insert(p.word);
    const std::regex quoted("\"([^\"]*)\"");
    std::size_t quotes = 0;
    for (std::sregex_iterator it(first.begin(), first.end(), quoted), end; it != end; ++it) {
      CHECK_MESSAGE(allowed.count((*it)[1].str()) == 1, (*it)[1].str());
      ++quotes;
    }
    CHECK(quotes == 3);
  }
}

TEST_CASE("llm config JSON and validation") {
  LlmConfig cfg;
  cfg.endpoint = "http://localhost:1/v1/chat/completions";
  cfg.model = "m";
  CHECK_NOTHROW(cfg.validate());
  CHECK(LlmConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
  CHECK(cfg.to_json().dump().find("XDD_LLM_TOKEN") != std::string::npos);
  auto bad = cfg;
  bad.retry.max_attempts = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.endpoint.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(LlmConfig::from_json({{"max_tokens", "many"}}), ConfigError);
}

TEST_CASE("request body schema and auth header") {
  TokenEnv env;
  StubLlm stub({{200, "  The post is classified as moderate.  "}});
  const auto cfg = stub_config(stub);
  const auto spec = sample_spec();
  CHECK(generate_commentary(spec, cfg) == "  The post is classified as moderate.  ");
  const auto reqs = stub.requests();
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].path == "/v1/chat/completions");
  CHECK(reqs[0].authorization == std::string("Bearer ") + kToken);
  const auto body = nlohmann::json::parse(reqs[0].body);
  CHECK(body.size() == 4);
  CHECK(body.at("model") == "stub-model");
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("max_tokens") == 256);
  REQUIRE(body.at("messages").size() == 1);
  CHECK(body["messages"][0].at("role") == "user");
  CHECK(body["messages"][0].at("content") == spec.rendered_text);
  CHECK(body == request_body(spec, cfg));
}

TEST_CASE("retries on 429 and 5xx, token never logged") {
  TokenEnv env;
  LogCapture logs;
  StubLlm stub({{429}, {503}, {200, "third time"}});
  auto cfg = stub_config(stub);
  CHECK(generate_commentary(sample_spec(), cfg) == "third time");
  CHECK(stub.requests().size() == 3);

  StubLlm failing({{500}, {500}, {500}, {500}});
  cfg = stub_config(failing);
  try {
    (void)generate_commentary(sample_spec(), cfg);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 3);
    CHECK(std::string(e.what()).find(kToken) == std::string::npos);
  }
  CHECK(failing.requests().size() == 3);
  CHECK_FALSE(logs.buffer.str().empty());
  CHECK(logs.buffer.str().find(kToken) == std::string::npos);
}

TEST_CASE("4xx other than 429 is not retried") {
  TokenEnv env;
  StubLlm stub({{401}, {200}});
  try {
    (void)generate_commentary(sample_spec(), stub_config(stub));
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(std::string(e.what()).find("401") != std::string::npos);
  }
  CHECK(stub.requests().size() == 1);
}

TEST_CASE("malformed and empty completions are provider errors") {
  TokenEnv env;
  StubLlm stub({{200, "", R"({"choices": []})"}, {200, "   "}, {200, "", "not json"}});
  const auto cfg = stub_config(stub);
  CHECK_THROWS_AS(generate_commentary(sample_spec(), cfg), ProviderError);
  CHECK_THROWS_AS(generate_commentary(sample_spec(), cfg), ProviderError);
  CHECK_THROWS_AS(generate_commentary(sample_spec(), cfg), ProviderError);
}

TEST_CASE("missing token and unreachable endpoint") {
  ::unsetenv("XDD_TEST_TOKEN");
  StubLlm stub;
  CHECK_THROWS_AS(generate_commentary(sample_spec(), stub_config(stub)), ConfigError);
  CHECK(stub.requests().empty());

  TokenEnv env;
  LlmConfig cfg = stub_config(stub);
  cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  cfg.retry.max_attempts = 2;
  try {
    (void)generate_commentary(sample_spec(), cfg);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 2);
  }
  cfg.endpoint = "ftp://example";
  CHECK_THROWS_AS(generate_commentary(sample_spec(), cfg), ConfigError);
}

TEST_CASE("batch keeps results aligned with inputs and records failures") {
  TokenEnv env;
  StubLlm stub;
  stub.fail_when_prompt_contains("second post", 400);
  auto cfg = stub_config(stub);
  cfg.concurrency = 3;
  const std::vector<heads::ExplanationPair> pairs = {{"w", 0.5, 1}};
  std::vector<PromptSpec> specs;
  for (const char* post : {"first post", "second post", "third post"}) {
    specs.push_back(build_base_prompt(post, text::ClassLabel::not_depressed, pairs));
  }
  const auto results = generate_batch(specs, cfg);
  REQUIRE(results.size() == 3);
  CHECK(results[0].commentary.has_value());
  CHECK_FALSE(results[1].commentary.has_value());
  CHECK(results[1].error.find("400") != std::string::npos);
  CHECK(results[2].commentary.has_value());
}
