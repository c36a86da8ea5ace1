#include <cstdio>
#include <fstream>
#include <sstream>

#include "xdd/augment.hpp"
#include "xdd/error.hpp"

namespace xdd::assets {
std::string_view prompt_base();
std::string_view prompt_advanced();
std::string_view example_bank();
}  // namespace xdd::assets

namespace xdd::augment {

using nlohmann::json;

std::string to_string(PromptVariant v) { return v == PromptVariant::base ? "base" : "advanced"; }

PromptVariant parse_prompt_variant(const std::string& name) {
  if (name == "base") return PromptVariant::base;
  if (name == "advanced") return PromptVariant::advanced;
  throw ConfigError("unknown prompt variant '" + name + "' (expected base or advanced)");
}

// --- example bank -----------------------------------------------------------

ExampleBank::ExampleBank(std::vector<ExampleBankEntry> entries) : entries_(std::move(entries)) {}

ExampleBank ExampleBank::parse(std::string_view json_text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(source + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError(source + ": example bank must be a JSON array");
  std::vector<ExampleBankEntry> entries;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string where = source + ": entry " + std::to_string(i);
    try {
      ExampleBankEntry e;
      e.id = item.at("id").get<std::string>();
      const auto cls = item.at("class").get<std::string>();
      auto label = text::parse_canonical(cls);
      if (!label) throw ParseError(where + ": unknown class '" + cls + "'");
      e.label = *label;
      e.post = item.at("post").get<std::string>();
      e.commentary = item.at("commentary").get<std::string>();
      e.provenance = item.value("provenance", std::string{});
      for (const auto& pair : item.at("explanation")) {
        const double w = pair.at("weight").get<double>();
        if (!(w >= 0.0 && w <= 1.0)) {
          throw ParseError(where + ": explanation weight " + std::to_string(w) + " outside [0, 1]");
        }
        e.explanation.push_back({pair.at("word").get<std::string>(), w, 0});
      }
      if (e.explanation.empty()) throw ParseError(where + ": empty explanation");
      entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError(where + ": " + ex.what());
    }
  }
  return ExampleBank(std::move(entries));
}

ExampleBank ExampleBank::bundled() { return parse(assets::example_bank(), "bundled example bank"); }

ExampleBank ExampleBank::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open example bank " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

const ExampleBankEntry* ExampleBank::select(text::ClassLabel label) const {
  const ExampleBankEntry* best = nullptr;
  for (const auto& e : entries_) {
    if (e.label == label && (!best || e.id < best->id)) best = &e;
  }
  return best;
}

// --- templates --------------------------------------------------------------

namespace {

constexpr std::string_view kPlaceholders[] = {"post", "class", "explanation", "example"};

void check_template(std::string_view tmpl, const std::string& name,
                    std::span<const std::string_view> required) {
  for (auto key : required) {
    if (tmpl.find("{{" + std::string(key) + "}}") == std::string_view::npos) {
      throw ConfigError(name + ": missing placeholder {{" + std::string(key) + "}}");
    }
  }
  for (std::size_t pos = tmpl.find("{{"); pos != std::string_view::npos;
       pos = tmpl.find("{{", pos + 2)) {
    const auto end = tmpl.find("}}", pos);
    if (end == std::string_view::npos) throw ConfigError(name + ": unterminated placeholder");
    const auto key = tmpl.substr(pos + 2, end - pos - 2);
    bool known = false;
    for (auto p : kPlaceholders) known = known || key == p;
    if (!known) throw ConfigError(name + ": unknown placeholder {{" + std::string(key) + "}}");
  }
}

struct Bindings {
  std::string_view post, cls, explanation, example;
};

std::string render(std::string_view tmpl, const Bindings& b) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open);
    out.append(tmpl.substr(pos, open - pos));
    const auto key = tmpl.substr(open + 2, close - open - 2);
    if (key == "post") out.append(b.post);
    else if (key == "class") out.append(b.cls);
    else if (key == "explanation") out.append(b.explanation);
    else out.append(b.example);
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open prompt template " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PromptInputs make_inputs(std::string_view post, text::ClassLabel label,
                         std::span<const heads::ExplanationPair> explanation) {
  if (explanation.empty()) throw DomainError("cannot build a prompt from an empty explanation");
  return {std::string(post), label, {explanation.begin(), explanation.end()}};
}

}  // namespace

PromptTemplates PromptTemplates::bundled() {
  return {std::string(assets::prompt_base()), std::string(assets::prompt_advanced())};
}

PromptTemplates PromptTemplates::from_dir(const std::filesystem::path& dir) {
  PromptTemplates t{read_file(dir / "base.txt"), read_file(dir / "advanced.txt")};
  const std::span<const std::string_view> all(kPlaceholders);
  check_template(t.base, (dir / "base.txt").string(), all.first(3));
  check_template(t.advanced, (dir / "advanced.txt").string(), all);
  return t;
}

std::string example_json(const ExampleBankEntry& entry) {
  return "{\"post\": " + json(entry.post).dump() + ", \"class\": " +
         json(std::string(text::canonical_name(entry.label))).dump() +
         ", \"explanation\": " + heads::format_pairs(entry.explanation) +
         ", \"commentary\": " + json(entry.commentary).dump() + "}";
}

PromptSpec build_base_prompt(std::string_view post, text::ClassLabel label,
                             std::span<const heads::ExplanationPair> explanation,
                             const PromptTemplates& templates) {
  PromptSpec spec;
  spec.variant = PromptVariant::base;
  spec.inputs = make_inputs(post, label, explanation);
  const auto pairs = heads::format_pairs(explanation);
  spec.rendered_text = render(templates.base, {post, text::canonical_name(label), pairs, ""});
  return spec;
}

PromptSpec build_advanced_prompt(std::string_view post, text::ClassLabel label,
                                 std::span<const heads::ExplanationPair> explanation,
                                 const ExampleBank& bank, const PromptTemplates& templates) {
  PromptSpec spec;
  spec.variant = PromptVariant::advanced;
  spec.inputs = make_inputs(post, label, explanation);
  const auto* example = bank.select(label);
  if (!example) {
    throw ConfigError("example bank has no entry for class " +
                      std::string(text::canonical_name(label)));
  }
  spec.example_id = example->id;
  const auto pairs = heads::format_pairs(explanation);
  const auto example_text = example_json(*example);
  spec.rendered_text =
      render(templates.advanced, {post, text::canonical_name(label), pairs, example_text});
  return spec;
}

std::string offline_render(const PromptSpec& spec) {
  const auto& pairs = spec.inputs.explanation;
  const std::string cls(text::canonical_name(spec.inputs.label));
  if (pairs.empty()) return "The model assigns the class " + cls + " to this post.";

  const std::size_t n = std::min<std::size_t>(3, pairs.size());
  std::string words;
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) words += (i + 1 == n) ? " and " : ", ";
    std::snprintf(buf, sizeof(buf), "%.4f", pairs[i].weight);
    words += "\"" + pairs[i].word + "\" (" + buf + ")";
  }
  std::string out = "The model assigns the class " + cls + " to this post. ";
  out += n == 1 ? "The highest-weighted word in its explanation is " + words + ". "
                : "The highest-weighted words in its explanation are " + words + ". ";
  out += "These weights are the share of attention each word received when the class was chosen. ";
  out += "This commentary refers only to words listed in the explanation.";
  return out;
}

}  // namespace xdd::augment
