#include <algorithm>
#include <fstream>
#include <sstream>

#include "xdd/cli.hpp"
#include "xdd/error.hpp"

namespace xdd::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
  if (value.empty()) return {};
  fs::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

void require_file(const fs::path& p, const char* field) {
  if (p.empty()) throw ConfigError(std::string(field) + ": required");
  if (!fs::is_regular_file(p)) {
    throw ConfigError(std::string(field) + ": file not found: " + p.string());
  }
}

void optional_file(const fs::path& p, const char* field) {
  if (!p.empty() && !fs::is_regular_file(p)) {
    throw ConfigError(std::string(field) + ": file not found: " + p.string());
  }
}

const std::string kKnownKeys[] = {"train_data", "val_data",   "format",   "stopwords",
                                  "checkpoint_dir", "min_freq", "model",  "training",
                                  "llm",        "bank",       "templates"};

}  // namespace

void RunConfig::validate_for_training() const {
  require_file(train_data, "train_data");
  require_file(val_data, "val_data");
  optional_file(stopwords, "stopwords");
  if (format != "auto" && format != "tsv" && format != "jsonl") {
    throw ConfigError("format: expected auto, tsv or jsonl, got '" + format + "'");
  }
  if (min_freq < 1) throw ConfigError("min_freq: must be at least 1");
  if (checkpoint_dir.empty()) throw ConfigError("checkpoint_dir: required");
  try {
    model.validate();
    if (model.encoder_mode == EncoderMode::precomputed) optional_file(model.archive, "model.archive");
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  try {
    training.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }
}

json RunConfig::to_json() const {
  return {{"train_data", train_data.string()},
          {"val_data", val_data.string()},
          {"format", format},
          {"stopwords", stopwords.string()},
          {"checkpoint_dir", checkpoint_dir.string()},
          {"min_freq", min_freq},
          {"model", model.to_json()},
          {"training", training.to_json()},
          {"llm", llm.to_json()},
          {"bank", bank.string()},
          {"templates", templates.string()}};
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), key) == std::end(kKnownKeys)) {
      throw ConfigError("config: unknown field '" + key + "'");
    }
  }
  RunConfig c;
  const auto field = [&](const char* name, auto&& apply) {
    if (!j.contains(name)) return;
    try {
      apply(j.at(name));
    } catch (const json::exception& e) {
      throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(name) + ": " + e.what());
    }
  };
  const auto path_field = [&](const char* name, fs::path& target) {
    field(name, [&](const json& v) { target = resolve(base_dir, v.get<std::string>()); });
  };
  path_field("train_data", c.train_data);
  path_field("val_data", c.val_data);
  path_field("stopwords", c.stopwords);
  path_field("checkpoint_dir", c.checkpoint_dir);
  path_field("bank", c.bank);
  path_field("templates", c.templates);
  field("format", [&](const json& v) { c.format = v.get<std::string>(); });
  field("min_freq", [&](const json& v) { c.min_freq = v.get<std::size_t>(); });
  field("model", [&](const json& v) {
    c.model = ModelConfig::from_json(v);
    if (!c.model.archive.empty()) c.model.archive = resolve(base_dir, c.model.archive.string());
    c.model_given = true;
  });
  field("training", [&](const json& v) { c.training = train::TrainConfig::from_json(v); });
  field("llm", [&](const json& v) { c.llm = augment::LlmConfig::from_json(v); });
  return c;
}

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  json j;
  try {
    j = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

}  // namespace xdd::cli
