#pragma once

// The `xdd` command line: train, eval, explain, augment, gradcheck.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error
// (unreadable or malformed inputs, provider failures), 3 numerical or
// verification failure.

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"
#include "xdd/augment.hpp"
#include "xdd/model.hpp"
#include "xdd/trainer.hpp"

namespace xdd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Everything a command may need, read from one JSON file and then
/// overridden by flags. Relative paths are resolved against the directory
/// of the config file.
struct RunConfig {
  std::filesystem::path train_data;
  std::filesystem::path val_data;
  std::string format = "auto";  // auto (by extension), tsv, jsonl
  std::filesystem::path stopwords;  // empty: bundled list
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::size_t min_freq = 1;
  ModelConfig model;
  bool model_given = false;  // the file had a "model" object
  train::TrainConfig training;
  augment::LlmConfig llm;
  std::filesystem::path bank;       // empty: bundled example bank
  std::filesystem::path templates;  // empty: bundled prompt templates

  /// Field-level ConfigError for the fields the training command reads.
  void validate_for_training() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j,
                             const std::filesystem::path& base_dir = {});
  static RunConfig from_file(const std::filesystem::path& path);
};

/// Parses argv and runs one command. Normal output goes to `out`, messages
/// and diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace xdd::cli
