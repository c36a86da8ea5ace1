#pragma once

// Three-phase training: pretune (encoder + pooler head), head_frozen
// (bi-LSTM/attention head over a frozen encoder), end_to_end (everything).
// Every phase keeps the epoch with the best validation macro-F1.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xdd/metrics.hpp"
#include "xdd/model.hpp"
#include "xdd/num/optim.hpp"
#include "xdd/textpipe.hpp"

namespace xdd::train {

enum class Phase { pretune, head_frozen, end_to_end };

inline constexpr Phase kAllPhases[] = {Phase::pretune, Phase::head_frozen, Phase::end_to_end};

std::string to_string(Phase phase);
Phase parse_phase(const std::string& name);

struct PhaseSettings {
  std::size_t epochs = 1;
  double lr = 1e-3;
  num::OptimizerKind optimizer = num::OptimizerKind::adam;
};

struct TrainConfig {
  PhaseSettings pretune{8, 3e-5, num::OptimizerKind::radam};
  PhaseSettings head_frozen{6, 1e-3, num::OptimizerKind::adam};
  PhaseSettings end_to_end{2, 3e-5, num::OptimizerKind::radam};
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::string selection_metric = "macro_f1";
  std::optional<double> grad_clip;  // max global L2 norm, off by default

  const PhaseSettings& settings(Phase phase) const;
  PhaseSettings& settings(Phase phase);

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing fields keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  std::size_t index = 0;  // 1-based
  double train_loss = 0.0;
  metrics::Scores val;
};

struct TrainReport {
  Phase phase = Phase::pretune;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based
  std::uint64_t seed = 0;
  nlohmann::json config_echo;
  double wall_seconds = 0.0;
  std::string checkpoint_path;
  std::uint64_t encoder_checksum_before = 0;
  std::uint64_t encoder_checksum_after = 0;

  const EpochRecord& best() const { return epochs.at(best_epoch - 1); }
  nlohmann::json to_json() const;
};

/// Confusion matrices of the two classifiers over labeled posts.
metrics::ConfusionMatrix evaluate_pretune(const Model& model,
                                          std::span<const text::TokenizedPost> posts);
metrics::ConfusionMatrix evaluate_xdd(const Model& model,
                                      std::span<const text::TokenizedPost> posts);

TrainReport pretune(Model& model, std::span<const text::TokenizedPost> train,
                    std::span<const text::TokenizedPost> val, const TrainConfig& cfg);
/// Encoder checksum is verified unchanged; a mismatch raises OracleError.
TrainReport train_head_frozen(Model& model, std::span<const text::TokenizedPost> train,
                              std::span<const text::TokenizedPost> val, const TrainConfig& cfg);
TrainReport finetune_end_to_end(Model& model, std::span<const text::TokenizedPost> train,
                                std::span<const text::TokenizedPost> val,
                                const TrainConfig& cfg);

TrainReport run_phase(Phase phase, Model& model, std::span<const text::TokenizedPost> train,
                      std::span<const text::TokenizedPost> val, const TrainConfig& cfg);

struct ProtocolOptions {
  /// When set, phase p is saved to <dir>/<p> (checkpoint + report.json) and
  /// the final model to <dir>/final.
  std::optional<std::filesystem::path> checkpoint_dir;
  nlohmann::json config_echo;  // embedded in reports and manifests
};

/// Saves `model` and `report` to `dir` as one phase artifact.
void save_phase(const std::filesystem::path& dir, const Model& model, const TrainReport& report);

/// pretune → head_frozen → end_to_end. Errors are re-raised with the
/// failing phase's name prefixed.
std::vector<TrainReport> run_full_protocol(Model& model,
                                           std::span<const text::TokenizedPost> train,
                                           std::span<const text::TokenizedPost> val,
                                           const TrainConfig& cfg,
                                           const ProtocolOptions& options = {});

}  // namespace xdd::train
