#pragma once

// Checkpoint layout: a directory holding
//   manifest.json  format_version, created_at, phase, d, k, u, class_names,
//                  seed, config, vocab, params [{name, shape, offset}]
//   params.bin     little-endian f32 values, parameters in manifest order

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "xdd/model.hpp"

namespace xdd {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointMeta {
  std::string phase;
  std::uint64_t seed = 0;
  nlohmann::json config_echo;  // resolved training configuration
};

/// created_at comes from SOURCE_DATE_EPOCH when set, else the wall clock.
void save_checkpoint(const std::filesystem::path& dir, const Model& model,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  Model model;
  CheckpointMeta meta;
  std::string created_at;
};

/// `archive_override` replaces the archive path recorded for precomputed
/// encoders.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir,
                                 const std::optional<std::filesystem::path>& archive_override = {});

bool checkpoint_exists(const std::filesystem::path& dir);

}  // namespace xdd
