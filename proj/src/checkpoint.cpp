#include "xdd/checkpoint.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include "common/le_io.hpp"
#include "xdd/error.hpp"

namespace xdd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string timestamp_utc() {
  std::time_t now;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    now = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

bool checkpoint_exists(const fs::path& dir) {
  return fs::exists(dir / "manifest.json") && fs::exists(dir / "params.bin");
}

void save_checkpoint(const fs::path& dir, const Model& model, const CheckpointMeta& meta) {
  fs::create_directories(dir);
  const auto params = model.all_params();

  json entries = json::array();
  std::uint64_t offset = 0;
  {
    std::ofstream blob(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!blob) throw ConfigError("cannot write " + (dir / "params.bin").string());
    for (const auto& p : params) {
      detail::write_f32(blob, p.tensor.values());
      entries.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}});
      offset += p.tensor.size() * sizeof(float);
    }
  }
  json class_names = json::array();
  for (auto c : text::kAllClasses) class_names.push_back(std::string(text::canonical_name(c)));

  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["created_at"] = timestamp_utc();
  manifest["phase"] = meta.phase;
  manifest["d"] = model.config.d;
  manifest["k"] = model.config.k;
  manifest["u"] = model.config.u;
  manifest["class_names"] = class_names;
  manifest["seed"] = meta.seed;
  manifest["model"] = model.config.to_json();
  manifest["config"] = meta.config_echo;
  manifest["vocab"] = model.vocab.tokens();
  manifest["params"] = entries;
  manifest["blob_bytes"] = offset;
  std::ofstream(dir / "manifest.json", std::ios::trunc) << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const fs::path& dir,
                                 const std::optional<fs::path>& archive_override) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("no checkpoint at " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
  }
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw ConfigError("unsupported checkpoint format_version " + std::to_string(version));
    }
    auto config = ModelConfig::from_json(manifest.at("model"));
    if (archive_override) config.archive = *archive_override;
    auto vocab = text::Vocabulary::from_tokens(manifest.at("vocab").get<std::vector<std::string>>());

    LoadedCheckpoint out{Model::zeros(config, std::move(vocab)), {}, {}};
    out.meta.phase = manifest.at("phase").get<std::string>();
    out.meta.seed = manifest.at("seed").get<std::uint64_t>();
    out.meta.config_echo = manifest.value("config", json::object());
    out.created_at = manifest.value("created_at", std::string{});

    auto params = out.model.all_params();
    const auto& entries = manifest.at("params");
    if (entries.size() != params.size()) {
      throw ConfigError("checkpoint lists " + std::to_string(entries.size()) +
                        " parameters, model expects " + std::to_string(params.size()));
    }
    std::uint64_t declared = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& e = entries[i];
      const auto name = e.at("name").get<std::string>();
      const auto shape = e.at("shape").get<num::Shape>();
      if (name != params[i].name || shape != params[i].tensor.shape()) {
        throw ConfigError("checkpoint parameter " + name + " " + num::to_string(shape) +
                          " does not match model parameter " + params[i].name + " " +
                          num::to_string(params[i].tensor.shape()));
      }
      declared += num::element_count(shape) * sizeof(float);
    }
    const auto blob_path = dir / "params.bin";
    if (!fs::exists(blob_path) || fs::file_size(blob_path) != declared) {
      throw ParseError("checkpoint blob size does not match the declared shapes (" +
                       std::to_string(declared) + " bytes expected)");
    }
    std::ifstream blob(blob_path, std::ios::binary);
    for (std::size_t i = 0; i < params.size(); ++i) {
      blob.seekg(static_cast<std::streamoff>(entries[i].at("offset").get<std::uint64_t>()));
      std::vector<double> values;
      if (!detail::read_f32(blob, params[i].tensor.size(), values)) {
        throw ParseError("checkpoint blob truncated at " + params[i].name);
      }
      auto dst = params[i].tensor.mutable_values();
      std::copy(values.begin(), values.end(), dst.begin());
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
  }
}

}  // namespace xdd
