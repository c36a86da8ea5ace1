#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"
#include "xdd/encoder.hpp"
#include "xdd/num/tensor.hpp"
#include "xdd/pretune_head.hpp"
#include "xdd/textpipe.hpp"
#include "xdd/xdd_head.hpp"

namespace xdd {

enum class EncoderMode { toy, precomputed };
std::string to_string(EncoderMode mode);
EncoderMode parse_encoder_mode(const std::string& name);

struct ModelConfig {
  std::size_t d = 64;
  std::size_t k = 200;
  std::size_t u = 32;
  bool self_attention = true;
  EncoderMode encoder_mode = EncoderMode::toy;
  std::filesystem::path archive;  // precomputed mode only

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Encoder plus both heads. The pretune head is only trained in the first
/// phase but stays in the bundle so checkpoints of that phase are complete.
struct Model {
  ModelConfig config;
  text::Vocabulary vocab;
  std::unique_ptr<enc::EmbeddingProvider> encoder;
  heads::PretuneHead pretune_head;
  heads::XddHead head;

  /// Randomly initialized model; every random draw derives from `seed`.
  static Model create(const ModelConfig& config, text::Vocabulary vocab, std::uint64_t seed);
  /// Same shapes as create(), all parameters zero.
  static Model zeros(const ModelConfig& config, text::Vocabulary vocab);

  num::ParamList encoder_params() const { return encoder->params(); }
  /// Encoder, pretune head, xdd head, in that order. This is also the
  /// checkpoint order.
  num::ParamList all_params() const;

  text::TokenizedPost encode(const text::RawPost& post,
                             const text::StopwordList& stopwords) const {
    return text::encode_post(post, vocab, config.k, stopwords);
  }
};

}  // namespace xdd
