#include "xdd/model.hpp"

#include "xdd/error.hpp"
#include "xdd/num/random.hpp"

namespace xdd {

std::string to_string(EncoderMode mode) {
  return mode == EncoderMode::toy ? "toy" : "precomputed";
}

EncoderMode parse_encoder_mode(const std::string& name) {
  if (name == "toy") return EncoderMode::toy;
  if (name == "precomputed") return EncoderMode::precomputed;
  throw ConfigError("unknown encoder mode '" + name + "' (expected toy or precomputed)");
}

void ModelConfig::validate() const {
  if (d == 0) throw ConfigError("d must be positive");
  if (u == 0) throw ConfigError("u must be positive");
  if (k < 2) throw ConfigError("k must be at least 2");
  if (encoder_mode == EncoderMode::precomputed && archive.empty()) {
    throw ConfigError("encoder mode 'precomputed' needs an embedding archive path");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"d", d},
          {"k", k},
          {"u", u},
          {"self_attention", self_attention},
          {"encoder_mode", to_string(encoder_mode)},
          {"archive", archive.string()}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d = j.value("d", c.d);
  c.k = j.value("k", c.k);
  c.u = j.value("u", c.d / 2);
  c.self_attention = j.value("self_attention", true);
  c.encoder_mode = parse_encoder_mode(j.value("encoder_mode", std::string("toy")));
  c.archive = j.value("archive", std::string{});
  return c;
}

namespace {

std::unique_ptr<enc::EmbeddingProvider> make_encoder(const ModelConfig& config,
                                                     const text::Vocabulary& vocab,
                                                     num::Rng* rng) {
  if (config.encoder_mode == EncoderMode::precomputed) {
    return std::make_unique<enc::PrecomputedEncoder>(enc::EmbeddingArchive::open(config.archive),
                                                     config.d, config.k);
  }
  enc::ToyEncoderConfig ec{vocab.size(), config.d, config.k, config.self_attention};
  if (rng) return enc::ToyEncoder::initialized(ec, *rng);
  return std::make_unique<enc::ToyEncoder>(ec);
}

}  // namespace

Model Model::create(const ModelConfig& config, text::Vocabulary vocab, std::uint64_t seed) {
  config.validate();
  num::Rng encoder_rng(num::derive_seed(seed, 1));
  num::Rng pretune_rng(num::derive_seed(seed, 2));
  num::Rng head_rng(num::derive_seed(seed, 3));
  Model m;
  m.config = config;
  m.encoder = make_encoder(config, vocab, &encoder_rng);
  m.vocab = std::move(vocab);
  m.pretune_head = heads::PretuneHead::initialized(config.d, pretune_rng);
  m.head = heads::XddHead::initialized(config.d, config.u, head_rng);
  // Start on f32-representable values so a phase resumed from a checkpoint
  // sees the same untouched parameters as an uninterrupted run.
  for (auto p : m.all_params()) {
    for (double& v : p.tensor.mutable_values()) v = static_cast<double>(static_cast<float>(v));
  }
  return m;
}

Model Model::zeros(const ModelConfig& config, text::Vocabulary vocab) {
  config.validate();
  Model m;
  m.config = config;
  m.encoder = make_encoder(config, vocab, nullptr);
  m.vocab = std::move(vocab);
  m.pretune_head = heads::PretuneHead::zeros(config.d);
  m.head = heads::XddHead::zeros(config.d, config.u);
  return m;
}

num::ParamList Model::all_params() const {
  auto list = encoder->params();
  for (auto& p : pretune_head.params()) list.push_back(std::move(p));
  for (auto& p : head.params()) list.push_back(std::move(p));
  return list;
}

}  // namespace xdd
