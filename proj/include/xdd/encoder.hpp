#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xdd/num/random.hpp"
#include "xdd/num/tensor.hpp"
#include "xdd/textpipe.hpp"

namespace xdd::enc {

/// E is stored as a (d×k) tensor; column i is the embedding of token i.
struct EmbeddingMatrix {
  num::Tensor E;
  num::Tensor e_cls;

  std::size_t d() const { return E.rows(); }
  std::size_t k() const { return E.cols(); }
};

/// Anything that turns a tokenized post into embeddings.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual EmbeddingMatrix encode(const text::TokenizedPost& post) const = 0;
  /// Trainable parameters; empty when embeddings come from outside.
  virtual num::ParamList params() const = 0;
  virtual void set_frozen(bool frozen) = 0;
  virtual bool frozen() const = 0;
  virtual std::size_t d() const = 0;
  virtual std::size_t k() const = 0;
};

struct ToyEncoderConfig {
  std::size_t vocab_size = 3;
  std::size_t d = 64;
  std::size_t k = 200;
  bool self_attention = true;
};

/// Token + learned positional embeddings, optionally followed by one
/// residual single-head self-attention block whose keys skip PAD positions.
class ToyEncoder final : public EmbeddingProvider {
 public:
  /// All tables zero.
  explicit ToyEncoder(const ToyEncoderConfig& config);
  /// Token table uniform in ±1/√d, projections Glorot-uniform, positional
  /// table zero.
  static std::unique_ptr<ToyEncoder> initialized(const ToyEncoderConfig& config, num::Rng& rng);

  EmbeddingMatrix encode(const text::TokenizedPost& post) const override;
  num::ParamList params() const override;
  void set_frozen(bool frozen) override;
  bool frozen() const override { return frozen_; }
  std::size_t d() const override { return config_.d; }
  std::size_t k() const override { return config_.k; }

  const ToyEncoderConfig& config() const { return config_; }

  num::Tensor token_embedding;     // vocab × d
  num::Tensor position_embedding;  // k × d
  num::Tensor w_query, w_key, w_value, w_output;  // d × d, only with self_attention

 private:
  ToyEncoderConfig config_;
  bool frozen_ = false;
};

// ---------------------------------------------------------------------------
// Embedding archive: manifest.json + embeddings.bin

enum class Precision { f32, f64 };
std::string to_string(Precision p);
Precision parse_precision(const std::string& name);
std::size_t bytes_per_value(Precision p);

struct ArchiveEntry {
  std::string post_id;
  std::uint64_t offset = 0;  // byte offset into embeddings.bin
};

struct ArchiveManifest {
  int format_version = 1;
  std::size_t d = 0;
  std::size_t k = 0;
  Precision precision = Precision::f32;
  std::string alignment = "mean-subword";
  std::vector<ArchiveEntry> posts;
};

/// One post's embeddings as written by an exporter.
struct ArchiveRecord {
  std::string post_id;
  std::vector<double> e_cls;          // d
  std::vector<double> E_col_major;    // d*k, column after column
};

void write_archive(const std::filesystem::path& dir, std::size_t d, std::size_t k,
                   Precision precision, std::span<const ArchiveRecord> records);

class EmbeddingArchive {
 public:
  static EmbeddingArchive open(const std::filesystem::path& dir);

  const ArchiveManifest& manifest() const { return manifest_; }
  bool contains(const std::string& post_id) const { return index_.count(post_id) > 0; }
  /// Throws LookupError for unknown ids and ConfigError when the archive's
  /// d or k differs from the run's.
  EmbeddingMatrix load(const std::string& post_id, std::size_t expected_d,
                       std::size_t expected_k) const;

 private:
  std::filesystem::path dir_;
  ArchiveManifest manifest_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Checks the archive's d and k against the run configuration.
void check_archive_dims(const ArchiveManifest& manifest, std::size_t d, std::size_t k);

/// Reduces subword vectors to word vectors by averaging the subwords that
/// belong to each word. `subwords` is (n_subwords × d) row-major and
/// `word_of_subword[j]` names the word of subword j.
std::vector<std::vector<double>> mean_subword_alignment(
    std::span<const std::vector<double>> subwords, std::span<const std::size_t> word_of_subword,
    std::size_t n_words);

/// Serves E and e_cls from an archive, keyed by post id. Has no trainable
/// parameters, so freezing is a no-op.
class PrecomputedEncoder final : public EmbeddingProvider {
 public:
  PrecomputedEncoder(EmbeddingArchive archive, std::size_t d, std::size_t k);

  EmbeddingMatrix encode(const text::TokenizedPost& post) const override;
  num::ParamList params() const override { return {}; }
  void set_frozen(bool frozen) override { frozen_ = frozen; }
  bool frozen() const override { return frozen_; }
  std::size_t d() const override { return d_; }
  std::size_t k() const override { return k_; }

 private:
  EmbeddingArchive archive_;
  std::size_t d_;
  std::size_t k_;
  bool frozen_ = true;
};

}  // namespace xdd::enc
