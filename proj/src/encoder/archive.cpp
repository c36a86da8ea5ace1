#include <fstream>

#include "../common/le_io.hpp"
#include "json.hpp"
#include "xdd/encoder.hpp"
#include "xdd/error.hpp"

namespace xdd::enc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(const std::string& name) {
  if (name == "f32") return Precision::f32;
  if (name == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + name + "' (expected f32 or f64)");
}

std::size_t bytes_per_value(Precision p) { return p == Precision::f32 ? 4 : 8; }

void write_archive(const fs::path& dir, std::size_t d, std::size_t k, Precision precision,
                   std::span<const ArchiveRecord> records) {
  fs::create_directories(dir);
  std::ofstream bin(dir / "embeddings.bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw ConfigError("cannot write " + (dir / "embeddings.bin").string());

  json posts = json::array();
  std::uint64_t offset = 0;
  const std::uint64_t record_bytes = (d + d * k) * bytes_per_value(precision);
  for (const auto& r : records) {
    if (r.e_cls.size() != d || r.E_col_major.size() != d * k) {
      throw DimensionError("archive record '" + r.post_id + "' does not match d = " +
                           std::to_string(d) + ", k = " + std::to_string(k));
    }
    if (precision == Precision::f32) {
      detail::write_f32(bin, r.e_cls);
      detail::write_f32(bin, r.E_col_major);
    } else {
      detail::write_f64(bin, r.e_cls);
      detail::write_f64(bin, r.E_col_major);
    }
    posts.push_back({{"post_id", r.post_id}, {"offset", offset}});
    offset += record_bytes;
  }
  json manifest = {{"format_version", 1},
                   {"d", d},
                   {"k", k},
                   {"precision", to_string(precision)},
                   {"alignment", "mean-subword"},
                   {"post_ids", posts}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

EmbeddingArchive EmbeddingArchive::open(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("embedding archive " + dir.string() + " has no manifest.json");
  EmbeddingArchive archive;
  archive.dir_ = dir;
  try {
    const auto j = json::parse(in);
    auto& m = archive.manifest_;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != 1) {
      throw ConfigError("unsupported archive format_version " + std::to_string(m.format_version));
    }
    m.d = j.at("d").get<std::size_t>();
    m.k = j.at("k").get<std::size_t>();
    m.precision = parse_precision(j.at("precision").get<std::string>());
    m.alignment = j.at("alignment").get<std::string>();
    if (m.alignment != "mean-subword") {
      throw ConfigError("unsupported subword alignment '" + m.alignment + "'");
    }
    for (const auto& p : j.at("post_ids")) {
      ArchiveEntry e{p.at("post_id").get<std::string>(), p.at("offset").get<std::uint64_t>()};
      archive.index_.emplace(e.post_id, m.posts.size());
      m.posts.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError("malformed archive manifest in " + dir.string() + ": " + e.what());
  }
  return archive;
}

void check_archive_dims(const ArchiveManifest& manifest, std::size_t d, std::size_t k) {
  if (manifest.d != d) {
    throw ConfigError("embedding archive has d = " + std::to_string(manifest.d) +
                      " but the run is configured for d = " + std::to_string(d));
  }
  if (manifest.k != k) {
    throw ConfigError("embedding archive declares " + std::to_string(manifest.k) +
                      " words per post but the run is configured for k = " + std::to_string(k));
  }
}

EmbeddingMatrix EmbeddingArchive::load(const std::string& post_id, std::size_t expected_d,
                                       std::size_t expected_k) const {
  check_archive_dims(manifest_, expected_d, expected_k);
  auto it = index_.find(post_id);
  if (it == index_.end()) {
    throw LookupError("post '" + post_id + "' not found in embedding archive " + dir_.string());
  }
  const auto d = manifest_.d, k = manifest_.k;
  std::ifstream bin(dir_ / "embeddings.bin", std::ios::binary);
  if (!bin) throw ConfigError("embedding archive " + dir_.string() + " has no embeddings.bin");
  bin.seekg(static_cast<std::streamoff>(manifest_.posts[it->second].offset));
  std::vector<double> cls, cols;
  const bool ok = manifest_.precision == Precision::f32
                      ? detail::read_f32(bin, d, cls) && detail::read_f32(bin, d * k, cols)
                      : detail::read_f64(bin, d, cls) && detail::read_f64(bin, d * k, cols);
  if (!ok) throw ParseError("embedding archive truncated at post '" + post_id + "'");

  std::vector<double> rows(d * k);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t r = 0; r < d; ++r) rows[r * k + c] = cols[c * d + r];
  return {num::Tensor::matrix(d, k, std::move(rows)), num::Tensor::vector(std::move(cls))};
}

std::vector<std::vector<double>> mean_subword_alignment(
    std::span<const std::vector<double>> subwords, std::span<const std::size_t> word_of_subword,
    std::size_t n_words) {
  if (subwords.size() != word_of_subword.size()) {
    throw DimensionError("mean_subword_alignment: " + std::to_string(subwords.size()) +
                         " subword vectors but " + std::to_string(word_of_subword.size()) +
                         " word indices");
  }
  const std::size_t d = subwords.empty() ? 0 : subwords[0].size();
  std::vector<std::vector<double>> words(n_words, std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(n_words, 0);
  for (std::size_t j = 0; j < subwords.size(); ++j) {
    const auto w = word_of_subword[j];
    if (w >= n_words) throw DomainError("subword mapped to word " + std::to_string(w));
    if (subwords[j].size() != d) throw DimensionError("ragged subword vectors");
    for (std::size_t r = 0; r < d; ++r) words[w][r] += subwords[j][r];
    ++counts[w];
  }
  for (std::size_t w = 0; w < n_words; ++w) {
    if (counts[w] == 0) continue;
    for (auto& v : words[w]) v /= static_cast<double>(counts[w]);
  }
  return words;
}

PrecomputedEncoder::PrecomputedEncoder(EmbeddingArchive archive, std::size_t d, std::size_t k)
    : archive_(std::move(archive)), d_(d), k_(k) {
  check_archive_dims(archive_.manifest(), d, k);
}

EmbeddingMatrix PrecomputedEncoder::encode(const text::TokenizedPost& post) const {
  return archive_.load(post.post_id, d_, k_);
}

}  // namespace xdd::enc
