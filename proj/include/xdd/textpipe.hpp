#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace xdd::text {

// ---------------------------------------------------------------------------
// Labels

enum class ClassLabel : std::uint8_t {
  not_depressed = 0,
  moderately_depressed = 1,
  severely_depressed = 2,
};

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<ClassLabel, kNumClasses> kAllClasses = {
    ClassLabel::not_depressed, ClassLabel::moderately_depressed, ClassLabel::severely_depressed};

constexpr std::size_t index_of(ClassLabel c) { return static_cast<std::size_t>(c); }
ClassLabel label_from_index(std::size_t index);
/// NOT_DEPRESSED, MODERATELY_DEPRESSED, SEVERELY_DEPRESSED
std::string_view canonical_name(ClassLabel c);
std::optional<ClassLabel> parse_canonical(std::string_view name);

/// Maps dataset-specific label spellings onto canonical labels. Matching is
/// case-insensitive and ignores surrounding whitespace. Canonical names
/// always resolve.
class LabelAliases {
 public:
  /// Canonical names plus the spellings used by the public shared-task data
  /// ("not depression", "moderate", "severe").
  static LabelAliases defaults();
  static LabelAliases canonical_only() { return LabelAliases{}; }

  void add(std::string_view alias, ClassLabel label);
  std::optional<ClassLabel> resolve(std::string_view token) const;

 private:
  std::map<std::string, ClassLabel, std::less<>> aliases_;
};

// ---------------------------------------------------------------------------
// Tokens

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kClsId = 1;
inline constexpr std::size_t kUnkId = 2;

/// Lowercases, splits on whitespace, splits every punctuation character
/// into its own token, keeps intra-word apostrophes ("don't"), and keeps
/// URLs and emoji clusters as single tokens.
std::vector<std::string> tokenize(std::string_view text);

bool is_special_token(std::string_view token);
/// True when every code point of `token` is punctuation.
bool is_punctuation_token(std::string_view token);

class StopwordList {
 public:
  StopwordList() = default;
  /// The list compiled into the library (data/stopwords_en.txt).
  static const StopwordList& bundled();
  static StopwordList parse(std::string_view contents);
  static StopwordList from_file(const std::filesystem::path& path);

  bool contains(std::string_view word) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

/// Attention-eligibility mask: 0 for special tokens, stopwords and pure
/// punctuation, 1 otherwise (numerals included).
std::vector<std::uint8_t> build_mask(std::span<const std::string> words,
                                     const StopwordList& stopwords);

class Vocabulary {
 public:
  /// Only the reserved tokens.
  Vocabulary();
  /// Tokens seen at least `min_freq` times, ids assigned in lexicographic
  /// order after the reserved ids.
  static Vocabulary build(std::span<const std::vector<std::string>> corpus,
                          std::size_t min_freq = 1);
  /// Rebuilds from the id-ordered token list produced by tokens().
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// ---------------------------------------------------------------------------
// Posts and datasets

struct RawPost {
  std::string post_id;
  std::string text;
  std::optional<ClassLabel> label;
};

struct TokenizedPost {
  std::string post_id;
  std::vector<std::string> words;
  std::vector<std::size_t> token_ids;
  std::vector<std::uint8_t> mu;
  std::optional<ClassLabel> label;
  std::string original_text;

  std::size_t length() const { return words.size(); }
  std::size_t eligible_count() const;
};

/// [CLS] w1 .. w_{k-1} [PAD] ..., truncated at the head. Throws ConfigError
/// when k < 2.
TokenizedPost encode_sequence(std::span<const std::string> words, const Vocabulary& vocab,
                              std::size_t k, const StopwordList& stopwords);
TokenizedPost encode_post(const RawPost& post, const Vocabulary& vocab, std::size_t k,
                          const StopwordList& stopwords);
std::vector<TokenizedPost> encode_posts(std::span<const RawPost> posts, const Vocabulary& vocab,
                                        std::size_t k, const StopwordList& stopwords);

enum class DatasetFormat { tsv, jsonl };
DatasetFormat parse_dataset_format(std::string_view name);
/// .jsonl/.json → jsonl, anything else → tsv.
DatasetFormat format_from_extension(const std::filesystem::path& path);

struct Dataset {
  std::vector<RawPost> rows;
  /// Per-class counts of labeled rows.
  std::array<std::size_t, kNumClasses> class_counts{};
  std::size_t unlabeled = 0;

  std::size_t size() const { return rows.size(); }
};

Dataset parse_tsv(std::istream& in, const LabelAliases& aliases,
                  std::string_view source = "<tsv>");
Dataset parse_jsonl(std::istream& in, const LabelAliases& aliases,
                    std::string_view source = "<jsonl>");
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const LabelAliases& aliases = LabelAliases::defaults());

/// `\t`, `\n`, `\r` and `\\` escapes used in the TSV text column.
std::string escape_tsv_field(std::string_view raw);
std::string unescape_tsv_field(std::string_view escaped);
void write_tsv(std::ostream& out, std::span<const RawPost> rows);

}  // namespace xdd::text
