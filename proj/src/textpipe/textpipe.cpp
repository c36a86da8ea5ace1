#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "xdd/error.hpp"
#include "xdd/textpipe.hpp"

namespace xdd::assets {
std::string_view stopwords_en();
}

namespace xdd::text {

namespace {

std::string lower_ascii_trimmed(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(first, last - first + 1));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

ClassLabel label_from_index(std::size_t index) {
  if (index >= kNumClasses) {
    throw DomainError("class index " + std::to_string(index) + " outside {0, 1, 2}");
  }
  return static_cast<ClassLabel>(index);
}

std::string_view canonical_name(ClassLabel c) {
  switch (c) {
    case ClassLabel::not_depressed:
      return "NOT_DEPRESSED";
    case ClassLabel::moderately_depressed:
      return "MODERATELY_DEPRESSED";
    case ClassLabel::severely_depressed:
      return "SEVERELY_DEPRESSED";
  }
  return "UNKNOWN";
}

std::optional<ClassLabel> parse_canonical(std::string_view name) {
  for (auto c : kAllClasses) {
    if (canonical_name(c) == name) return c;
  }
  return std::nullopt;
}

LabelAliases LabelAliases::defaults() {
  LabelAliases a;
  a.add("not depression", ClassLabel::not_depressed);
  a.add("not depressed", ClassLabel::not_depressed);
  a.add("moderate", ClassLabel::moderately_depressed);
  a.add("moderately depressed", ClassLabel::moderately_depressed);
  a.add("severe", ClassLabel::severely_depressed);
  a.add("severely depressed", ClassLabel::severely_depressed);
  return a;
}

void LabelAliases::add(std::string_view alias, ClassLabel label) {
  aliases_[lower_ascii_trimmed(alias)] = label;
}

std::optional<ClassLabel> LabelAliases::resolve(std::string_view token) const {
  const auto key = lower_ascii_trimmed(token);
  for (auto c : kAllClasses) {
    if (lower_ascii_trimmed(canonical_name(c)) == key) return c;
  }
  if (auto it = aliases_.find(key); it != aliases_.end()) return it->second;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

bool is_special_token(std::string_view token) {
  return token == kPadToken || token == kClsToken || token == kUnkToken;
}

const StopwordList& StopwordList::bundled() {
  static const StopwordList list = parse(assets::stopwords_en());
  return list;
}

StopwordList StopwordList::parse(std::string_view contents) {
  StopwordList list;
  std::istringstream in{std::string(contents)};
  std::string line;
  while (std::getline(in, line)) {
    auto word = lower_ascii_trimmed(line);
    if (word.empty() || word[0] == '#') continue;
    list.words_.insert(std::move(word));
  }
  return list;
}

StopwordList StopwordList::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open stopword file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

bool StopwordList::contains(std::string_view word) const {
  return words_.find(std::string(word)) != words_.end();
}

std::vector<std::uint8_t> build_mask(std::span<const std::string> words,
                                     const StopwordList& stopwords) {
  std::vector<std::uint8_t> mu(words.size(), 0);
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    const bool masked = w.empty() || is_special_token(w) || stopwords.contains(w) ||
                        is_punctuation_token(w);
    mu[i] = masked ? 0 : 1;
  }
  return mu;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() {
  for (auto t : {kPadToken, kClsToken, kUnkToken}) {
    ids_.emplace(std::string(t), tokens_.size());
    tokens_.emplace_back(t);
  }
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> corpus,
                             std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& post : corpus) {
    for (const auto& w : post) ++counts[w];
  }
  Vocabulary vocab;
  for (const auto& [word, n] : counts) {
    if (n < min_freq || is_special_token(word)) continue;
    vocab.ids_.emplace(word, vocab.tokens_.size());
    vocab.tokens_.push_back(word);
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 3 || tokens[kPadId] != kPadToken || tokens[kClsId] != kClsToken ||
      tokens[kUnkId] != kUnkToken) {
    throw ParseError("vocabulary must start with the reserved tokens [PAD], [CLS], [UNK]");
  }
  Vocabulary vocab;
  vocab.tokens_.clear();
  vocab.ids_.clear();
  for (auto& t : tokens) {
    if (!vocab.ids_.emplace(t, vocab.tokens_.size()).second) {
      throw ParseError("duplicate vocabulary token '" + t + "'");
    }
    vocab.tokens_.push_back(std::move(t));
  }
  return vocab;
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.find(std::string(token)) != ids_.end();
}

// ---------------------------------------------------------------------------

std::size_t TokenizedPost::eligible_count() const {
  return static_cast<std::size_t>(std::count(mu.begin(), mu.end(), std::uint8_t{1}));
}

TokenizedPost encode_sequence(std::span<const std::string> words, const Vocabulary& vocab,
                              std::size_t k, const StopwordList& stopwords) {
  if (k < 2) throw ConfigError("sequence length k must be at least 2, got " + std::to_string(k));
  TokenizedPost post;
  post.words.reserve(k);
  post.words.emplace_back(kClsToken);
  for (std::size_t i = 0; i < words.size() && post.words.size() < k; ++i) {
    post.words.push_back(words[i]);
  }
  while (post.words.size() < k) post.words.emplace_back(kPadToken);

  post.token_ids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (i == 0) {
      post.token_ids.push_back(kClsId);
    } else if (post.words[i] == kPadToken && i > words.size()) {
      post.token_ids.push_back(kPadId);
    } else {
      post.token_ids.push_back(vocab.id(post.words[i]));
    }
  }
  post.mu = build_mask(post.words, stopwords);
  return post;
}

TokenizedPost encode_post(const RawPost& raw, const Vocabulary& vocab, std::size_t k,
                          const StopwordList& stopwords) {
  const auto words = tokenize(raw.text);
  auto post = encode_sequence(words, vocab, k, stopwords);
  post.post_id = raw.post_id;
  post.label = raw.label;
  post.original_text = raw.text;
  return post;
}

std::vector<TokenizedPost> encode_posts(std::span<const RawPost> posts, const Vocabulary& vocab,
                                        std::size_t k, const StopwordList& stopwords) {
  std::vector<TokenizedPost> out;
  out.reserve(posts.size());
  for (const auto& p : posts) out.push_back(encode_post(p, vocab, k, stopwords));
  return out;
}

}  // namespace xdd::text
