#include "synthetic.hpp"

#include <array>
#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "xdd/num/random.hpp"

namespace xdd::testing {

namespace {

constexpr std::array<const char*, text::kNumClasses> kKeywords{"sunshine", "restless",
                                                                "hopeless"};

constexpr std::array kContentFiller{"walked", "coffee",  "street", "morning", "phone",
                                    "window", "table",   "music",  "weekend", "bus",
                                    "garden", "kitchen", "paper",  "movie",   "train",
                                    "city",   "dinner",  "shirt",  "email",   "office"};

constexpr std::array kStopwordFiller{"the", "a",    "and",  "to",   "of",   "in",
                                     "it",  "is",   "was",  "with", "on",   "for",
                                     "my",  "this", "that", "at",   "but",  "we"};

SyntheticPost make_post(std::size_t index, text::ClassLabel label, num::Rng& rng,
                        const std::string& prefix) {
  std::string keyword = kKeywords[text::index_of(label)];
  const std::size_t n_filler = 10 + rng.below(11);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n_filler; ++i) {
    if (rng.uniform01() < 0.5) {
      words.emplace_back(kStopwordFiller[rng.below(kStopwordFiller.size())]);
    } else {
      words.emplace_back(kContentFiller[rng.below(kContentFiller.size())]);
    }
  }
  words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)), keyword);
  std::string text;
  for (const auto& w : words) {
    if (!text.empty()) text += ' ';
    text += w;
  }
  SyntheticPost out;
  out.post.post_id = prefix + std::to_string(index);
  out.post.text = std::move(text);
  out.post.label = label;
  out.keyword = std::move(keyword);
  return out;
}

std::vector<SyntheticPost> make_split(std::size_t n, num::Rng& rng, const std::string& prefix) {
  std::vector<SyntheticPost> posts;
  for (std::size_t i = 0; i < n; ++i) {
    posts.push_back(make_post(i, text::label_from_index(i % text::kNumClasses), rng, prefix));
  }
  return posts;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(std::uint64_t seed, std::size_t n_train, std::size_t n_val) {
  num::Rng rng(num::derive_seed(seed, 7));
  SyntheticCorpus c;
  c.train = make_split(n_train, rng, "train-");
  c.val = make_split(n_val, rng, "val-");
  return c;
}

std::vector<text::RawPost> raw_posts(const std::vector<SyntheticPost>& posts) {
  std::vector<text::RawPost> out;
  for (const auto& p : posts) out.push_back(p.post);
  return out;
}

ModelConfig synthetic_model_config() {
  ModelConfig cfg;
  cfg.d = 32;
  cfg.u = 16;
  cfg.k = 24;
  return cfg;
}

EncodedCorpus encode_corpus(const SyntheticCorpus& corpus, std::size_t k) {
  const auto stopwords = text::StopwordList::bundled();
  std::vector<std::vector<std::string>> tokenized;
  for (const auto& p : corpus.train) tokenized.push_back(text::tokenize(p.post.text));
  EncodedCorpus out;
  out.vocab = text::Vocabulary::build(tokenized, 1);
  out.train = text::encode_posts(raw_posts(corpus.train), out.vocab, k, stopwords);
  out.val = text::encode_posts(raw_posts(corpus.val), out.vocab, k, stopwords);
  return out;
}

void write_corpus_tsv(const std::filesystem::path& path, const std::vector<SyntheticPost>& posts) {
  std::ofstream out(path);
  text::write_tsv(out, raw_posts(posts));
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("xdd-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace xdd::testing
