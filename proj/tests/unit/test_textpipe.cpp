#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "synthetic.hpp"
#include "xdd/augment.hpp"
#include "xdd/error.hpp"
#include "xdd/textpipe.hpp"

using namespace xdd;
using namespace xdd::text;
using Words = std::vector<std::string>;

TEST_CASE("class labels are a bijection between index and name") {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const auto label = label_from_index(i);
    CHECK(index_of(label) == i);
    CHECK(parse_canonical(canonical_name(label)) == label);
  }
  CHECK(canonical_name(ClassLabel::severely_depressed) == "SEVERELY_DEPRESSED");
  CHECK_FALSE(parse_canonical("severe").has_value());
  CHECK_THROWS_AS(label_from_index(3), DomainError);
}

TEST_CASE("label aliases") {
  const auto aliases = LabelAliases::defaults();
  CHECK(aliases.resolve("severe") == ClassLabel::severely_depressed);
  CHECK(aliases.resolve("  Moderate ") == ClassLabel::moderately_depressed);
  CHECK(aliases.resolve("not depression") == ClassLabel::not_depressed);
  CHECK(aliases.resolve("NOT_DEPRESSED") == ClassLabel::not_depressed);
  CHECK_FALSE(aliases.resolve("mild").has_value());
  CHECK_FALSE(LabelAliases::canonical_only().resolve("severe").has_value());
}

TEST_CASE("tokenize") {
  CHECK(tokenize("I am fatigued.") == Words{"i", "am", "fatigued", "."});
  CHECK(tokenize("").empty());
  CHECK(tokenize("Day 19 on antidepressants,") == Words{"day", "19", "on", "antidepressants", ","});
  CHECK(tokenize("I don't know!!") == Words{"i", "don't", "know", "!", "!"});
  CHECK(tokenize("see https://example.com/a?b=1 now") ==
        Words{"see", "https://example.com/a?b=1", "now"});
  CHECK(tokenize("ÉCOLE Straße") == Words{"école", "straße"});
  const auto emoji = tokenize("so tired \xF0\x9F\x98\xA9 today");
  CHECK(emoji.size() == 4);
  CHECK(emoji[2] == "\xF0\x9F\x98\xA9");
}

TEST_CASE("tokenize round trip keeps the token multiset") {
  xdd::num::Rng rng(4);
  const Words pieces = {"Hello", "world", "it's", ",", "fine", "...", "42", "ok?", "I'm", "so"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    for (int i = 0; i < 12; ++i) text += pieces[rng.below(pieces.size())] + " ";
    auto first = tokenize(text);
    std::string joined;
    for (const auto& t : first) joined += t + " ";
    auto second = tokenize(joined);
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    CHECK(first == second);
  }
}

TEST_CASE("stopword list") {
  const auto& sw = StopwordList::bundled();
  CHECK(sw.size() >= 120);
  CHECK(sw.contains("i"));
  CHECK(sw.contains("am"));
  CHECK_FALSE(sw.contains("fatigued"));
  const auto custom = StopwordList::parse("# comment\nfoo\n\nbar  \n");
  CHECK(custom.size() == 2);
  CHECK(custom.contains("bar"));
}

TEST_CASE("build_mask") {
  const auto& sw = StopwordList::bundled();
  const Words words = {"i", "am", "fatigued", "."};
  CHECK(build_mask(words, sw) == std::vector<std::uint8_t>{0, 0, 1, 0});
  const Words specials = {"[CLS]", "word", "[PAD]", "[PAD]", "19", "?!"};
  CHECK(build_mask(specials, sw) == std::vector<std::uint8_t>{0, 1, 0, 0, 1, 0});
}

TEST_CASE("the worked severe example keeps its explanation words eligible") {
  // The other two listings contain subword fragments ("res", "ings") that
  // are not words of their posts, so only the severe one is checked whole.
  const auto& sw = StopwordList::bundled();
  const auto bank = augment::ExampleBank::bundled();
  const auto* entry = bank.select(ClassLabel::severely_depressed);
  REQUIRE(entry != nullptr);
  const auto words = tokenize(entry->post);
  const auto mu = build_mask(words, sw);
  const auto eligible = [&](const std::string& w) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (words[i] == w && mu[i] == 1) return true;
    }
    return false;
  };
  CHECK(eligible("failure"));
  CHECK(eligible("fatigued"));
  CHECK(eligible("energy"));
  for (const auto& pair : entry->explanation) CHECK_MESSAGE(eligible(pair.word), pair.word);
}

TEST_CASE("vocabulary") {
  const std::vector<Words> corpus = {{"b", "a", "c"}, {"a", "b"}, {"a"}};
  const auto vocab = Vocabulary::build(corpus, 2);
  CHECK(vocab.tokens() == Words{"[PAD]", "[CLS]", "[UNK]", "a", "b"});
  CHECK(vocab.id("c") == kUnkId);
  CHECK(vocab.id("[PAD]") == kPadId);
  const auto again = Vocabulary::from_tokens(vocab.tokens());
  CHECK(again.tokens() == vocab.tokens());
  CHECK(again.id("b") == 4);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "b"}), ParseError);
}

TEST_CASE("encode_sequence layout") {
  const auto& sw = StopwordList::bundled();
  const std::vector<Words> corpus = {{"tired", "and", "alone"}};
  const auto vocab = Vocabulary::build(corpus);
  const Words words = {"tired", "and", "alone"};
  const auto post = encode_sequence(words, vocab, 6, sw);
  CHECK(post.words == Words{"[CLS]", "tired", "and", "alone", "[PAD]", "[PAD]"});
  CHECK(post.token_ids[0] == kClsId);
  CHECK(post.token_ids[4] == kPadId);
  CHECK(post.mu == std::vector<std::uint8_t>{0, 1, 0, 1, 0, 0});

  const Words unknown = {"zebra"};
  const auto u = encode_sequence(unknown, vocab, 3, sw);
  CHECK(u.token_ids[1] == kUnkId);
  CHECK(u.mu[1] == 1);

  CHECK_THROWS_AS(encode_sequence(words, vocab, 1, sw), ConfigError);
}

TEST_CASE("encode_sequence truncates at the head") {
  const auto& sw = StopwordList::bundled();
  Words words;
  for (int i = 0; i < 300; ++i) words.push_back("w" + std::to_string(i));
  const auto post = encode_sequence(words, Vocabulary(), 200, sw);
  CHECK(post.length() == 200);
  CHECK(post.words[1] == "w0");
  CHECK(post.words[199] == "w198");
}

TEST_CASE("property: encoded posts have length k and masked specials") {
  const auto corpus = xdd::testing::make_synthetic_corpus(5, 40, 10);
  const auto& sw = StopwordList::bundled();
  for (std::size_t k : {2u, 5u, 12u, 24u, 40u}) {
    const auto enc = xdd::testing::encode_corpus(corpus, k);
    for (const auto& post : enc.train) {
      CHECK(post.words.size() == k);
      CHECK(post.token_ids.size() == k);
      CHECK(post.mu.size() == k);
      for (std::size_t i = 0; i < k; ++i) {
        if (post.token_ids[i] == kPadId || post.token_ids[i] == kClsId) CHECK(post.mu[i] == 0);
      }
      CHECK(build_mask(post.words, sw) == post.mu);
    }
  }
}

TEST_CASE("TSV dataset parsing") {
  std::istringstream in(
      "pid\ttext\tlabel\n"
      "a\tfirst\\tpost\tNOT_DEPRESSED\n"
      "b\tsecond\tmoderate\n"
      "c\tthird\tSEVERELY_DEPRESSED\n");
  const auto ds = parse_tsv(in, LabelAliases::defaults());
  REQUIRE(ds.size() == 3);
  CHECK(ds.rows[0].text == "first\tpost");
  CHECK(ds.rows[1].label == ClassLabel::moderately_depressed);
  CHECK(ds.class_counts == std::array<std::size_t, 3>{1, 1, 1});

  std::istringstream severe("pid\ttext\tlabel\nx\tsome text\tsevere\n");
  CHECK(parse_tsv(severe, LabelAliases::defaults()).rows[0].label ==
        ClassLabel::severely_depressed);
}

TEST_CASE("TSV errors cite the line") {
  std::istringstream bad_label("pid\ttext\tlabel\na\tok\tNOT_DEPRESSED\nb\ttext\tmild\n");
  try {
    (void)parse_tsv(bad_label, LabelAliases::defaults(), "x.tsv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("x.tsv: row 3") != std::string::npos);
  }
  std::istringstream short_row("pid\ttext\tlabel\na\tonly-two-columns\n");
  CHECK_THROWS_AS(parse_tsv(short_row, LabelAliases::defaults()), ParseError);
}

TEST_CASE("JSONL dataset parsing") {
  std::istringstream in(
      R"({"pid": "1", "text": "hello", "label": "NOT_DEPRESSED"})"
      "\n"
      R"({"pid": "2", "text": "bye", "label": "severe"})"
      "\n");
  const auto ds = parse_jsonl(in, LabelAliases::defaults());
  REQUIRE(ds.size() == 2);
  CHECK(ds.rows[1].label == ClassLabel::severely_depressed);
  std::istringstream bad(R"({"pid": "1", "text": 3, "label": "NOT_DEPRESSED"})");
  CHECK_THROWS_AS(parse_jsonl(bad, LabelAliases::defaults()), ParseError);
}

TEST_CASE("TSV write and reload round trip") {
  const auto corpus = xdd::testing::make_synthetic_corpus(2, 9, 3);
  const auto rows = xdd::testing::raw_posts(corpus.train);
  std::stringstream buffer;
  write_tsv(buffer, rows);
  const auto ds = parse_tsv(buffer, LabelAliases::canonical_only());
  REQUIRE(ds.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(ds.rows[i].post_id == rows[i].post_id);
    CHECK(ds.rows[i].text == rows[i].text);
    CHECK(ds.rows[i].label == rows[i].label);
  }
  CHECK(escape_tsv_field("a\tb\\c\n") == "a\\tb\\\\c\\n");
  CHECK(unescape_tsv_field(escape_tsv_field("x\ty\\z\r")) == "x\ty\\z\r");
}

TEST_CASE("format from extension") {
  CHECK(format_from_extension("a/b.jsonl") == DatasetFormat::jsonl);
  CHECK(format_from_extension("a/b.tsv") == DatasetFormat::tsv);
  CHECK(parse_dataset_format("jsonl") == DatasetFormat::jsonl);
  CHECK_THROWS_AS(parse_dataset_format("csv"), ConfigError);
}
