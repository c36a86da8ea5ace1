#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "json.hpp"
#include "synthetic.hpp"
#include "xdd/checkpoint.hpp"
#include "xdd/error.hpp"
#include "xdd/trainer.hpp"

using namespace xdd;
using xdd::testing::TempDir;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d = 10;
  cfg.u = 5;
  cfg.k = 16;
  return cfg;
}

struct EnvGuard {
  explicit EnvGuard(const char* value) { ::setenv("SOURCE_DATE_EPOCH", value, 1); }
  ~EnvGuard() { ::unsetenv("SOURCE_DATE_EPOCH"); }
};

nlohmann::json read_manifest(const std::filesystem::path& dir) {
  return nlohmann::json::parse(xdd::testing::read_file(dir / "manifest.json"));
}

void write_manifest(const std::filesystem::path& dir, const nlohmann::json& j) {
  std::ofstream(dir / "manifest.json", std::ios::trunc) << j.dump(2);
}

}  // namespace

TEST_CASE("round trip keeps predictions and explanation order") {
  TempDir dir("ckpt");
  const auto corpus = xdd::testing::make_synthetic_corpus(4, 30, 30);
  const auto data = xdd::testing::encode_corpus(corpus, small_config().k);
  auto model = Model::create(small_config(), data.vocab, 3);
  save_checkpoint(dir.path(), model, {"head_frozen", 3, {{"note", "x"}}});
  CHECK(checkpoint_exists(dir.path()));

  const auto loaded = load_checkpoint(dir.path());
  CHECK(loaded.meta.phase == "head_frozen");
  CHECK(loaded.meta.seed == 3);
  CHECK(loaded.meta.config_echo.at("note") == "x");
  CHECK(loaded.model.vocab.tokens() == model.vocab.tokens());

  const auto before = model.all_params();
  const auto after = loaded.model.all_params();
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(before[i].name == after[i].name);
    const auto& a = before[i].tensor.values();
    const auto& b = after[i].tensor.values();
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK(std::abs(a[j] - b[j]) <= 1e-6 * std::max(1.0, std::abs(a[j])));
    }
  }

  for (const auto& post : data.val) {
    const auto x = heads::predict_with_explanation(post, *model.encoder, model.head, true);
    const auto y = heads::predict_with_explanation(post, *loaded.model.encoder, loaded.model.head, true);
    CHECK(x.predicted_class == y.predicted_class);
    REQUIRE(x.pairs.size() == y.pairs.size());
    for (std::size_t i = 0; i < x.pairs.size(); ++i) {
      CHECK(x.pairs[i].token_index == y.pairs[i].token_index);
    }
  }

  // A second save of the reloaded model is byte-identical.
  TempDir again("ckpt-again");
  {
    EnvGuard env("0");
    save_checkpoint(dir.path(), model, {"head_frozen", 3, {}});
    save_checkpoint(again.path(), loaded.model, {"head_frozen", 3, {}});
  }
  CHECK(xdd::testing::read_file(dir / "params.bin") == xdd::testing::read_file(again / "params.bin"));
}

TEST_CASE("manifest layout and pinned timestamp") {
  TempDir dir("manifest");
  const auto model = Model::zeros(small_config(), text::Vocabulary());
  {
    EnvGuard env("1700000000");
    save_checkpoint(dir.path(), model, {"pretune", 1, {}});
  }
  const auto m = read_manifest(dir.path());
  CHECK(m.at("format_version") == kCheckpointFormatVersion);
  CHECK(m.at("created_at") == "2023-11-14T22:13:20Z");
  CHECK(m.at("d") == 10);
  CHECK(m.at("k") == 16);
  CHECK(m.at("u") == 5);
  CHECK(m.at("class_names") ==
        nlohmann::json({"NOT_DEPRESSED", "MODERATELY_DEPRESSED", "SEVERELY_DEPRESSED"}));
  std::size_t expected_offset = 0;
  for (const auto& p : m.at("params")) {
    CHECK(p.at("offset").get<std::size_t>() == expected_offset);
    std::size_t n = 1;
    for (auto s : p.at("shape")) n *= s.get<std::size_t>();
    expected_offset += 4 * n;
  }
  CHECK(std::filesystem::file_size(dir / "params.bin") == expected_offset);
  CHECK(load_checkpoint(dir.path()).created_at == "2023-11-14T22:13:20Z");
}

TEST_CASE("corrupt checkpoints are rejected") {
  TempDir dir("corrupt");
  const auto model = Model::zeros(small_config(), text::Vocabulary());
  save_checkpoint(dir.path(), model, {"pretune", 1, {}});
  const auto good = read_manifest(dir.path());

  auto wrong_version = good;
  wrong_version["format_version"] = 99;
  write_manifest(dir.path(), wrong_version);
  CHECK_THROWS_AS(load_checkpoint(dir.path()), ConfigError);

  auto wrong_shape = good;
  wrong_shape["params"][0]["shape"][0] = 999;
  write_manifest(dir.path(), wrong_shape);
  CHECK_THROWS(load_checkpoint(dir.path()));

  write_manifest(dir.path(), good);
  std::filesystem::resize_file(dir / "params.bin", 8);
  CHECK_THROWS_AS(load_checkpoint(dir.path()), ParseError);

  std::ofstream(dir / "manifest.json", std::ios::trunc) << "{not json";
  CHECK_THROWS_AS(load_checkpoint(dir.path()), ParseError);

  CHECK_FALSE(checkpoint_exists(dir / "nowhere"));
  CHECK_THROWS_AS(load_checkpoint(dir / "nowhere"), ConfigError);
}
