#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "stub_llm.hpp"
#include "synthetic.hpp"
#include "xdd/cli.hpp"

using namespace xdd;
using nlohmann::json;
using xdd::testing::TempDir;

namespace {

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

Invocation run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "xdd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Invocation r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> rows;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) rows.push_back(json::parse(line));
  }
  return rows;
}

// Synthetic corpus on disk plus a config that trains on it in a few seconds.
struct Workspace {
  TempDir dir{"cli"};
  xdd::testing::SyntheticCorpus corpus = xdd::testing::make_synthetic_corpus(42, 90, 30);

  Workspace() {
    xdd::testing::write_corpus_tsv(dir / "train.tsv", corpus.train);
    xdd::testing::write_corpus_tsv(dir / "val.tsv", corpus.val);
    json cfg = {{"train_data", "train.tsv"},
                {"val_data", "val.tsv"},
                {"checkpoint_dir", "ck"},
                {"model", {{"d", 16}, {"u", 8}, {"k", 24}}},
                {"training",
                 {{"seed", 3},
                  {"pretune", {{"epochs", 2}}},
                  {"head_frozen", {{"epochs", 30}}},
                  {"end_to_end", {{"epochs", 1}}}}}};
    std::ofstream(dir / "run.json") << cfg.dump(2);
  }
  std::string config() const { return (dir / "run.json").string(); }
  std::filesystem::path ck(const std::string& phase) const { return dir / "ck" / phase; }
};

Workspace& trained() {
  static Workspace ws;
  static const int code = run_cli({"--config", ws.config(), "train"}).code;
  REQUIRE(code == cli::kExitOk);
  return ws;
}

}  // namespace

TEST_CASE("train runs the protocol and writes every artifact") {
  auto& ws = trained();
  for (const char* phase : {"pretune", "head_frozen", "end_to_end"}) {
    CHECK(std::filesystem::exists(ws.ck(phase) / "manifest.json"));
    const auto report = json::parse(xdd::testing::read_file(ws.ck(phase) / "report.json"));
    CHECK(report.at("phase") == phase);
    CHECK(report.at("config_echo").at("model").at("d") == 16);
  }
  CHECK(std::filesystem::exists(ws.ck("final") / "params.bin"));
}

TEST_CASE("eval on the training split after training") {
  auto& ws = trained();
  TempDir out("eval");
  const auto r = run_cli({"--config", ws.config(), "eval", "--checkpoint", ws.ck("final").string(),
                          "--data", (ws.dir / "train.tsv").string(), "--report",
                          (out / "report.json").string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("Macro-F1") != std::string::npos);
  const auto report = json::parse(xdd::testing::read_file(out / "report.json"));
  CHECK(report.at("posts") == 90);
  CHECK(report.at("accuracy").get<double>() >= 0.95);
  CHECK(report.at("config").at("training").at("seed") == 3);
}

TEST_CASE("eval with oracle predictions scores 1.0") {
  auto& ws = trained();
  TempDir dir("oracle");
  {
    std::ofstream preds(dir / "preds.jsonl");
    for (const auto& p : ws.corpus.val) {
      preds << json{{"pid", p.post.post_id}, {"class", text::canonical_name(*p.post.label)}}.dump()
            << '\n';
    }
  }
  const auto r = run_cli({"--config", ws.config(), "eval", "--predictions",
                          (dir / "preds.jsonl").string(), "--report", (dir / "r.json").string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto report = json::parse(xdd::testing::read_file(dir / "r.json"));
  for (const char* key : {"accuracy", "precision_macro", "recall_macro", "macro_f1"}) {
    CHECK(report.at(key).get<double>() == 1.0);
  }
}

TEST_CASE("eval on an empty dataset is a domain error") {
  auto& ws = trained();
  TempDir dir("empty");
  std::ofstream(dir / "empty.tsv") << "pid\ttext\tlabel\n";
  const auto r = run_cli({"--config", ws.config(), "eval", "--checkpoint", ws.ck("final").string(),
                          "--data", (dir / "empty.tsv").string()});
  CHECK(r.code == cli::kExitNumerical);
  CHECK(r.err.find("empty") != std::string::npos);
}

TEST_CASE("eval rejects a checkpoint whose dimensions differ from the config") {
  auto& ws = trained();
  TempDir dir("mismatch");
  auto cfg = json::parse(xdd::testing::read_file(ws.dir / "run.json"));
  cfg["model"]["d"] = 24;
  cfg["train_data"] = (ws.dir / "train.tsv").string();
  cfg["val_data"] = (ws.dir / "val.tsv").string();
  std::ofstream(dir / "run.json") << cfg.dump();
  const auto r = run_cli({"--config", (dir / "run.json").string(), "eval", "--checkpoint",
                          ws.ck("final").string()});
  CHECK(r.code == cli::kExitConfig);
}

TEST_CASE("explain writes full JSON and truncates only the display") {
  auto& ws = trained();
  TempDir dir("explain");
  const auto& post = ws.corpus.train.front().post;
  const auto r = run_cli({"--config", ws.config(), "explain", "--checkpoint",
                          ws.ck("final").string(), "--text", post.text, "--top", "2", "--output",
                          (dir / "e.jsonl").string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto rows = read_jsonl(dir / "e.jsonl");
  REQUIRE(rows.size() == 1);
  const auto& pairs = rows[0].at("explanation");
  CHECK(pairs.size() > 2);
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    CHECK(pairs[i - 1].at("weight").get<double>() >= pairs[i].at("weight").get<double>());
  }
  // Display line: pid, class, then a two-pair map.
  const auto brace = r.out.find('{');
  REQUIRE(brace != std::string::npos);
  const auto display = json::parse(r.out.substr(brace));
  CHECK(display.size() == 2);
}

TEST_CASE("explain on a stopword-only post exits with a data error") {
  auto& ws = trained();
  const auto r = run_cli({"--config", ws.config(), "explain", "--checkpoint",
                          ws.ck("final").string(), "--text", "I am, and it is the."});
  CHECK(r.code == cli::kExitData);
  const auto ok = run_cli({"--config", ws.config(), "explain", "--checkpoint",
                           ws.ck("final").string(), "--text", "I am, and it is the.",
                           "--allow-degenerate"});
  CHECK(ok.code == cli::kExitOk);
}

TEST_CASE("augment offline on three posts") {
  auto& ws = trained();
  TempDir dir("augment");
  std::vector<text::RawPost> posts;
  for (std::size_t i = 0; i < 3; ++i) posts.push_back(ws.corpus.val[i].post);
  {
    std::ofstream tsv(dir / "three.tsv");
    text::write_tsv(tsv, posts);
  }
  REQUIRE(run_cli({"--config", ws.config(), "explain", "--checkpoint", ws.ck("final").string(),
                   "--input", (dir / "three.tsv").string(), "--output",
                   (dir / "e.jsonl").string()})
              .code == cli::kExitOk);
  for (const char* name : {"a.jsonl", "b.jsonl"}) {
    const auto r = run_cli({"augment", "--explanations", (dir / "e.jsonl").string(), "--offline",
                            "--variant", "advanced", "--output", (dir / name).string()});
    CHECK(r.code == cli::kExitOk);
  }
  CHECK(xdd::testing::read_file(dir / "a.jsonl") == xdd::testing::read_file(dir / "b.jsonl"));
  const auto rows = read_jsonl(dir / "a.jsonl");
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    CHECK(row.at("variant") == "advanced");
    CHECK(row.contains("example_id"));
    const auto cls = row.at("class").get<std::string>();
    CHECK(row.at("prompt").get<std::string>().find("\"class\": \"" + cls + "\"") != std::string::npos);
    CHECK(row.at("commentary").get<std::string>().find(cls) != std::string::npos);
  }
}

TEST_CASE("augment against a stub with one failure in three") {
  auto& ws = trained();
  TempDir dir("augment-online");
  std::vector<text::RawPost> posts;
  for (std::size_t i = 0; i < 3; ++i) posts.push_back(ws.corpus.val[i].post);
  {
    std::ofstream tsv(dir / "three.tsv");
    text::write_tsv(tsv, posts);
  }
  REQUIRE(run_cli({"--config", ws.config(), "explain", "--checkpoint", ws.ck("final").string(),
                   "--input", (dir / "three.tsv").string(), "--output",
                   (dir / "e.jsonl").string()})
              .code == cli::kExitOk);

  xdd::testing::StubLlm stub;
  stub.fail_when_prompt_contains(posts[1].text, 400);
  ::setenv("XDD_CLI_TEST_TOKEN", "tok-cli-123", 1);
  const auto r = run_cli({"-v", "augment", "--explanations", (dir / "e.jsonl").string(),
                          "--endpoint", stub.endpoint(), "--model", "stub", "--token-env",
                          "XDD_CLI_TEST_TOKEN", "--output", (dir / "c.jsonl").string()});
  ::unsetenv("XDD_CLI_TEST_TOKEN");
  CHECK(r.code != cli::kExitOk);
  CHECK(read_jsonl(dir / "c.jsonl").size() == 2);
  CHECK(r.err.find("augmented 2/3") != std::string::npos);
  CHECK(r.err.find(posts[1].post_id) != std::string::npos);
  CHECK(r.out.find("tok-cli-123") == std::string::npos);
  CHECK(r.err.find("tok-cli-123") == std::string::npos);
}

TEST_CASE("config validation names the field") {
  TempDir dir("badcfg");
  std::ofstream(dir / "run.json") << R"({"train_data": "missing.tsv", "val_data": "missing.tsv"})";
  const auto r = run_cli({"--config", (dir / "run.json").string(), "train"});
  CHECK(r.code == cli::kExitConfig);
  CHECK(r.err.find("train_data") != std::string::npos);

  std::ofstream(dir / "typo.json") << R"({"trian_data": "x"})";
  const auto typo = run_cli({"--config", (dir / "typo.json").string(), "train"});
  CHECK(typo.code == cli::kExitConfig);
  CHECK(typo.err.find("trian_data") != std::string::npos);

  CHECK(run_cli({"train"}).code == cli::kExitConfig);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitConfig);
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
}

TEST_CASE("a single phase needs its predecessor") {
  Workspace ws;
  const auto r = run_cli({"--config", ws.config(), "train", "--phase", "head_frozen"});
  CHECK(r.code == cli::kExitConfig);
  CHECK(r.err.find("pretune") != std::string::npos);
}

TEST_CASE("gradcheck passes, fails under fault injection, and lists every component") {
  TempDir dir("gradcheck");
  const auto ok = run_cli({"gradcheck", "--instances", "5", "--report", (dir / "g.json").string()});
  CHECK(ok.code == cli::kExitOk);
  const auto report = json::parse(xdd::testing::read_file(dir / "g.json"));
  std::vector<std::string> names;
  for (const auto& c : report.at("components")) names.push_back(c.at("name").get<std::string>());
  for (const char* want : {"affine", "tanh", "softmax_cross_entropy", "lstm_forward_direction",
                           "lstm_backward_direction", "attention_score", "masked_softmax",
                           "attention_pooling", "pretune_pooler"}) {
    CHECK_MESSAGE(std::find(names.begin(), names.end(), want) != names.end(), want);
    CHECK(ok.out.find(want) != std::string::npos);
  }
  const auto bad = run_cli({"gradcheck", "--instances", "3", "--inject-fault", "1.01"});
  CHECK(bad.code == cli::kExitNumerical);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("the installed binary maps errors to exit codes") {
  const std::string cli = XDD_CLI_PATH;
  const auto status = [&](const std::string& args) {
    const int raw = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("--help") == 0);
  CHECK(status("train --train-data /nonexistent.tsv") == cli::kExitConfig);
  CHECK(status("gradcheck --instances 2") == 0);
  CHECK(status("gradcheck --instances 2 --inject-fault 2") == cli::kExitNumerical);
}
