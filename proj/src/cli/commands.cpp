#include "cli/commands.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <map>
#include <sstream>

#include "xdd/checkpoint.hpp"
#include "xdd/error.hpp"
#include "xdd/gradcheck_suite.hpp"
#include "xdd/metrics.hpp"

namespace xdd::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

text::DatasetFormat dataset_format(const RunConfig& cfg, const fs::path& path) {
  if (cfg.format == "auto") return text::format_from_extension(path);
  return text::parse_dataset_format(cfg.format);
}

text::StopwordList stopwords_for(const RunConfig& cfg) {
  if (cfg.stopwords.empty()) return text::StopwordList::bundled();
  return text::StopwordList::from_file(cfg.stopwords);
}

text::Dataset load(const RunConfig& cfg, const fs::path& path) {
  return text::load_dataset(path, dataset_format(cfg, path));
}

std::vector<text::TokenizedPost> encode_all(const Model& model, const text::Dataset& ds,
                                            const text::StopwordList& stopwords) {
  return text::encode_posts(ds.rows, model.vocab, model.config.k, stopwords);
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  return f;
}

void check_model_matches(const RunConfig& cfg, const ModelConfig& saved) {
  if (!cfg.model_given) return;
  if (cfg.model.d != saved.d) {
    throw ConfigError(fmt::format("model.d: config has {} but the checkpoint was trained with {}",
                                  cfg.model.d, saved.d));
  }
  if (cfg.model.k != saved.k) {
    throw ConfigError(fmt::format("model.k: config has {} but the checkpoint was trained with {}",
                                  cfg.model.k, saved.k));
  }
}

LoadedCheckpoint load_for(const RunConfig& cfg, const fs::path& dir) {
  if (!checkpoint_exists(dir)) throw ConfigError("no checkpoint at " + dir.string());
  std::optional<fs::path> archive;
  if (cfg.model_given && !cfg.model.archive.empty()) archive = cfg.model.archive;
  auto loaded = load_checkpoint(dir, archive);
  check_model_matches(cfg, loaded.model.config);
  return loaded;
}

std::optional<train::Phase> prerequisite(train::Phase phase) {
  switch (phase) {
    case train::Phase::pretune: return std::nullopt;
    case train::Phase::head_frozen: return train::Phase::pretune;
    case train::Phase::end_to_end: return train::Phase::head_frozen;
  }
  return std::nullopt;
}

void print_phase(std::ostream& out, const train::TrainReport& r) {
  const auto& best = r.best();
  out << fmt::format("{}: best epoch {}/{}, val accuracy {:.3f}, val macro-F1 {:.3f} -> {}\n",
                     train::to_string(r.phase), r.best_epoch, r.epochs.size(), best.val.accuracy,
                     best.val.macro_f1, r.checkpoint_path);
}

}  // namespace

int cmd_train(const RunConfig& cfg, const TrainArgs& args, std::ostream& out) {
  cfg.validate_for_training();
  const auto stopwords = stopwords_for(cfg);
  const auto train_ds = load(cfg, cfg.train_data);
  const auto val_ds = load(cfg, cfg.val_data);
  const json echo = cfg.to_json();

  const auto fresh_model = [&] {
    std::vector<std::vector<std::string>> corpus;
    corpus.reserve(train_ds.rows.size());
    for (const auto& row : train_ds.rows) corpus.push_back(text::tokenize(row.text));
    return Model::create(cfg.model, text::Vocabulary::build(corpus, cfg.min_freq),
                         cfg.training.seed);
  };

  if (!args.phase) {
    Model model = fresh_model();
    const auto train = encode_all(model, train_ds, stopwords);
    const auto val = encode_all(model, val_ds, stopwords);
    train::ProtocolOptions options{cfg.checkpoint_dir, echo};
    const auto reports = train::run_full_protocol(model, train, val, cfg.training, options);
    for (const auto& r : reports) print_phase(out, r);
    out << "final model -> " << (cfg.checkpoint_dir / "final").string() << "\n";
    return kExitOk;
  }

  const train::Phase phase = train::parse_phase(*args.phase);
  Model model = [&] {
    const auto before = prerequisite(phase);
    if (!before) return fresh_model();
    const fs::path source =
        args.from ? *args.from : cfg.checkpoint_dir / train::to_string(*before);
    if (!checkpoint_exists(source)) {
      throw ConfigError(fmt::format(
          "phase {} needs a {} checkpoint; none found at {} (run --phase {} first or pass --from)",
          train::to_string(phase), train::to_string(*before), source.string(),
          train::to_string(*before)));
    }
    auto loaded = load_for(cfg, source);
    if (loaded.meta.phase != train::to_string(*before)) {
      spdlog::warn("checkpoint {} is from phase {}, expected {}", source.string(),
                   loaded.meta.phase, train::to_string(*before));
    }
    return std::move(loaded.model);
  }();
  const auto train = encode_all(model, train_ds, stopwords);
  const auto val = encode_all(model, val_ds, stopwords);
  auto report = train::run_phase(phase, model, train, val, cfg.training);
  report.config_echo = echo;
  const fs::path dir = cfg.checkpoint_dir / train::to_string(phase);
  report.checkpoint_path = dir.string();
  train::save_phase(dir, model, report);
  print_phase(out, report);
  return kExitOk;
}

namespace {

// JSON lines of {pid, class}; every dataset post must be covered.
std::map<std::string, text::ClassLabel> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open predictions file " + path.string());
  std::map<std::string, text::ClassLabel> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = fmt::format("{}:{}", path.string(), line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("pid") || !j.contains("class")) {
      throw ParseError(where + ": expected an object with pid and class");
    }
    const auto label = text::parse_canonical(j.at("class").get<std::string>());
    if (!label) throw ParseError(where + ": unknown class " + j.at("class").dump());
    out[j.at("pid").get<std::string>()] = *label;
  }
  return out;
}

}  // namespace

int cmd_eval(const RunConfig& cfg, const EvalArgs& args, std::ostream& out) {
  const fs::path data = args.data ? *args.data : cfg.val_data;
  if (data.empty()) throw ConfigError("data: no dataset given (--data or val_data)");
  const auto ds = load(cfg, data);
  if (ds.rows.empty()) throw DomainError("dataset " + data.string() + " is empty");
  if (ds.unlabeled > 0) {
    throw ParseError(fmt::format("dataset {} has {} unlabeled posts", data.string(), ds.unlabeled));
  }

  metrics::ConfusionMatrix cm;
  json source;
  if (args.predictions) {
    const auto predicted = read_predictions(*args.predictions);
    for (const auto& row : ds.rows) {
      const auto it = predicted.find(row.post_id);
      if (it == predicted.end()) {
        throw LookupError("predictions file has no entry for post '" + row.post_id + "'");
      }
      cm.accumulate(*row.label, it->second);
    }
    source = {{"predictions", args.predictions->string()}};
  } else {
    if (!args.checkpoint) throw ConfigError("checkpoint: required (--checkpoint)");
    const auto loaded = load_for(cfg, *args.checkpoint);
    const auto posts = encode_all(loaded.model, ds, stopwords_for(cfg));
    cm = train::evaluate_xdd(loaded.model, posts);
    source = {{"checkpoint", args.checkpoint->string()}, {"phase", loaded.meta.phase}};
  }

  const auto scores = metrics::macro_scores(cm);
  json confusion = json::array();
  for (std::size_t g = 0; g < text::kNumClasses; ++g) {
    json row = json::array();
    for (std::size_t p = 0; p < text::kNumClasses; ++p) row.push_back(cm.at(g, p));
    confusion.push_back(row);
  }
  const json report = {{"dataset", data.string()},
                       {"posts", ds.rows.size()},
                       {"source", source},
                       {"accuracy", scores.accuracy},
                       {"precision_macro", scores.precision_macro},
                       {"recall_macro", scores.recall_macro},
                       {"macro_f1", scores.macro_f1},
                       {"confusion", confusion},
                       {"config", cfg.to_json()}};
  const metrics::NamedRun run{data.filename().string(), scores};
  out << metrics::comparison_table(std::span(&run, 1));
  if (args.report) open_output(*args.report) << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_explain(const RunConfig& cfg, const ExplainArgs& args, std::ostream& out,
                std::ostream& err) {
  if (args.text.has_value() == args.input.has_value()) {
    throw ConfigError("explain: give exactly one of --text or --input");
  }
  const auto loaded = load_for(cfg, args.checkpoint);
  const auto stopwords = stopwords_for(cfg);
  std::vector<text::RawPost> posts;
  if (args.text) {
    posts.push_back({"text", *args.text, std::nullopt});
  } else {
    posts = load(cfg, *args.input).rows;
  }

  std::optional<std::ofstream> file;
  if (args.output) file = open_output(*args.output);
  std::ostream& json_out = file ? *file : out;
  std::ostream& display = file ? out : err;
  for (const auto& raw : posts) {
    const auto post = loaded.model.encode(raw, stopwords);
    const auto e = heads::predict_with_explanation(post, *loaded.model.encoder,
                                                   loaded.model.head, args.allow_degenerate);
    json_out << heads::explanation_to_json(e) << "\n";
    display << e.post_id << "\t" << text::canonical_name(e.predicted_class) << "\t"
            << heads::format_pairs(e.pairs, args.top) << "\n";
  }
  return kExitOk;
}

int cmd_augment(const RunConfig& cfg, const AugmentArgs& args, std::ostream& out,
                std::ostream& err) {
  std::ifstream in(args.explanations);
  if (!in) throw ParseError("cannot open explanations file " + args.explanations.string());
  const auto variant = augment::parse_prompt_variant(args.variant);
  const auto templates = cfg.templates.empty() ? augment::PromptTemplates::bundled()
                                               : augment::PromptTemplates::from_dir(cfg.templates);
  const auto bank = cfg.bank.empty() ? augment::ExampleBank::bundled()
                                     : augment::ExampleBank::from_file(cfg.bank);
  if (!args.offline) cfg.llm.validate();

  // Records that fail before any request are kept in order with their error.
  std::vector<heads::Explanation> explanations;
  std::vector<std::optional<augment::PromptSpec>> specs;
  std::vector<std::string> errors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    heads::Explanation e;
    try {
      e = heads::explanation_from_json(line);
    } catch (const Error& ex) {
      throw ParseError(fmt::format("{}:{}: {}", args.explanations.string(), line_no, ex.what()));
    }
    try {
      specs.push_back(variant == augment::PromptVariant::base
                          ? augment::build_base_prompt(e.text, e.predicted_class, e.pairs, templates)
                          : augment::build_advanced_prompt(e.text, e.predicted_class, e.pairs,
                                                           bank, templates));
      errors.emplace_back();
    } catch (const ConfigError&) {
      throw;  // a missing bank class affects every post of that class
    } catch (const Error& ex) {
      specs.emplace_back();
      errors.emplace_back(ex.what());
    }
    explanations.push_back(std::move(e));
  }

  std::vector<std::optional<std::string>> commentary(specs.size());
  if (args.offline) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (specs[i]) commentary[i] = augment::offline_render(*specs[i]);
    }
  } else {
    std::vector<augment::PromptSpec> ready;
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (specs[i]) {
        ready.push_back(*specs[i]);
        index.push_back(i);
      }
    }
    const auto results = augment::generate_batch(ready, cfg.llm);
    for (std::size_t r = 0; r < results.size(); ++r) {
      commentary[index[r]] = results[r].commentary;
      if (!results[r].commentary) errors[index[r]] = results[r].error;
    }
  }

  std::optional<std::ofstream> file;
  if (args.output) file = open_output(*args.output);
  std::ostream& sink = file ? *file : out;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    const auto& e = explanations[i];
    if (!commentary[i]) {
      ++failed;
      err << "post '" << e.post_id << "' failed: " << errors[i] << "\n";
      continue;
    }
    nlohmann::ordered_json record;
    record["pid"] = e.post_id;
    record["class"] = std::string(text::canonical_name(e.predicted_class));
    record["variant"] = augment::to_string(variant);
    if (specs[i]->example_id) record["example_id"] = *specs[i]->example_id;
    record["prompt"] = specs[i]->rendered_text;
    record["commentary"] = *commentary[i];
    sink << record.dump() << "\n";
  }
  err << fmt::format("augmented {}/{} posts ({})\n", explanations.size() - failed,
                     explanations.size(), args.offline ? "offline" : "online");
  return failed == 0 ? kExitOk : kExitData;
}

int cmd_gradcheck(const GradcheckArgs& args, std::uint64_t seed, std::ostream& out) {
  verify::SuiteOptions options;
  options.instances = args.instances;
  options.seed = seed;
  if (args.inject_fault) options.check.analytic_scale = *args.inject_fault;
  if (args.min_gradient) options.min_resolvable_gradient = *args.min_gradient;
  const auto report = verify::run_gradcheck_suite(options);

  json components = json::array();
  for (const auto& c : report.components) {
    out << fmt::format("{:<26} max rel error {:.3e}  instances {:>3}  redrawn {:>3}  {}\n", c.name,
                       c.max_rel_error, c.instances, c.unresolvable, c.passed ? "ok" : "FAIL");
    components.push_back({{"name", c.name},
                          {"max_rel_error", c.max_rel_error},
                          {"instances", c.instances},
                          {"redrawn", c.unresolvable},
                          {"worst_param", c.worst_param},
                          {"passed", c.passed}});
  }
  out << fmt::format("gradcheck {} in {:.2f} s (tolerance {:g}, eps {:g}, seed {})\n",
                     report.passed() ? "passed" : "FAILED", report.seconds, options.tolerance,
                     options.check.eps, seed);
  if (args.report) {
    const json j = {{"passed", report.passed()},
                    {"seconds", report.seconds},
                    {"seed", seed},
                    {"tolerance", options.tolerance},
                    {"eps", options.check.eps},
                    {"instances", options.instances},
                    {"min_resolvable_gradient", options.min_resolvable_gradient},
                    {"analytic_scale", options.check.analytic_scale},
                    {"components", components}};
    open_output(*args.report) << j.dump(2) << "\n";
  }
  return report.passed() ? kExitOk : kExitNumerical;
}

}  // namespace xdd::cli
