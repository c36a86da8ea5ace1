#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <ostream>

#include "cli/commands.hpp"
#include "xdd/error.hpp"

namespace xdd::cli {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const LookupError*>(&e) ||
      dynamic_cast<const NoContentWords*>(&e) || dynamic_cast<const TransportError*>(&e) ||
      dynamic_cast<const ProviderError*>(&e)) {
    return kExitData;
  }
  if (dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const OracleError*>(&e)) {
    return kExitNumerical;
  }
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitData;
  return kExitNumerical;
}

namespace {

// Routes library logging to `err` for the duration of one command.
class LogScope {
 public:
  LogScope(std::ostream& err, bool verbose) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    sink->set_pattern("[%l] %v");
    auto logger = std::make_shared<spdlog::logger>("xdd", sink);
    logger->set_level(verbose ? spdlog::level::debug : spdlog::level::info);
    spdlog::set_default_logger(logger);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explainable depression-level classification: train, evaluate, explain."};
  app.name("xdd");
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<fs::path> config_path;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Seed for every random draw (overrides training.seed)");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // Overrides of config-file fields.
  std::optional<fs::path> train_data, val_data, checkpoint_dir, stopwords, bank, templates;
  std::optional<std::string> endpoint, llm_model, token_env;
  std::optional<int> max_tokens, max_attempts;
  std::optional<double> temperature;
  std::optional<std::size_t> concurrency;
  std::optional<long> timeout_ms;

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Run the training protocol or one phase of it");
  train->add_option("--phase", train_args.phase, "pretune, head_frozen or end_to_end")
      ->check(CLI::IsMember({"pretune", "head_frozen", "end_to_end"}));
  train->add_option("--from", train_args.from,
                    "Checkpoint of the preceding phase (default <checkpoint_dir>/<phase>)");
  train->add_option("--train-data", train_data);
  train->add_option("--val-data", val_data);
  train->add_option("--checkpoint-dir", checkpoint_dir);
  train->add_option("--stopwords", stopwords);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a labeled dataset");
  eval->add_option("--checkpoint", eval_args.checkpoint);
  eval->add_option("--data", eval_args.data, "Dataset (default val_data)");
  eval->add_option("--predictions", eval_args.predictions,
                   "Score a JSON-lines file of {pid, class} instead of a model");
  eval->add_option("--report", eval_args.report, "Write the metrics report as JSON");
  eval->add_option("--stopwords", stopwords);

  ExplainArgs explain_args;
  auto* explain = app.add_subcommand("explain", "Classify posts and list word weights");
  explain->add_option("--checkpoint", explain_args.checkpoint)->required();
  explain->add_option("--text", explain_args.text, "A single post");
  explain->add_option("--input", explain_args.input, "Dataset file of posts");
  explain->add_option("--top", explain_args.top, "Pairs shown in the display (JSON keeps all)")
      ->check(CLI::PositiveNumber);
  explain->add_flag("--allow-degenerate", explain_args.allow_degenerate,
                    "Attend every word when a post has no eligible words");
  explain->add_option("--output", explain_args.output, "Write JSON lines here");
  explain->add_option("--stopwords", stopwords);

  AugmentArgs augment_args;
  auto* aug = app.add_subcommand("augment", "Turn explanations into commentary");
  aug->add_option("--explanations", augment_args.explanations, "JSON lines from explain")
      ->required();
  aug->add_option("--variant", augment_args.variant)->check(CLI::IsMember({"base", "advanced"}));
  aug->add_flag("--offline", augment_args.offline, "Template commentary, no network");
  aug->add_option("--output", augment_args.output);
  aug->add_option("--bank", bank, "Example bank JSON");
  aug->add_option("--templates", templates, "Directory with base.txt and advanced.txt");
  aug->add_option("--endpoint", endpoint);
  aug->add_option("--model", llm_model);
  aug->add_option("--token-env", token_env, "Environment variable holding the API token");
  aug->add_option("--temperature", temperature);
  aug->add_option("--max-tokens", max_tokens);
  aug->add_option("--timeout-ms", timeout_ms);
  aug->add_option("--max-attempts", max_attempts);
  aug->add_option("--concurrency", concurrency);

  GradcheckArgs grad_args;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  grad->add_option("--instances", grad_args.instances, "Random instances per component")
      ->check(CLI::PositiveNumber);
  grad->add_option("--inject-fault", grad_args.inject_fault,
                   "Scale analytic gradients by this factor (checker self-test)");
  grad->add_option("--min-gradient", grad_args.min_gradient,
                   "Redraw instances with a nonzero gradient below this (0 disables)");
  grad->add_option("--report", grad_args.report, "Write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  LogScope logs(err, verbose);
  try {
    RunConfig cfg = config_path ? RunConfig::from_file(*config_path) : RunConfig{};
    if (seed) cfg.training.seed = *seed;
    if (train_data) cfg.train_data = *train_data;
    if (val_data) cfg.val_data = *val_data;
    if (checkpoint_dir) cfg.checkpoint_dir = *checkpoint_dir;
    if (stopwords) cfg.stopwords = *stopwords;
    if (bank) cfg.bank = *bank;
    if (templates) cfg.templates = *templates;
    if (endpoint) cfg.llm.endpoint = *endpoint;
    if (llm_model) cfg.llm.model = *llm_model;
    if (token_env) cfg.llm.token_env = *token_env;
    if (temperature) cfg.llm.temperature = *temperature;
    if (max_tokens) cfg.llm.max_tokens = *max_tokens;
    if (timeout_ms) cfg.llm.timeout = std::chrono::milliseconds(*timeout_ms);
    if (max_attempts) cfg.llm.retry.max_attempts = *max_attempts;
    if (concurrency) cfg.llm.concurrency = *concurrency;

    if (train->parsed()) return cmd_train(cfg, train_args, out);
    if (eval->parsed()) return cmd_eval(cfg, eval_args, out);
    if (explain->parsed()) return cmd_explain(cfg, explain_args, out, err);
    if (aug->parsed()) return cmd_augment(cfg, augment_args, out, err);
    return cmd_gradcheck(grad_args, cfg.training.seed, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace xdd::cli
