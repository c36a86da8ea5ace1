#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "xdd/cli.hpp"

namespace xdd::cli {

struct TrainArgs {
  std::optional<std::string> phase;  // unset: full protocol
  std::optional<std::filesystem::path> from;
};

struct EvalArgs {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> predictions;
  std::optional<std::filesystem::path> report;
};

struct ExplainArgs {
  std::filesystem::path checkpoint;
  std::optional<std::string> text;
  std::optional<std::filesystem::path> input;
  std::optional<std::size_t> top;
  bool allow_degenerate = false;
  std::optional<std::filesystem::path> output;
};

struct AugmentArgs {
  std::filesystem::path explanations;
  std::string variant = "base";
  bool offline = false;
  std::optional<std::filesystem::path> output;
};

struct GradcheckArgs {
  std::size_t instances = 100;
  std::optional<double> inject_fault;
  std::optional<double> min_gradient;
  std::optional<std::filesystem::path> report;
};

int cmd_train(const RunConfig& cfg, const TrainArgs& args, std::ostream& out);
int cmd_eval(const RunConfig& cfg, const EvalArgs& args, std::ostream& out);
int cmd_explain(const RunConfig& cfg, const ExplainArgs& args, std::ostream& out,
                std::ostream& err);
int cmd_augment(const RunConfig& cfg, const AugmentArgs& args, std::ostream& out,
                std::ostream& err);
int cmd_gradcheck(const GradcheckArgs& args, std::uint64_t seed, std::ostream& out);

}  // namespace xdd::cli
