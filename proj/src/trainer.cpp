#include "xdd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "xdd/checkpoint.hpp"
#include "xdd/error.hpp"
#include "xdd/num/ops.hpp"
#include "xdd/num/random.hpp"
#include "xdd/pretune_head.hpp"
#include "xdd/xdd_head.hpp"

namespace xdd::train {

using nlohmann::json;

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::pretune: return "pretune";
    case Phase::head_frozen: return "head_frozen";
    case Phase::end_to_end: return "end_to_end";
  }
  return "?";
}

Phase parse_phase(const std::string& name) {
  for (auto p : kAllPhases) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown phase '" + name + "' (expected pretune, head_frozen or end_to_end)");
}

const PhaseSettings& TrainConfig::settings(Phase phase) const {
  switch (phase) {
    case Phase::pretune: return pretune;
    case Phase::head_frozen: return head_frozen;
    case Phase::end_to_end: return end_to_end;
  }
  return pretune;
}

PhaseSettings& TrainConfig::settings(Phase phase) {
  return const_cast<PhaseSettings&>(std::as_const(*this).settings(phase));
}

void TrainConfig::validate() const {
  for (auto p : kAllPhases) {
    const auto& s = settings(p);
    if (s.epochs < 1) throw ConfigError(to_string(p) + ".epochs must be at least 1");
    if (!(s.lr > 0.0) || !std::isfinite(s.lr)) {
      throw ConfigError(to_string(p) + ".lr must be a positive number");
    }
  }
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (selection_metric != "macro_f1") {
    throw ConfigError("selection_metric '" + selection_metric + "' unsupported (only macro_f1)");
  }
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
}

namespace {

json phase_json(const PhaseSettings& s) {
  return {{"epochs", s.epochs}, {"lr", s.lr}, {"optimizer", num::to_string(s.optimizer)}};
}

PhaseSettings phase_from_json(const json& j, PhaseSettings s) {
  if (j.contains("epochs")) s.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("lr")) s.lr = j.at("lr").get<double>();
  if (j.contains("optimizer")) s.optimizer = num::parse_optimizer_kind(j.at("optimizer").get<std::string>());
  return s;
}

}  // namespace

json TrainConfig::to_json() const {
  json j;
  for (auto p : kAllPhases) j[to_string(p)] = phase_json(settings(p));
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["selection_metric"] = selection_metric;
  j["grad_clip"] = grad_clip ? json(*grad_clip) : json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    for (auto p : kAllPhases) {
      if (j.contains(to_string(p))) c.settings(p) = phase_from_json(j.at(to_string(p)), c.settings(p));
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.selection_metric = j.value("selection_metric", c.selection_metric);
    if (j.contains("grad_clip") && !j.at("grad_clip").is_null()) {
      c.grad_clip = j.at("grad_clip").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  return c;
}

json TrainReport::to_json() const {
  json epochs_json = json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"index", e.index},
                           {"train_loss", e.train_loss},
                           {"val_accuracy", e.val.accuracy},
                           {"val_precision_macro", e.val.precision_macro},
                           {"val_recall_macro", e.val.recall_macro},
                           {"val_macro_f1", e.val.macro_f1}});
  }
  json j;
  j["phase"] = to_string(phase);
  j["epochs"] = epochs_json;
  j["best_epoch"] = best_epoch;
  j["seed"] = seed;
  j["config_echo"] = config_echo;
  j["wall_seconds"] = wall_seconds;
  j["checkpoint_path"] = checkpoint_path;
  j["encoder_checksum_before"] = encoder_checksum_before;
  j["encoder_checksum_after"] = encoder_checksum_after;
  return j;
}

metrics::ConfusionMatrix evaluate_pretune(const Model& model,
                                          std::span<const text::TokenizedPost> posts) {
  metrics::ConfusionMatrix cm;
  for (const auto& post : posts) {
    if (!post.label) throw ConfigError("post '" + post.post_id + "' has no label");
    cm.accumulate(*post.label, heads::classify_pretune(post, *model.encoder, model.pretune_head).label);
  }
  return cm;
}

metrics::ConfusionMatrix evaluate_xdd(const Model& model,
                                      std::span<const text::TokenizedPost> posts) {
  metrics::ConfusionMatrix cm;
  for (const auto& post : posts) {
    if (!post.label) throw ConfigError("post '" + post.post_id + "' has no label");
    auto emb = model.encoder->encode(post);
    auto fwd = heads::xdd_forward(post, emb, model.head, heads::DegeneratePolicy::fallback);
    auto idx = heads::argmax_lowest(fwd.pooled.probabilities.values());
    cm.accumulate(*post.label, text::label_from_index(idx));
  }
  return cm;
}

namespace {

void check_split(std::span<const text::TokenizedPost> posts, const char* name) {
  if (posts.empty()) throw ConfigError(std::string(name) + " split is empty");
  std::array<std::size_t, text::kNumClasses> counts{};
  for (const auto& p : posts) {
    if (!p.label) throw ConfigError(std::string(name) + " post '" + p.post_id + "' has no label");
    ++counts[text::index_of(*p.label)];
  }
  if (std::string_view(name) == "train") {
    for (auto c : text::kAllClasses) {
      if (counts[text::index_of(c)] == 0) {
        spdlog::warn("class {} is missing from the training split", text::canonical_name(c));
      }
    }
  }
}

// a/b > c/d for nonnegative rationals with positive denominators.
bool greater(const metrics::Rational& a, const metrics::Rational& b) {
  return static_cast<__int128>(a.num) * b.den > static_cast<__int128>(b.num) * a.den;
}

void clip_gradients(std::span<num::Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double factor = max_norm / norm;
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (double& g : p.mutable_grad()) g *= factor;
  }
}

// Checkpoints hold 32-bit values. Rounding at the phase boundary makes a
// resumed phase start from exactly the state an uninterrupted run has.
void round_to_f32(const num::ParamList& params) {
  for (auto p : params) {
    for (double& v : p.tensor.mutable_values()) v = static_cast<double>(static_cast<float>(v));
  }
}

std::uint64_t phase_stream(Phase phase) {
  return 100 + static_cast<std::uint64_t>(phase);
}

struct LoopSpec {
  Phase phase;
  num::ParamList trainable;
  num::ParamList selected;  // snapshot set for best-epoch selection
  std::function<num::Tensor(const text::TokenizedPost&)> loss;
  std::function<metrics::ConfusionMatrix(std::span<const text::TokenizedPost>)> evaluate;
};

TrainReport run_loop(const LoopSpec& spec, std::span<const text::TokenizedPost> train,
                     std::span<const text::TokenizedPost> val, const TrainConfig& cfg) {
  cfg.validate();
  check_split(train, "train");
  check_split(val, "validation");
  const auto& settings = cfg.settings(spec.phase);
  const auto start = std::chrono::steady_clock::now();

  std::vector<num::Tensor> tensors;
  for (const auto& p : spec.trainable) tensors.push_back(p.tensor);
  num::Optimizer optimizer(settings.optimizer, tensors, settings.lr);

  TrainReport report;
  report.phase = spec.phase;
  report.seed = cfg.seed;

  num::ParamList selected = spec.selected;
  std::vector<std::vector<double>> best_values;
  metrics::Rational best_f1{0, 1};
  const std::uint64_t phase_seed = num::derive_seed(cfg.seed, phase_stream(spec.phase));

  for (std::size_t epoch = 1; epoch <= settings.epochs; ++epoch) {
    num::Rng rng(num::derive_seed(phase_seed, epoch));
    const auto order = num::permutation(train.size(), rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      optimizer.zero_grad();
      for (std::size_t i = begin; i < end; ++i) {
        auto loss = spec.loss(train[order[i]]);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw DomainError("non-finite loss on post '" + train[order[i]].post_id + "' in epoch " +
                            std::to_string(epoch));
        }
        loss_sum += value;
        loss.backward(inv_batch);
      }
      if (cfg.grad_clip) clip_gradients(tensors, *cfg.grad_clip);
      optimizer.step();
    }

    EpochRecord record;
    record.index = epoch;
    record.train_loss = loss_sum / static_cast<double>(train.size());
    const auto cm = spec.evaluate(val);
    record.val = metrics::macro_scores(cm);
    const auto f1 = metrics::macro_scores_exact(cm).macro_f1;
    spdlog::info("{} epoch {}/{}: train loss {:.6f}, val accuracy {:.3f}, val macro-F1 {:.3f}",
                 to_string(spec.phase), epoch, settings.epochs, record.train_loss,
                 record.val.accuracy, record.val.macro_f1);
    if (report.best_epoch == 0 || greater(f1, best_f1)) {
      best_f1 = f1;
      report.best_epoch = epoch;
      best_values = num::snapshot(selected);
    }
    report.epochs.push_back(record);
  }
  num::restore(selected, best_values);
  round_to_f32(selected);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

num::ParamList concat(num::ParamList a, const num::ParamList& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Restores the encoder's trainable state even when a phase throws.
struct FreezeGuard {
  enc::EmbeddingProvider& encoder;
  explicit FreezeGuard(enc::EmbeddingProvider& e) : encoder(e) { encoder.set_frozen(true); }
  ~FreezeGuard() { encoder.set_frozen(false); }
};

}  // namespace

TrainReport pretune(Model& model, std::span<const text::TokenizedPost> train,
                    std::span<const text::TokenizedPost> val, const TrainConfig& cfg) {
  LoopSpec spec;
  spec.phase = Phase::pretune;
  spec.trainable = concat(model.encoder_params(), model.pretune_head.params());
  spec.selected = spec.trainable;
  spec.loss = [&](const text::TokenizedPost& p) {
    return heads::pretune_loss(p, *model.encoder, model.pretune_head);
  };
  spec.evaluate = [&](std::span<const text::TokenizedPost> posts) {
    return evaluate_pretune(model, posts);
  };
  auto report = run_loop(spec, train, val, cfg);
  report.encoder_checksum_after = num::checksum(model.encoder_params());
  return report;
}

TrainReport train_head_frozen(Model& model, std::span<const text::TokenizedPost> train,
                              std::span<const text::TokenizedPost> val, const TrainConfig& cfg) {
  const auto before = num::checksum(model.encoder_params());
  TrainReport report;
  {
    FreezeGuard guard(*model.encoder);
    LoopSpec spec;
    spec.phase = Phase::head_frozen;
    spec.trainable = model.head.params();
    spec.selected = spec.trainable;
    spec.loss = [&](const text::TokenizedPost& p) {
      return heads::xdd_loss(p, *model.encoder, model.head);
    };
    spec.evaluate = [&](std::span<const text::TokenizedPost> posts) {
      return evaluate_xdd(model, posts);
    };
    report = run_loop(spec, train, val, cfg);
  }
  const auto after = num::checksum(model.encoder_params());
  report.encoder_checksum_before = before;
  report.encoder_checksum_after = after;
  if (before != after) {
    throw OracleError("encoder parameters changed while frozen");
  }
  return report;
}

TrainReport finetune_end_to_end(Model& model, std::span<const text::TokenizedPost> train,
                                std::span<const text::TokenizedPost> val,
                                const TrainConfig& cfg) {
  const auto before = num::checksum(model.encoder_params());
  LoopSpec spec;
  spec.phase = Phase::end_to_end;
  spec.trainable = concat(model.encoder_params(), model.head.params());
  spec.selected = spec.trainable;
  spec.loss = [&](const text::TokenizedPost& p) {
    return heads::xdd_loss(p, *model.encoder, model.head);
  };
  spec.evaluate = [&](std::span<const text::TokenizedPost> posts) {
    return evaluate_xdd(model, posts);
  };
  auto report = run_loop(spec, train, val, cfg);
  report.encoder_checksum_before = before;
  report.encoder_checksum_after = num::checksum(model.encoder_params());
  return report;
}

TrainReport run_phase(Phase phase, Model& model, std::span<const text::TokenizedPost> train,
                      std::span<const text::TokenizedPost> val, const TrainConfig& cfg) {
  switch (phase) {
    case Phase::pretune: return pretune(model, train, val, cfg);
    case Phase::head_frozen: return train_head_frozen(model, train, val, cfg);
    case Phase::end_to_end: return finetune_end_to_end(model, train, val, cfg);
  }
  throw ConfigError("unknown phase");
}

void save_phase(const std::filesystem::path& dir, const Model& model, const TrainReport& report) {
  save_checkpoint(dir, model, CheckpointMeta{to_string(report.phase), report.seed, report.config_echo});
  std::ofstream(dir / "report.json", std::ios::trunc) << report.to_json().dump(2) << '\n';
}

namespace {

template <typename E>
[[noreturn]] void rethrow_as(const E& e, const std::string& prefix) {
  throw E(prefix + e.what());
}

}  // namespace

std::vector<TrainReport> run_full_protocol(Model& model,
                                           std::span<const text::TokenizedPost> train,
                                           std::span<const text::TokenizedPost> val,
                                           const TrainConfig& cfg,
                                           const ProtocolOptions& options) {
  std::vector<TrainReport> reports;
  for (auto phase : kAllPhases) {
    const std::string prefix = "phase " + to_string(phase) + ": ";
    try {
      auto report = run_phase(phase, model, train, val, cfg);
      report.config_echo = options.config_echo;
      if (options.checkpoint_dir) {
        const auto dir = *options.checkpoint_dir / to_string(phase);
        report.checkpoint_path = dir.string();
        save_phase(dir, model, report);
      }
      reports.push_back(std::move(report));
    } catch (const NoContentWords&) {
      throw;
    } catch (const TransportError&) {
      throw;
    } catch (const ConfigError& e) {
      rethrow_as(e, prefix);
    } catch (const DimensionError& e) {
      rethrow_as(e, prefix);
    } catch (const DomainError& e) {
      rethrow_as(e, prefix);
    } catch (const ParseError& e) {
      rethrow_as(e, prefix);
    } catch (const LookupError& e) {
      rethrow_as(e, prefix);
    } catch (const OracleError& e) {
      rethrow_as(e, prefix);
    } catch (const Error& e) {
      rethrow_as(e, prefix);
    }
  }
  if (options.checkpoint_dir) {
    save_checkpoint(*options.checkpoint_dir / "final", model,
                    CheckpointMeta{"final", cfg.seed, options.config_echo});
  }
  return reports;
}

}  // namespace xdd::train
