#include "xdd/gradcheck_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "xdd/encoder.hpp"
#include "xdd/num/ops.hpp"
#include "xdd/num/random.hpp"
#include "xdd/pretune_head.hpp"
#include "xdd/xdd_head.hpp"

namespace xdd::verify {

using num::Tensor;

bool SuiteReport::passed() const {
  for (const auto& c : components) {
    if (!c.passed) return false;
  }
  return true;
}

namespace {

// One random instance: the parameters to check and a loss rebuilt from them.
struct Instance {
  num::ParamList params;
  std::function<Tensor()> loss;
};

using Factory = std::function<Instance(num::Rng&)>;

// Smallest nonzero analytic gradient magnitude of the instance, or +inf
// when every coordinate is exactly zero.
double smallest_gradient(Instance& instance) {
  for (auto& p : instance.params) p.tensor.zero_grad();
  instance.loss().backward();
  double smallest = INFINITY;
  for (auto& p : instance.params) {
    if (p.tensor.has_grad()) {
      for (double g : p.tensor.grad()) {
        if (g != 0.0) smallest = std::min(smallest, std::abs(g));
      }
    }
    p.tensor.zero_grad();
  }
  return smallest;
}

std::size_t dim(num::Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

Tensor param(num::Shape shape, double bound, num::Rng& rng) {
  return num::random_tensor(std::move(shape), bound, rng, true);
}

std::vector<double> readout(std::size_t n, num::Rng& rng) {
  std::vector<double> w(n);
  for (auto& x : w) x = rng.uniform(-1.0, 1.0);
  return w;
}

heads::LstmDirection random_direction(std::size_t d, std::size_t u, num::Rng& rng) {
  return {param({4 * u, d}, 0.8, rng), param({4 * u, u}, 0.8, rng), param({4 * u}, 0.5, rng)};
}

num::ParamList direction_params(const heads::LstmDirection& dir) {
  return {{"input_weight", dir.input_weight},
          {"recurrent_weight", dir.recurrent_weight},
          {"bias", dir.bias}};
}

std::vector<std::uint8_t> random_mask(std::size_t k, num::Rng& rng, std::size_t first = 0) {
  std::vector<std::uint8_t> mu(k, 0);
  for (std::size_t i = first; i < k; ++i) mu[i] = rng.uniform01() < 0.6 ? 1 : 0;
  mu[first + rng.below(k - first)] = 1;
  return mu;
}

Instance affine_instance(num::Rng& rng) {
  const std::size_t p = dim(rng, 1, 5), m = dim(rng, 1, 5);
  const bool batched = rng.uniform01() < 0.5;
  const std::size_t n = batched ? dim(rng, 1, 4) : 1;
  auto x = batched ? param({p, n}, 1.0, rng) : param({p}, 1.0, rng);
  auto W = param({m, p}, 1.0, rng);
  auto b = param({m}, 1.0, rng);
  auto w = readout(m * n, rng);
  return {{{"x", x}, {"W", W}, {"b", b}},
          [=] { return num::weighted_sum(num::affine(x, W, b), w); }};
}

Instance tanh_instance(num::Rng& rng) {
  const std::size_t n = dim(rng, 1, 8);
  auto x = param({n}, 2.0, rng);
  auto w = readout(n, rng);
  return {{{"x", x}}, [=] { return num::weighted_sum(num::tanh_elem(x), w); }};
}

Instance sigmoid_instance(num::Rng& rng) {
  const std::size_t n = dim(rng, 1, 8);
  auto x = param({n}, 3.0, rng);
  auto w = readout(n, rng);
  return {{{"x", x}}, [=] { return num::weighted_sum(num::sigmoid_elem(x), w); }};
}

Instance softmax_ce_instance(num::Rng& rng) {
  const std::size_t n = dim(rng, 2, 6);
  auto logits = param({n}, 2.0, rng);
  const std::size_t target = rng.below(n);
  const bool fused = rng.uniform01() < 0.5;
  return {{{"logits", logits}}, [=] {
            return fused ? num::softmax_cross_entropy(logits, target)
                         : num::cross_entropy(num::softmax_vec(logits), target);
          }};
}

Instance lstm_instance(num::Rng& rng, bool reverse) {
  const std::size_t d = dim(rng, 1, 4), u = dim(rng, 1, 3), k = dim(rng, 1, 5);
  auto E = param({d, k}, 1.0, rng);
  auto dir = random_direction(d, u, rng);
  auto w = readout(u * k, rng);
  auto params = direction_params(dir);
  params.push_back({"E", E});
  return {params, [=] {
            return num::weighted_sum(heads::lstm_direction_forward(E, dir, reverse), w);
          }};
}

Instance attention_score_instance(num::Rng& rng) {
  const std::size_t u = dim(rng, 1, 3), k = dim(rng, 1, 5);
  auto H = param({2 * u, k}, 1.0, rng);
  heads::AttentionParams att{param({2 * u, 2 * u}, 1.0, rng), param({2 * u}, 1.0, rng)};
  auto w = readout(k, rng);
  return {{{"H", H}, {"U", att.projection}, {"v", att.context}},
          [=] { return num::weighted_sum(heads::attention_scores(H, att), w); }};
}

Instance masked_softmax_instance(num::Rng& rng) {
  const std::size_t k = dim(rng, 2, 8);
  auto sigma = param({k}, 3.0, rng);
  auto mu = random_mask(k, rng);
  auto w = readout(k, rng);
  return {{{"sigma", sigma}}, [=] {
            return num::weighted_sum(heads::attention_weights(heads::apply_mask(sigma, mu)), w);
          }};
}

Instance pooling_instance(num::Rng& rng) {
  const std::size_t d = dim(rng, 1, 5), k = dim(rng, 1, 6);
  auto E = param({d, k}, 1.0, rng);
  auto alpha = param({k}, 1.0, rng);
  heads::OutputHeadParams out{param({text::kNumClasses, d}, 1.0, rng),
                              param({text::kNumClasses}, 1.0, rng)};
  const std::size_t target = rng.below(text::kNumClasses);
  return {{{"E", E}, {"alpha", alpha}, {"W_out", out.weight}, {"b_out", out.bias}}, [=] {
            return num::cross_entropy(heads::pool_and_classify(E, alpha, out).probabilities, target);
          }};
}

Instance pooler_instance(num::Rng& rng) {
  const std::size_t d = dim(rng, 1, 5);
  auto e_cls = param({d}, 1.0, rng);
  heads::PretuneHead head{param({d, d}, 1.0, rng), param({d}, 0.5, rng),
                          param({text::kNumClasses, d}, 1.0, rng),
                          param({text::kNumClasses}, 0.5, rng)};
  const std::size_t target = rng.below(text::kNumClasses);
  auto params = head.params();
  params.push_back({"e_cls", e_cls});
  return {params, [=] {
            return num::softmax_cross_entropy(
                heads::logits_forward(heads::pooler_forward(e_cls, head), head), target);
          }};
}

text::TokenizedPost random_post(std::size_t k, std::size_t vocab, num::Rng& rng) {
  text::TokenizedPost post;
  post.post_id = "gc";
  post.token_ids.assign(k, text::kPadId);
  post.words.assign(k, std::string(text::kPadToken));
  post.token_ids[0] = text::kClsId;
  post.words[0] = std::string(text::kClsToken);
  const std::size_t n_words = 1 + rng.below(k - 1);
  for (std::size_t i = 1; i <= n_words; ++i) {
    post.token_ids[i] = 3 + rng.below(vocab - 3);
    post.words[i] = "w" + std::to_string(post.token_ids[i]);
  }
  post.mu.assign(k, 0);
  for (std::size_t i = 1; i <= n_words; ++i) post.mu[i] = rng.uniform01() < 0.6 ? 1 : 0;
  post.mu[1 + rng.below(n_words)] = 1;
  post.label = text::label_from_index(rng.below(text::kNumClasses));
  return post;
}

std::shared_ptr<enc::ToyEncoder> random_encoder(std::size_t vocab, std::size_t d, std::size_t k,
                                                num::Rng& rng) {
  auto encoder = std::make_shared<enc::ToyEncoder>(enc::ToyEncoderConfig{vocab, d, k, true});
  for (auto p : encoder->params()) {
    for (double& x : p.tensor.mutable_values()) x = rng.uniform(-0.8, 0.8);
  }
  return encoder;
}

Instance encoder_instance(num::Rng& rng) {
  const std::size_t vocab = dim(rng, 4, 7), d = dim(rng, 1, 4), k = dim(rng, 2, 5);
  auto encoder = random_encoder(vocab, d, k, rng);
  auto post = random_post(k, vocab, rng);
  auto w = readout(d * k, rng);
  return {encoder->params(), [=] { return num::weighted_sum(encoder->encode(post).E, w); }};
}

Instance xdd_loss_instance(num::Rng& rng) {
  const std::size_t vocab = dim(rng, 4, 7), d = dim(rng, 1, 4), u = dim(rng, 1, 3),
                    k = dim(rng, 2, 5);
  auto encoder = random_encoder(vocab, d, k, rng);
  auto head = std::make_shared<heads::XddHead>(heads::XddHead::zeros(d, u));
  for (auto p : head->params()) {
    for (double& x : p.tensor.mutable_values()) x = rng.uniform(-0.8, 0.8);
  }
  auto post = random_post(k, vocab, rng);
  auto params = encoder->params();
  for (auto& p : head->params()) params.push_back(p);
  return {params, [=] { return heads::xdd_loss(post, *encoder, *head); }};
}

struct Component {
  const char* name;
  Factory make;
};

const std::vector<Component>& components() {
  static const std::vector<Component> list{
      {"affine", affine_instance},
      {"tanh", tanh_instance},
      {"sigmoid", sigmoid_instance},
      {"softmax_cross_entropy", softmax_ce_instance},
      {"lstm_forward_direction", [](num::Rng& r) { return lstm_instance(r, false); }},
      {"lstm_backward_direction", [](num::Rng& r) { return lstm_instance(r, true); }},
      {"attention_score", attention_score_instance},
      {"masked_softmax", masked_softmax_instance},
      {"attention_pooling", pooling_instance},
      {"pretune_pooler", pooler_instance},
      {"encoder_self_attention", encoder_instance},
      {"xdd_loss_end_to_end", xdd_loss_instance},
  };
  return list;
}

}  // namespace

std::vector<std::string> component_names() {
  std::vector<std::string> names;
  for (const auto& c : components()) names.emplace_back(c.name);
  return names;
}

constexpr std::size_t kDrawBudget = 20;

SuiteReport run_gradcheck_suite(const SuiteOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  SuiteReport report;
  std::uint64_t stream = 0;
  for (const auto& component : components()) {
    num::Rng rng(num::derive_seed(options.seed, ++stream));
    ComponentResult result;
    result.name = component.name;
    const std::size_t max_draws = options.instances * kDrawBudget;
    std::size_t draws = 0;
    while (result.instances < options.instances && draws < max_draws) {
      auto instance = component.make(rng);
      ++draws;
      if (smallest_gradient(instance) < options.min_resolvable_gradient) {
        ++result.unresolvable;
        continue;
      }
      const auto check = num::grad_check(instance.loss, instance.params, options.check);
      for (const auto& p : check.params) {
        if (result.worst_param.empty() || p.max_rel_error > result.max_rel_error) {
          result.max_rel_error = p.max_rel_error;
          result.worst_param = p.name;
          result.worst_analytic = p.analytic;
          result.worst_numeric = p.numeric;
        }
      }
      ++result.instances;
    }
    result.passed = result.instances == options.instances &&
                    result.max_rel_error < options.tolerance;
    report.components.push_back(result);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace xdd::verify
