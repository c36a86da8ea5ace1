#include "xdd/xdd_head.hpp"

#include <algorithm>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "xdd/error.hpp"
#include "xdd/num/ops.hpp"

namespace xdd::heads {

namespace {

LstmDirection zero_direction(std::size_t d, std::size_t u) {
  return {num::Tensor::zeros({4 * u, d}, true), num::Tensor::zeros({4 * u, u}, true),
          num::Tensor::zeros({4 * u}, true)};
}

void init_direction(LstmDirection& dir, std::size_t d, std::size_t u, num::Rng& rng) {
  num::fill_glorot(dir.input_weight, d, 4 * u, rng);
  num::fill_glorot(dir.recurrent_weight, u, 4 * u, rng);
  auto bias = dir.bias.mutable_values();
  std::fill(bias.begin(), bias.end(), 0.0);
  std::fill(bias.begin() + static_cast<std::ptrdiff_t>(u),
            bias.begin() + static_cast<std::ptrdiff_t>(2 * u), 1.0);
}

}  // namespace

BiLstmParams BiLstmParams::zeros(std::size_t d, std::size_t u) {
  if (d == 0 || u == 0) throw ConfigError("bi-LSTM needs d > 0 and u > 0");
  return {zero_direction(d, u), zero_direction(d, u)};
}

BiLstmParams BiLstmParams::initialized(std::size_t d, std::size_t u, num::Rng& rng) {
  auto p = zeros(d, u);
  init_direction(p.forward, d, u, rng);
  init_direction(p.backward, d, u, rng);
  return p;
}

XddHead XddHead::zeros(std::size_t d, std::size_t u) {
  return {BiLstmParams::zeros(d, u),
          {num::Tensor::zeros({2 * u, 2 * u}, true), num::Tensor::zeros({2 * u}, true)},
          {num::Tensor::zeros({text::kNumClasses, d}, true),
           num::Tensor::zeros({text::kNumClasses}, true)}};
}

XddHead XddHead::initialized(std::size_t d, std::size_t u, num::Rng& rng) {
  XddHead head = zeros(d, u);
  head.lstm = BiLstmParams::initialized(d, u, rng);
  num::fill_glorot(head.attention.projection, 2 * u, 2 * u, rng);
  num::fill_glorot(head.attention.context, 2 * u, 1, rng);
  // W_out starts at zero so the first updates align it with the class
  // signal in the pooled embedding before attention has sharpened.
  return head;
}

num::ParamList XddHead::params() const {
  return {{"lstm.forward.input_weight", lstm.forward.input_weight},
          {"lstm.forward.recurrent_weight", lstm.forward.recurrent_weight},
          {"lstm.forward.bias", lstm.forward.bias},
          {"lstm.backward.input_weight", lstm.backward.input_weight},
          {"lstm.backward.recurrent_weight", lstm.backward.recurrent_weight},
          {"lstm.backward.bias", lstm.backward.bias},
          {"attention.projection", attention.projection},
          {"attention.context", attention.context},
          {"output.weight", output.weight},
          {"output.bias", output.bias}};
}

// ---------------------------------------------------------------------------

num::Tensor lstm_direction_forward(const num::Tensor& E, const LstmDirection& dir, bool reverse) {
  if (E.rank() != 2) throw DimensionError("bi-LSTM input must be a matrix, got " + num::to_string(E.shape()));
  const std::size_t d = dir.input_weight.cols();
  const std::size_t u = dir.recurrent_weight.cols();
  if (E.rows() != d) {
    throw DimensionError("bi-LSTM expects input width " + std::to_string(d) + ", got E of shape " +
                         num::to_string(E.shape()));
  }
  const std::size_t k = E.cols();
  // Input contributions for every position at once: (4u × k).
  const auto projected = num::affine(E, dir.input_weight, dir.bias);

  auto h = num::Tensor::zeros({u});
  auto c = num::Tensor::zeros({u});
  std::vector<num::Tensor> states(k);
  for (std::size_t step = 0; step < k; ++step) {
    const std::size_t t = reverse ? k - 1 - step : step;
    const auto z = num::add(num::column(projected, t), num::matvec(dir.recurrent_weight, h));
    const auto in_gate = num::sigmoid_elem(num::slice(z, 0, u));
    const auto forget_gate = num::sigmoid_elem(num::slice(z, u, u));
    const auto candidate = num::tanh_elem(num::slice(z, 2 * u, u));
    const auto out_gate = num::sigmoid_elem(num::slice(z, 3 * u, u));
    c = num::add(num::mul(forget_gate, c), num::mul(in_gate, candidate));
    h = num::mul(out_gate, num::tanh_elem(c));
    states[t] = h;
  }
  return num::stack_columns(states);
}

num::Tensor bilstm_forward(const num::Tensor& E, const BiLstmParams& params) {
  const auto fwd = lstm_direction_forward(E, params.forward, false);
  const auto bwd = lstm_direction_forward(E, params.backward, true);
  const std::size_t k = E.cols();
  std::vector<num::Tensor> cols(k);
  for (std::size_t i = 0; i < k; ++i) cols[i] = num::concat(num::column(fwd, i), num::column(bwd, i));
  return num::stack_columns(cols);
}

num::Tensor attention_scores(const num::Tensor& H, const AttentionParams& params) {
  if (H.rank() != 2 || H.rows() != params.projection.cols()) {
    throw DimensionError("attention expects H with " + std::to_string(params.projection.cols()) +
                         " rows, got " + num::to_string(H.shape()));
  }
  return num::vecmat(params.context, num::tanh_elem(num::matmul(params.projection, H)));
}

std::vector<double> mask_shift(std::span<const std::uint8_t> mu) {
  std::vector<double> shift(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] > 1) {
      throw DomainError("mask entry " + std::to_string(i) + " is " + std::to_string(mu[i]) +
                        ", expected 0 or 1");
    }
    shift[i] = mu[i] == 1 ? 0.0 : kMaskShift;
  }
  return shift;
}

num::Tensor apply_mask(const num::Tensor& sigma, std::span<const std::uint8_t> mu) {
  if (sigma.size() != mu.size()) {
    throw DimensionError("apply_mask: scores " + num::to_string(sigma.shape()) + " vs mask of length " +
                         std::to_string(mu.size()));
  }
  return num::add_constant(sigma, mask_shift(mu));
}

num::Tensor attention_weights(const num::Tensor& shifted_sigma) {
  return num::softmax_vec(shifted_sigma);
}

PooledOutput pool_and_classify(const num::Tensor& E, const num::Tensor& alpha,
                               const OutputHeadParams& params) {
  if (E.rank() != 2 || alpha.rank() != 1 || E.cols() != alpha.size()) {
    throw DimensionError("pool_and_classify: E " + num::to_string(E.shape()) + " vs alpha " +
                         num::to_string(alpha.shape()));
  }
  PooledOutput out;
  out.e_hat = num::matvec(E, alpha);
  out.logits = num::affine(out.e_hat, params.weight, params.bias);
  out.probabilities = num::softmax_vec(out.logits);
  return out;
}

std::vector<std::uint8_t> effective_mask(const text::TokenizedPost& post, DegeneratePolicy policy) {
  if (post.eligible_count() > 0) return post.mu;
  if (policy == DegeneratePolicy::raise) throw NoContentWords(post.post_id);
  std::vector<std::uint8_t> mask(post.length(), 0);
  bool any = false;
  for (std::size_t i = 0; i < post.length(); ++i) {
    if (!text::is_special_token(post.words[i])) {
      mask[i] = 1;
      any = true;
    }
  }
  if (!any) std::fill(mask.begin(), mask.end(), std::uint8_t{1});
  return mask;
}

XddForward xdd_forward(const text::TokenizedPost& post, const enc::EmbeddingMatrix& embeddings,
                       const XddHead& head, DegeneratePolicy policy) {
  XddForward out;
  out.degenerate = post.eligible_count() == 0;
  out.mask = effective_mask(post, policy);
  const auto H = bilstm_forward(embeddings.E, head.lstm);
  const auto sigma = attention_scores(H, head.attention);
  const auto shifted = apply_mask(sigma, out.mask);
  out.alpha = attention_weights(shifted);
  out.pooled = pool_and_classify(embeddings.E, out.alpha, head.output);
  out.attention.sigma.assign(sigma.values().begin(), sigma.values().end());
  out.attention.mask_shift = mask_shift(out.mask);
  out.attention.alpha.assign(out.alpha.values().begin(), out.alpha.values().end());
  return out;
}

num::Tensor xdd_loss(const text::TokenizedPost& post, const enc::EmbeddingProvider& encoder,
                     const XddHead& head) {
  if (!post.label) throw DomainError("post '" + post.post_id + "' has no label");
  const auto fwd = xdd_forward(post, encoder.encode(post), head, DegeneratePolicy::fallback);
  if (fwd.degenerate) {
    spdlog::warn("post '{}' has no eligible words; attending to all words", post.post_id);
  }
  return num::softmax_cross_entropy(fwd.pooled.logits, text::index_of(*post.label));
}

// ---------------------------------------------------------------------------

std::vector<ExplanationPair> explanation_pairs(const text::TokenizedPost& post,
                                               std::span<const std::uint8_t> mask,
                                               std::span<const double> alpha) {
  std::vector<ExplanationPair> pairs;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 1) pairs.push_back({post.words[i], alpha[i], i});
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return a.weight > b.weight;
  });
  return pairs;
}

Explanation predict_with_explanation(const text::TokenizedPost& post,
                                     const enc::EmbeddingProvider& encoder, const XddHead& head,
                                     bool allow_degenerate) {
  const auto policy = allow_degenerate ? DegeneratePolicy::fallback : DegeneratePolicy::raise;
  // Check before running the encoder so the error names the post promptly.
  (void)effective_mask(post, policy);
  const auto fwd = xdd_forward(post, encoder.encode(post), head, policy);
  Explanation e;
  e.post_id = post.post_id;
  e.text = post.original_text;
  e.pairs = explanation_pairs(post, fwd.mask, fwd.attention.alpha);
  const auto probs = fwd.pooled.probabilities.values();
  std::copy(probs.begin(), probs.end(), e.probabilities.begin());
  e.predicted_class = text::label_from_index(argmax_lowest(e.probabilities));
  return e;
}

std::string explanation_to_json(const Explanation& e) {
  nlohmann::ordered_json j;
  j["pid"] = e.post_id;
  j["text"] = e.text;
  j["class"] = std::string(text::canonical_name(e.predicted_class));
  j["probabilities"] = e.probabilities;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& p : e.pairs) {
    pairs.push_back({{"word", p.word}, {"weight", p.weight}, {"index", p.token_index}});
  }
  j["explanation"] = std::move(pairs);
  return j.dump();
}

Explanation explanation_from_json(std::string_view json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    Explanation e;
    e.post_id = j.at("pid").get<std::string>();
    e.text = j.value("text", std::string{});
    const auto cls = j.at("class").get<std::string>();
    auto label = text::parse_canonical(cls);
    if (!label) throw ParseError("unknown class '" + cls + "' in explanation");
    e.predicted_class = *label;
    if (j.contains("probabilities")) {
      const auto probs = j.at("probabilities").get<std::vector<double>>();
      if (probs.size() != text::kNumClasses) throw ParseError("expected 3 probabilities");
      std::copy(probs.begin(), probs.end(), e.probabilities.begin());
    }
    for (const auto& p : j.at("explanation")) {
      e.pairs.push_back({p.at("word").get<std::string>(), p.at("weight").get<double>(),
                         p.value("index", std::size_t{0})});
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed explanation JSON: ") + ex.what());
  }
}

std::string format_pairs(std::span<const ExplanationPair> pairs, std::optional<std::size_t> top) {
  const std::size_t n = top ? std::min(*top, pairs.size()) : pairs.size();
  std::string out = "{";
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ", ";
    std::snprintf(buf, sizeof(buf), "%.4f", pairs[i].weight);
    out += nlohmann::json(pairs[i].word).dump() + ": " + buf;
  }
  return out + "}";
}

}  // namespace xdd::heads
