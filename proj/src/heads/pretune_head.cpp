#include <algorithm>
#include "xdd/pretune_head.hpp"

#include "xdd/error.hpp"
#include "xdd/num/ops.hpp"

namespace xdd::heads {

std::size_t argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw DomainError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

PretuneHead PretuneHead::zeros(std::size_t d) {
  return {num::Tensor::zeros({d, d}, true), num::Tensor::zeros({d}, true),
          num::Tensor::zeros({text::kNumClasses, d}, true),
          num::Tensor::zeros({text::kNumClasses}, true)};
}

PretuneHead PretuneHead::initialized(std::size_t d, num::Rng& rng) {
  auto head = zeros(d);
  num::fill_glorot(head.pooler_weight, d, d, rng);
  num::fill_glorot(head.logits_weight, d, text::kNumClasses, rng);
  return head;
}

num::ParamList PretuneHead::params() const {
  return {{"pretune.pooler_weight", pooler_weight},
          {"pretune.pooler_bias", pooler_bias},
          {"pretune.logits_weight", logits_weight},
          {"pretune.logits_bias", logits_bias}};
}

num::Tensor pooler_forward(const num::Tensor& e_cls, const PretuneHead& head) {
  return num::tanh_elem(num::affine(e_cls, head.pooler_weight, head.pooler_bias));
}

num::Tensor logits_forward(const num::Tensor& pooled, const PretuneHead& head) {
  return num::affine(pooled, head.logits_weight, head.logits_bias);
}

Classification classify_pretune(const text::TokenizedPost& post,
                                const enc::EmbeddingProvider& encoder, const PretuneHead& head) {
  const auto emb = encoder.encode(post);
  const auto probs = num::softmax_vec(logits_forward(pooler_forward(emb.e_cls, head), head));
  Classification out{};
  std::copy(probs.values().begin(), probs.values().end(), out.probabilities.begin());
  out.label = text::label_from_index(argmax_lowest(out.probabilities));
  return out;
}

num::Tensor pretune_loss(const text::TokenizedPost& post, const enc::EmbeddingProvider& encoder,
                         const PretuneHead& head) {
  if (!post.label) throw DomainError("post '" + post.post_id + "' has no label");
  const auto emb = encoder.encode(post);
  return num::softmax_cross_entropy(logits_forward(pooler_forward(emb.e_cls, head), head),
                                    text::index_of(*post.label));
}

}  // namespace xdd::heads
