#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "xdd/encoder.hpp"
#include "xdd/num/random.hpp"
#include "xdd/num/tensor.hpp"
#include "xdd/textpipe.hpp"

namespace xdd::heads {

using Probabilities = std::array<double, text::kNumClasses>;

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_lowest(std::span<const double> values);

/// Pooler over the CLS embedding followed by a 3-way linear layer.
struct PretuneHead {
  num::Tensor pooler_weight;  // d × d
  num::Tensor pooler_bias;    // d
  num::Tensor logits_weight;  // 3 × d
  num::Tensor logits_bias;    // 3

  static PretuneHead zeros(std::size_t d);
  /// Glorot-uniform weights, zero biases.
  static PretuneHead initialized(std::size_t d, num::Rng& rng);

  std::size_t d() const { return pooler_weight.rows(); }
  num::ParamList params() const;
};

/// tanh(W_p·e_cls + b_p)
num::Tensor pooler_forward(const num::Tensor& e_cls, const PretuneHead& head);
/// W_l·p_out + b_l
num::Tensor logits_forward(const num::Tensor& pooled, const PretuneHead& head);

struct Classification {
  text::ClassLabel label;
  Probabilities probabilities;
};

Classification classify_pretune(const text::TokenizedPost& post,
                                const enc::EmbeddingProvider& encoder, const PretuneHead& head);

/// Cross-entropy of the pretune head against the post's label.
num::Tensor pretune_loss(const text::TokenizedPost& post, const enc::EmbeddingProvider& encoder,
                         const PretuneHead& head);

}  // namespace xdd::heads
