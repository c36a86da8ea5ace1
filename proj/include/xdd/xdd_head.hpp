#pragma once

// Self-explainable head: bi-LSTM over the token embeddings, additive
// attention with a hard eligibility mask, attention-pooled classifier and
// word-level explanation extraction.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xdd/encoder.hpp"
#include "xdd/num/random.hpp"
#include "xdd/num/tensor.hpp"
#include "xdd/pretune_head.hpp"
#include "xdd/textpipe.hpp"

namespace xdd::heads {

/// One LSTM direction. Gate rows are stacked input, forget, cell, output.
struct LstmDirection {
  num::Tensor input_weight;      // 4u × d
  num::Tensor recurrent_weight;  // 4u × u
  num::Tensor bias;              // 4u
};

struct BiLstmParams {
  LstmDirection forward;
  LstmDirection backward;

  static BiLstmParams zeros(std::size_t d, std::size_t u);
  /// Glorot-uniform weights, zero biases except forget gate = 1.
  static BiLstmParams initialized(std::size_t d, std::size_t u, num::Rng& rng);

  std::size_t input_width() const { return forward.input_weight.cols(); }
  std::size_t hidden_width() const { return forward.recurrent_weight.cols(); }
};

struct AttentionParams {
  num::Tensor projection;  // U, 2u × 2u
  num::Tensor context;     // v, 2u
};

struct OutputHeadParams {
  num::Tensor weight;  // 3 × d
  num::Tensor bias;    // 3
};

struct XddHead {
  BiLstmParams lstm;
  AttentionParams attention;
  OutputHeadParams output;

  static XddHead zeros(std::size_t d, std::size_t u);
  static XddHead initialized(std::size_t d, std::size_t u, num::Rng& rng);

  num::ParamList params() const;
};

/// Runs one direction over the columns of E (d×k); returns (u×k) where
/// column i is the hidden state after reading position i.
num::Tensor lstm_direction_forward(const num::Tensor& E, const LstmDirection& dir, bool reverse);

/// H (2u×k), column i = forward_i ∥ backward_i.
num::Tensor bilstm_forward(const num::Tensor& E, const BiLstmParams& params);

/// σ = vᵀ tanh(U·H)
num::Tensor attention_scores(const num::Tensor& H, const AttentionParams& params);

/// Shift added to the score of every masked position.
inline constexpr double kMaskShift = -1e4;

/// (μ_i − 1)·10⁴ for a binary mask; DomainError on any other entry.
std::vector<double> mask_shift(std::span<const std::uint8_t> mu);
num::Tensor apply_mask(const num::Tensor& sigma, std::span<const std::uint8_t> mu);
num::Tensor attention_weights(const num::Tensor& shifted_sigma);

struct PooledOutput {
  num::Tensor e_hat;
  num::Tensor logits;
  num::Tensor probabilities;
};

/// ê = E·α, π = softmax(W_out·ê + b_out)
PooledOutput pool_and_classify(const num::Tensor& E, const num::Tensor& alpha,
                               const OutputHeadParams& params);

struct AttentionState {
  std::vector<double> sigma;
  std::vector<double> mask_shift;
  std::vector<double> alpha;
};

enum class DegeneratePolicy {
  raise,     ///< NoContentWords when no token is eligible
  fallback,  ///< attend every word token (every position if there are none)
};

/// The mask actually used for attention. Returns `post.mu` when at least
/// one position is eligible; otherwise applies `policy`.
std::vector<std::uint8_t> effective_mask(const text::TokenizedPost& post,
                                         DegeneratePolicy policy);

struct XddForward {
  PooledOutput pooled;
  num::Tensor alpha;
  AttentionState attention;
  std::vector<std::uint8_t> mask;
  bool degenerate = false;
};

XddForward xdd_forward(const text::TokenizedPost& post, const enc::EmbeddingMatrix& embeddings,
                       const XddHead& head, DegeneratePolicy policy);

/// Cross-entropy of the head against the post's label. All-masked posts
/// fall back to attending every word and log a warning.
num::Tensor xdd_loss(const text::TokenizedPost& post, const enc::EmbeddingProvider& encoder,
                     const XddHead& head);

struct ExplanationPair {
  std::string word;
  double weight = 0.0;
  std::size_t token_index = 0;
};

struct Explanation {
  std::string post_id;
  std::string text;
  std::vector<ExplanationPair> pairs;  // non-increasing weight, ties by index
  text::ClassLabel predicted_class = text::ClassLabel::not_depressed;
  Probabilities probabilities{};
};

/// Eligible (word, α) pairs sorted by descending weight, ties broken by
/// ascending token index.
std::vector<ExplanationPair> explanation_pairs(const text::TokenizedPost& post,
                                               std::span<const std::uint8_t> mask,
                                               std::span<const double> alpha);

Explanation predict_with_explanation(const text::TokenizedPost& post,
                                     const enc::EmbeddingProvider& encoder, const XddHead& head,
                                     bool allow_degenerate = false);

/// Machine output: {pid, text, class, probabilities, explanation:[{word, weight, index}]}
/// on a single line, weights at full precision.
std::string explanation_to_json(const Explanation& e);
Explanation explanation_from_json(std::string_view json_text);

/// Human display: {"word": 0.1234, ...} with 4-decimal weights, optionally
/// limited to the first `top` pairs.
std::string format_pairs(std::span<const ExplanationPair> pairs,
                         std::optional<std::size_t> top = std::nullopt);

}  // namespace xdd::heads
