#include <cmath>
#include <numeric>

#include "xdd/encoder.hpp"
#include "xdd/error.hpp"
#include "xdd/num/ops.hpp"

namespace xdd::enc {

namespace {
constexpr double kKeyMaskShift = -1e4;
}

ToyEncoder::ToyEncoder(const ToyEncoderConfig& config) : config_(config) {
  if (config.d == 0 || config.k < 2 || config.vocab_size < 3) {
    throw ConfigError("toy encoder needs d > 0, k >= 2 and a vocabulary with reserved ids");
  }
  token_embedding = num::Tensor::zeros({config.vocab_size, config.d}, true);
  position_embedding = num::Tensor::zeros({config.k, config.d}, true);
  if (config.self_attention) {
    w_query = num::Tensor::zeros({config.d, config.d}, true);
    w_key = num::Tensor::zeros({config.d, config.d}, true);
    w_value = num::Tensor::zeros({config.d, config.d}, true);
    w_output = num::Tensor::zeros({config.d, config.d}, true);
  }
}

std::unique_ptr<ToyEncoder> ToyEncoder::initialized(const ToyEncoderConfig& config,
                                                    num::Rng& rng) {
  auto enc = std::make_unique<ToyEncoder>(config);
  num::fill_uniform(enc->token_embedding, 1.0 / std::sqrt(static_cast<double>(config.d)), rng);
  if (config.self_attention) {
    for (auto* w : {&enc->w_query, &enc->w_key, &enc->w_value, &enc->w_output}) {
      num::fill_glorot(*w, config.d, config.d, rng);
    }
  }
  return enc;
}

EmbeddingMatrix ToyEncoder::encode(const text::TokenizedPost& post) const {
  const std::size_t k = post.length();
  if (k != config_.k) {
    throw DimensionError("encoder configured for k = " + std::to_string(config_.k) +
                         ", post has " + std::to_string(k) + " positions");
  }
  for (auto id : post.token_ids) {
    if (id >= config_.vocab_size) {
      throw DomainError("token id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(config_.vocab_size));
    }
  }
  std::vector<std::size_t> positions(k);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  auto x = num::add(num::gather_columns(token_embedding, post.token_ids),
                    num::gather_columns(position_embedding, positions));

  if (config_.self_attention) {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(config_.d));
    auto q = num::matmul(w_query, x);
    auto key = num::matmul(w_key, x);
    auto v = num::matmul(w_value, x);
    // scores[j][i]: key j against query i; column i is query i's distribution.
    auto scores = num::scale(num::matmul(num::transpose(key), q), inv_sqrt_d);
    std::vector<double> key_shift(k * k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      if (post.token_ids[j] == text::kPadId) {
        for (std::size_t i = 0; i < k; ++i) key_shift[j * k + i] = kKeyMaskShift;
      }
    }
    auto weights = num::softmax_columns(num::add_constant(scores, key_shift));
    x = num::add(x, num::matmul(w_output, num::matmul(v, weights)));
  }
  EmbeddingMatrix out;
  out.e_cls = num::column(x, 0);
  out.E = std::move(x);
  return out;
}

num::ParamList ToyEncoder::params() const {
  num::ParamList list{{"encoder.token_embedding", token_embedding},
                      {"encoder.position_embedding", position_embedding}};
  if (config_.self_attention) {
    list.push_back({"encoder.w_query", w_query});
    list.push_back({"encoder.w_key", w_key});
    list.push_back({"encoder.w_value", w_value});
    list.push_back({"encoder.w_output", w_output});
  }
  return list;
}

void ToyEncoder::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (auto& p : params()) p.tensor.set_requires_grad(!frozen);
}

}  // namespace xdd::enc
