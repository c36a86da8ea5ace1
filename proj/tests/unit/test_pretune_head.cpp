#include <doctest.h>

#include <cmath>

#include "xdd/error.hpp"
#include "xdd/num/gradcheck.hpp"
#include "xdd/num/ops.hpp"
#include "xdd/num/optim.hpp"
#include "xdd/pretune_head.hpp"

using namespace xdd;
using namespace xdd::heads;

namespace {

text::TokenizedPost tiny_post(std::size_t token, text::ClassLabel label) {
  text::TokenizedPost p;
  p.post_id = "t" + std::to_string(token);
  p.words = {"[CLS]", "w"};
  p.token_ids = {text::kClsId, token};
  p.mu = {0, 1};
  p.label = label;
  return p;
}

}  // namespace

TEST_CASE("pooler: zero input and identity weights") {
  auto head = PretuneHead::zeros(3);
  auto zero = pooler_forward(num::Tensor::zeros({3}), head);
  for (double v : zero.values()) CHECK(v == 0.0);

  head.pooler_weight = num::Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto out = pooler_forward(num::Tensor::vector({0.5, -0.5, 2.0}), head);
  CHECK(out[0] == std::tanh(0.5));
  CHECK(out[1] == std::tanh(-0.5));
  CHECK(out[2] == std::tanh(2.0));
  CHECK_THROWS_AS(pooler_forward(num::Tensor::zeros({4}), head), DimensionError);
}

TEST_CASE("pooler output stays inside (-1, 1)") {
  num::Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto head = PretuneHead::initialized(6, rng);
    auto out = pooler_forward(num::random_tensor({6}, 3.0, rng), head);
    for (double v : out.values()) CHECK(std::abs(v) < 1.0);
  }
}

TEST_CASE("logits: zero weights leave the bias") {
  auto head = PretuneHead::zeros(4);
  head.logits_bias = num::Tensor::vector({1, 0, -1});
  auto l = logits_forward(num::Tensor::vector({9, 9, 9, 9}), head);
  CHECK(l[0] == 1.0);
  CHECK(l[2] == -1.0);
  CHECK(argmax_lowest(l.values()) == 0);
}

TEST_CASE("argmax ties go to the lowest index and survive constant shifts") {
  const std::vector<double> tie = {0.2, 0.2, 0.2};
  CHECK(argmax_lowest(tie) == 0);
  const std::vector<double> late = {0.1, 0.7, 0.7};
  CHECK(argmax_lowest(late) == 1);
  num::Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> l(3), s(3);
    const double c = rng.uniform(-50, 50);
    for (int i = 0; i < 3; ++i) {
      l[i] = rng.uniform(-5, 5);
      s[i] = l[i] + c;
    }
    CHECK(argmax_lowest(l) == argmax_lowest(s));
  }
}

TEST_CASE("zero head gives uniform probabilities and class 0") {
  enc::ToyEncoder encoder({5, 4, 2, false});
  const auto head = PretuneHead::zeros(4);
  const auto c = classify_pretune(tiny_post(3, text::ClassLabel::severely_depressed), encoder, head);
  for (double p : c.probabilities) CHECK(std::abs(p - 1.0 / 3.0) < 1e-15);
  CHECK(c.label == text::ClassLabel::not_depressed);
}

TEST_CASE("probabilities are normalized and deterministic") {
  num::Rng rng(12);
  auto encoder = enc::ToyEncoder::initialized({6, 5, 2, true}, rng);
  const auto head = PretuneHead::initialized(5, rng);
  const auto post = tiny_post(4, text::ClassLabel::not_depressed);
  const auto a = classify_pretune(post, *encoder, head);
  const auto b = classify_pretune(post, *encoder, head);
  CHECK(a.probabilities == b.probabilities);
  double total = 0.0;
  for (double p : a.probabilities) {
    CHECK(p >= 0.0);
    total += p;
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("pooler path gradient check") {
  num::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto head = PretuneHead::initialized(4, rng);
    for (auto p : head.params()) {
      for (double& x : p.tensor.mutable_values()) x = rng.uniform(-1, 1);
    }
    auto e_cls = num::random_tensor({4}, 1.0, rng, true);
    const std::size_t target = rng.below(3);
    auto params = head.params();
    params.push_back({"e_cls", e_cls});
    const auto report = num::grad_check(
        [&] { return num::softmax_cross_entropy(logits_forward(pooler_forward(e_cls, head), head), target); },
        params);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("head overfits a 3-post corpus within 200 steps") {
  num::Rng rng(1);
  // Self-attention lets the CLS column see the word; without it e_cls is
  // the same for every post.
  auto encoder = enc::ToyEncoder::initialized({6, 8, 2, true}, rng);
  encoder->set_frozen(true);
  auto head = PretuneHead::initialized(8, rng);
  const std::vector<text::TokenizedPost> posts = {
      tiny_post(3, text::ClassLabel::not_depressed),
      tiny_post(4, text::ClassLabel::moderately_depressed),
      tiny_post(5, text::ClassLabel::severely_depressed)};
  std::vector<num::Tensor> tensors;
  for (const auto& p : head.params()) tensors.push_back(p.tensor);
  num::Optimizer opt(num::OptimizerKind::adam, tensors, 1e-2);
  int correct = 0;
  for (int step = 0; step < 200 && correct < 3; ++step) {
    opt.zero_grad();
    for (const auto& p : posts) pretune_loss(p, *encoder, head).backward(1.0 / 3.0);
    opt.step();
    correct = 0;
    for (const auto& p : posts) correct += classify_pretune(p, *encoder, head).label == *p.label;
  }
  CHECK(correct == 3);
}
