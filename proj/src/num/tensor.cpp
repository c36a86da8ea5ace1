#include "xdd/num/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <unordered_set>

#include "xdd/error.hpp"

namespace xdd::num {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto dim : shape) n *= dim;
  return n;
}

namespace detail {
std::uint64_t next_seq() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}
}  // namespace detail

namespace {

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values,
                                        bool requires_grad) {
  if (element_count(shape) != values.size()) {
    throw DimensionError("shape " + to_string(shape) + " holds " +
                         std::to_string(element_count(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->seq = detail::next_seq();
  return node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = element_count(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_leaf({}, {value}, requires_grad));
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(make_leaf({rows, cols}, std::move(values), requires_grad));
}

detail::Node& Tensor::node() const {
  if (!node_) throw DomainError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("rows() on non-matrix shape " + to_string(s));
  return s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("cols() on non-matrix shape " + to_string(s));
  return s[1];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node().value[r * cols() + c]; }

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on shape " + to_string(shape()));
  return node().value[0];
}

void Tensor::set_requires_grad(bool flag) {
  auto& n = node();
  if (!n.is_leaf) throw DomainError("requires_grad can only be toggled on leaves");
  n.requires_grad = flag;
}

std::span<double> Tensor::mutable_grad() {
  auto& n = node();
  n.ensure_grad();
  return n.grad;
}

void Tensor::zero_grad() {
  auto& n = node();
  std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& n = node();
  return Tensor(make_leaf(n.shape, n.value, false));
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->is_leaf = false;
  node->seq = detail::next_seq();
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node_);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void Tensor::backward(double seed) const {
  auto& root = node();
  if (root.value.size() != 1) {
    throw DimensionError("backward() needs a scalar, got shape " + to_string(root.shape));
  }
  if (!root.requires_grad) return;

  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{&root};
  while (!stack.empty()) {
    auto* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    order.push_back(n);
    for (auto& in : n->inputs) {
      if (in->requires_grad) stack.push_back(in.get());
    }
  }
  // Creation order is a topological order of a define-by-run graph.
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });
  for (auto* n : order) {
    if (n->is_leaf) {
      n->ensure_grad();
    } else {
      n->grad.assign(n->value.size(), 0.0);
    }
  }
  root.grad[0] += seed;
  for (auto* n : order) {
    if (!n->is_leaf && n->backward_fn) n->backward_fn(*n);
  }
}

std::uint64_t checksum(const ParamList& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    auto vals = p.tensor.values();
    const auto* bytes = reinterpret_cast<const unsigned char*>(vals.data());
    for (std::size_t i = 0; i < vals.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::vector<std::vector<double>> snapshot(const ParamList& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    auto vals = p.tensor.values();
    out.emplace_back(vals.begin(), vals.end());
  }
  return out;
}

void restore(ParamList& params, const std::vector<std::vector<double>>& saved) {
  if (saved.size() != params.size()) {
    throw DimensionError("snapshot has " + std::to_string(saved.size()) + " tensors, model has " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_values();
    if (dst.size() != saved[i].size()) {
      throw DimensionError("snapshot size mismatch for " + params[i].name);
    }
    std::copy(saved[i].begin(), saved[i].end(), dst.begin());
  }
}

}  // namespace xdd::num
