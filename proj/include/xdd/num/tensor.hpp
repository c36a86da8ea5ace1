#pragma once

// Dense fp64 tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a graph node. Leaves (parameters and
// inputs) are created with the factory functions; every op in ops.hpp
// creates a fresh node that remembers its inputs and a backward closure
// when any input requires a gradient. Calling backward() on a scalar
// walks the graph in reverse creation order and accumulates gradients
// into every leaf that requires one.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace xdd::num {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass touches the node
  bool requires_grad = false;
  bool is_leaf = true;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

std::uint64_t next_seq();

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const { return node().value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return node().value; }
  /// Direct write access; only meaningful on leaves (parameters, inputs).
  std::span<double> mutable_values() { return node().value; }
  double operator[](std::size_t i) const { return node().value[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const { return node().requires_grad; }
  void set_requires_grad(bool flag);
  bool is_leaf() const { return node().is_leaf; }

  bool has_grad() const { return !node().grad.empty(); }
  std::span<const double> grad() const { return node().grad; }
  std::span<double> mutable_grad();
  void zero_grad();

  /// Reverse pass from a scalar. `seed` scales the root gradient.
  void backward(double seed = 1.0) const;

  /// A new leaf holding a copy of the values, disconnected from the graph.
  Tensor detach() const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

  // Op construction, used by ops.cpp.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward_fn);
  detail::Node& node() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedTensor>;

/// FNV-1a over the raw bytes of every tensor's values, in list order.
std::uint64_t checksum(const ParamList& params);

/// Deep copy of parameter values (used for best-epoch snapshots).
std::vector<std::vector<double>> snapshot(const ParamList& params);
void restore(ParamList& params, const std::vector<std::vector<double>>& saved);

}  // namespace xdd::num
