#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xdd/num/tensor.hpp"

namespace xdd::num {

// Shape conventions: vectors are rank 1 ({n}), matrices rank 2 ({rows, cols}),
// row-major. Every op throws DimensionError naming both shapes on mismatch.

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// a + shift, where shift is a constant (no gradient flows into it).
Tensor add_constant(const Tensor& a, std::span<const double> shift);

/// W·x + b. x is a vector (n) or a matrix (n×p); b (m) is broadcast over
/// the output columns.
Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b);
Tensor matmul(const Tensor& A, const Tensor& B);
Tensor matvec(const Tensor& A, const Tensor& x);
/// vᵀ·M for a vector v (n) and matrix M (n×p); returns a p-vector.
Tensor vecmat(const Tensor& v, const Tensor& M);
Tensor transpose(const Tensor& A);

Tensor tanh_elem(const Tensor& x);
Tensor sigmoid_elem(const Tensor& x);

/// Max-subtracted softmax over a vector. Throws DomainError when empty.
Tensor softmax_vec(const Tensor& x);
/// Softmax applied to each column of a matrix independently.
Tensor softmax_columns(const Tensor& M);

/// Probability floor applied inside cross_entropy.
inline constexpr double kProbabilityFloor = 1e-12;

/// −log(max(p[target], floor)) for a probability vector p.
Tensor cross_entropy(const Tensor& probabilities, std::size_t target);
/// cross_entropy(softmax_vec(logits), target) with the fused gradient
/// softmax(logits) − onehot(target).
Tensor softmax_cross_entropy(const Tensor& logits, std::size_t target);

Tensor column(const Tensor& M, std::size_t j);
/// Builds a (n×k) matrix whose j-th column is columns[j] (each an n-vector).
Tensor stack_columns(std::span<const Tensor> columns);
Tensor concat(const Tensor& a, const Tensor& b);
Tensor slice(const Tensor& v, std::size_t start, std::size_t length);
/// Looks up rows of a (V×d) table and lays them out as columns of a (d×k)
/// matrix.
Tensor gather_columns(const Tensor& table, std::span<const std::size_t> ids);

Tensor sum(const Tensor& a);
/// Σ a_i·w_i with constant weights w.
Tensor weighted_sum(const Tensor& a, std::span<const double> weights);

}  // namespace xdd::num
