#include "xdd/num/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xdd/error.hpp"

namespace xdd::num {

namespace {

// Gradient buffer of input i, or nullptr when that input needs none.
std::vector<double>* grad_of(detail::Node& self, std::size_t i) {
  auto& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return &in.grad;
}

const std::vector<double>& value_of(detail::Node& self, std::size_t i) {
  return self.inputs[i]->value;
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) +
                       " and " + to_string(b.shape()));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + to_string(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("add", a, b);
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = grad_of(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("mul", a, b);
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    const auto& x = value_of(self, 0);
    const auto& y = value_of(self, 1);
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * y[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [factor](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
    }
  });
}

Tensor add_constant(const Tensor& a, std::span<const double> shift) {
  if (shift.size() != a.size()) {
    throw DimensionError("add_constant: tensor " + to_string(a.shape()) + " vs shift of length " +
                         std::to_string(shift.size()));
  }
  std::vector<double> out(a.size());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + shift[i];
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
  require_rank("affine (weights)", W, 2);
  require_rank("affine (bias)", b, 1);
  const std::size_t m = W.rows(), n = W.cols();
  const bool is_vec = x.rank() == 1;
  if (x.rank() != 1 && x.rank() != 2) mismatch("affine", W, x);
  if (x.shape()[0] != n) mismatch("affine", W, x);
  if (b.size() != m) mismatch("affine", W, b);
  const std::size_t p = is_vec ? 1 : x.shape()[1];

  auto wv = W.values(), xv = x.values(), bv = b.values();
  std::vector<double> out(m * p);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < p; ++c) out[i * p + c] = bv[i];
    for (std::size_t k = 0; k < n; ++k) {
      const double w = wv[i * n + k];
      for (std::size_t c = 0; c < p; ++c) out[i * p + c] += w * xv[k * p + c];
    }
  }
  Shape shape = is_vec ? Shape{m} : Shape{m, p};
  return Tensor::make_result(std::move(shape), std::move(out), {x, W, b},
                             [m, n, p](detail::Node& self) {
    const auto& xv = value_of(self, 0);
    const auto& wv = value_of(self, 1);
    const auto& g = self.grad;
    if (auto* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          const double w = wv[i * n + k];
          for (std::size_t c = 0; c < p; ++c) (*gx)[k * p + c] += w * g[i * p + c];
        }
    }
    if (auto* gw = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          double acc = 0.0;
          for (std::size_t c = 0; c < p; ++c) acc += g[i * p + c] * xv[k * p + c];
          (*gw)[i * n + k] += acc;
        }
    }
    if (auto* gb = grad_of(self, 2)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t c = 0; c < p; ++c) (*gb)[i] += g[i * p + c];
    }
  });
}

Tensor matmul(const Tensor& A, const Tensor& B) {
  require_rank("matmul", A, 2);
  require_rank("matmul", B, 2);
  const std::size_t m = A.rows(), n = A.cols(), p = B.cols();
  if (B.rows() != n) mismatch("matmul", A, B);
  auto av = A.values(), bv = B.values();
  std::vector<double> out(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double a = av[i * n + k];
      for (std::size_t c = 0; c < p; ++c) out[i * p + c] += a * bv[k * p + c];
    }
  return Tensor::make_result({m, p}, std::move(out), {A, B}, [m, n, p](detail::Node& self) {
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    const auto& g = self.grad;
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          double acc = 0.0;
          for (std::size_t c = 0; c < p; ++c) acc += g[i * p + c] * bv[k * p + c];
          (*ga)[i * n + k] += acc;
        }
    }
    if (auto* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          const double a = av[i * n + k];
          for (std::size_t c = 0; c < p; ++c) (*gb)[k * p + c] += a * g[i * p + c];
        }
    }
  });
}

Tensor matvec(const Tensor& A, const Tensor& x) {
  require_rank("matvec", A, 2);
  require_rank("matvec", x, 1);
  const std::size_t m = A.rows(), n = A.cols();
  if (x.size() != n) mismatch("matvec", A, x);
  auto av = A.values(), xv = x.values();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) out[i] += av[i * n + k] * xv[k];
  return Tensor::make_result({m}, std::move(out), {A, x}, [m, n](detail::Node& self) {
    const auto& av = value_of(self, 0);
    const auto& xv = value_of(self, 1);
    const auto& g = self.grad;
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) (*ga)[i * n + k] += g[i] * xv[k];
    }
    if (auto* gx = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) (*gx)[k] += g[i] * av[i * n + k];
    }
  });
}

Tensor vecmat(const Tensor& v, const Tensor& M) {
  require_rank("vecmat", v, 1);
  require_rank("vecmat", M, 2);
  const std::size_t n = M.rows(), p = M.cols();
  if (v.size() != n) mismatch("vecmat", v, M);
  auto vv = v.values(), mv = M.values();
  std::vector<double> out(p, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t c = 0; c < p; ++c) out[c] += vv[k] * mv[k * p + c];
  return Tensor::make_result({p}, std::move(out), {v, M}, [n, p](detail::Node& self) {
    const auto& vv = value_of(self, 0);
    const auto& mv = value_of(self, 1);
    const auto& g = self.grad;
    if (auto* gv = grad_of(self, 0)) {
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t c = 0; c < p; ++c) (*gv)[k] += g[c] * mv[k * p + c];
    }
    if (auto* gm = grad_of(self, 1)) {
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t c = 0; c < p; ++c) (*gm)[k * p + c] += vv[k] * g[c];
    }
  });
}

Tensor transpose(const Tensor& A) {
  require_rank("transpose", A, 2);
  const std::size_t m = A.rows(), n = A.cols();
  auto av = A.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return Tensor::make_result({n, m}, std::move(out), {A}, [m, n](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += self.grad[j * m + i];
    }
  });
}

Tensor tanh_elem(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double y = self.value[i];
        (*g)[i] += self.grad[i] * (1.0 - y * y);
      }
    }
  });
}

Tensor sigmoid_elem(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double z = xv[i];
    // Split by sign so exp never overflows.
    if (z >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-z));
    } else {
      const double e = std::exp(z);
      out[i] = e / (1.0 + e);
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double y = self.value[i];
        (*g)[i] += self.grad[i] * y * (1.0 - y);
      }
    }
  });
}

namespace {

void softmax_inplace(std::span<double> v, std::size_t stride) {
  const std::size_t n = (v.size() + stride - 1) / stride;
  double mx = v[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i * stride]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i * stride] = std::exp(v[i * stride] - mx);
    total += v[i * stride];
  }
  for (std::size_t i = 0; i < n; ++i) v[i * stride] /= total;
}

}  // namespace

Tensor softmax_vec(const Tensor& x) {
  require_rank("softmax_vec", x, 1);
  if (x.size() == 0) throw DomainError("softmax_vec: empty vector");
  std::vector<double> out(x.values().begin(), x.values().end());
  softmax_inplace(out, 1);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      const auto& y = self.value;
      double dot = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) dot += self.grad[i] * y[i];
      for (std::size_t i = 0; i < y.size(); ++i) (*g)[i] += y[i] * (self.grad[i] - dot);
    }
  });
}

Tensor softmax_columns(const Tensor& M) {
  require_rank("softmax_columns", M, 2);
  const std::size_t rows = M.rows(), cols = M.cols();
  if (rows == 0) throw DomainError("softmax_columns: empty columns");
  std::vector<double> out(M.values().begin(), M.values().end());
  for (std::size_t c = 0; c < cols; ++c) {
    softmax_inplace(std::span<double>(out).subspan(c, (rows - 1) * cols + 1), cols);
  }
  return Tensor::make_result(M.shape(), std::move(out), {M}, [rows, cols](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      const auto& y = self.value;
      for (std::size_t c = 0; c < cols; ++c) {
        double dot = 0.0;
        for (std::size_t r = 0; r < rows; ++r) dot += self.grad[r * cols + c] * y[r * cols + c];
        for (std::size_t r = 0; r < rows; ++r) {
          const auto i = r * cols + c;
          (*g)[i] += y[i] * (self.grad[i] - dot);
        }
      }
    }
  });
}

Tensor cross_entropy(const Tensor& probabilities, std::size_t target) {
  require_rank("cross_entropy", probabilities, 1);
  if (target >= probabilities.size()) {
    throw DomainError("cross_entropy: target " + std::to_string(target) + " outside " +
                      std::to_string(probabilities.size()) + " classes");
  }
  const double p = probabilities[target];
  const bool clipped = p < kProbabilityFloor;
  const double loss = -std::log(clipped ? kProbabilityFloor : p);
  return Tensor::make_result({}, {loss}, {probabilities},
                             [target, clipped, p](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      if (!clipped) (*g)[target] += -self.grad[0] / p;
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::size_t target) {
  require_rank("softmax_cross_entropy", logits, 1);
  if (target >= logits.size()) {
    throw DomainError("softmax_cross_entropy: target " + std::to_string(target) + " outside " +
                      std::to_string(logits.size()) + " classes");
  }
  std::vector<double> probs(logits.values().begin(), logits.values().end());
  softmax_inplace(probs, 1);
  const double loss = -std::log(std::max(probs[target], kProbabilityFloor));
  return Tensor::make_result({}, {loss}, {logits},
                             [target, probs = std::move(probs)](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < probs.size(); ++i) {
        (*g)[i] += self.grad[0] * (probs[i] - (i == target ? 1.0 : 0.0));
      }
    }
  });
}

Tensor column(const Tensor& M, std::size_t j) {
  require_rank("column", M, 2);
  const std::size_t rows = M.rows(), cols = M.cols();
  if (j >= cols) {
    throw DimensionError("column " + std::to_string(j) + " outside shape " + to_string(M.shape()));
  }
  std::vector<double> out(rows);
  auto mv = M.values();
  for (std::size_t r = 0; r < rows; ++r) out[r] = mv[r * cols + j];
  return Tensor::make_result({rows}, std::move(out), {M}, [rows, cols, j](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) (*g)[r * cols + j] += self.grad[r];
    }
  });
}

Tensor stack_columns(std::span<const Tensor> columns) {
  if (columns.empty()) throw DimensionError("stack_columns: no columns");
  const std::size_t rows = columns[0].size();
  const std::size_t cols = columns.size();
  std::vector<double> out(rows * cols);
  for (std::size_t c = 0; c < cols; ++c) {
    require_rank("stack_columns", columns[c], 1);
    if (columns[c].size() != rows) mismatch("stack_columns", columns[0], columns[c]);
    auto v = columns[c].values();
    for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] = v[r];
  }
  std::vector<Tensor> inputs(columns.begin(), columns.end());
  return Tensor::make_result({rows, cols}, std::move(out), std::move(inputs),
                             [rows, cols](detail::Node& self) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (auto* g = grad_of(self, c)) {
        for (std::size_t r = 0; r < rows; ++r) (*g)[r] += self.grad[r * cols + c];
      }
    }
  });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  require_rank("concat", a, 1);
  require_rank("concat", b, 1);
  const std::size_t na = a.size(), nb = b.size();
  std::vector<double> out;
  out.reserve(na + nb);
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  return Tensor::make_result({na + nb}, std::move(out), {a, b}, [na, nb](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < na; ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < nb; ++i) (*g)[i] += self.grad[na + i];
    }
  });
}

Tensor slice(const Tensor& v, std::size_t start, std::size_t length) {
  require_rank("slice", v, 1);
  if (start + length > v.size()) {
    throw DimensionError("slice [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") outside shape " +
                         to_string(v.shape()));
  }
  std::vector<double> out(v.values().begin() + static_cast<std::ptrdiff_t>(start),
                          v.values().begin() + static_cast<std::ptrdiff_t>(start + length));
  return Tensor::make_result({length}, std::move(out), {v}, [start, length](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < length; ++i) (*g)[start + i] += self.grad[i];
    }
  });
}

Tensor gather_columns(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank("gather_columns", table, 2);
  const std::size_t vocab = table.rows(), d = table.cols(), k = ids.size();
  for (auto id : ids) {
    if (id >= vocab) {
      throw DomainError("gather_columns: id " + std::to_string(id) + " outside table of " +
                        std::to_string(vocab) + " rows");
    }
  }
  auto tv = table.values();
  std::vector<double> out(d * k);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t r = 0; r < d; ++r) out[r * k + c] = tv[ids[c] * d + r];
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return Tensor::make_result({d, k}, std::move(out), {table},
                             [d, k, idx = std::move(idx)](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t r = 0; r < d; ++r) (*g)[idx[c] * d + r] += self.grad[r * k + c];
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return Tensor::make_result({}, {total}, {a}, [](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (auto& gi : *g) gi += self.grad[0];
    }
  });
}

Tensor weighted_sum(const Tensor& a, std::span<const double> weights) {
  if (weights.size() != a.size()) {
    throw DimensionError("weighted_sum: tensor " + to_string(a.shape()) + " vs " +
                         std::to_string(weights.size()) + " weights");
  }
  double total = 0.0;
  auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) total += av[i] * weights[i];
  std::vector<double> w(weights.begin(), weights.end());
  return Tensor::make_result({}, {total}, {a}, [w = std::move(w)](detail::Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < w.size(); ++i) (*g)[i] += self.grad[0] * w[i];
    }
  });
}

}  // namespace xdd::num
