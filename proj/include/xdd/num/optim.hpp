#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xdd/num/tensor.hpp"

namespace xdd::num {

enum class OptimizerKind { adam, radam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

struct OptimizerState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// Zeroed moments shaped like `params`.
OptimizerState make_optimizer_state(std::span<const Tensor> params, double lr,
                                    double beta1 = 0.9, double beta2 = 0.999,
                                    double eps = 1e-8);

/// Adam with bias correction. grads[i] must match params[i] in size.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
               OptimizerState& state);

/// Rectified Adam. While the variance-rectification term ρ_t ≤ 4 the
/// update falls back to bias-corrected momentum without adaptive scaling.
void radam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
                OptimizerState& state);

/// Owns the state for one parameter set and pulls gradients from the
/// tensors themselves. Parameters without a gradient buffer contribute a
/// zero gradient.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::vector<Tensor> params, double lr);

  void step();
  void zero_grad();

  OptimizerKind kind() const { return kind_; }
  const OptimizerState& state() const { return state_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  OptimizerKind kind_;
  std::vector<Tensor> params_;
  OptimizerState state_;
};

}  // namespace xdd::num
