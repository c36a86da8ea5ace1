#include "xdd/num/optim.hpp"

#include <cmath>

#include "xdd/error.hpp"

namespace xdd::num {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "radam";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "radam") return OptimizerKind::radam;
  throw ConfigError("unknown optimizer '" + name + "' (expected adam or radam)");
}

OptimizerState make_optimizer_state(std::span<const Tensor> params, double lr, double beta1,
                                    double beta2, double eps) {
  OptimizerState state;
  state.lr = lr;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.eps = eps;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

namespace {

void check_shapes(std::span<Tensor> params, std::span<const std::vector<double>> grads,
                  const OptimizerState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw DimensionError("optimizer: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " +
                         std::to_string(state.first_moment.size()) + " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].size() || state.first_moment[i].size() != params[i].size()) {
      throw DimensionError("optimizer: param " + std::to_string(i) + " has shape " +
                           to_string(params[i].shape()) + " but gradient has " +
                           std::to_string(grads[i].size()) + " values");
    }
  }
}

void update_moments(std::vector<double>& m, std::vector<double>& v,
                    const std::vector<double>& g, const OptimizerState& s) {
  for (std::size_t j = 0; j < g.size(); ++j) {
    m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * g[j];
    v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g[j] * g[j];
  }
}

}  // namespace

void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
               OptimizerState& state) {
  check_shapes(params, grads, state);
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    update_moments(m, v, grads[i], state);
    auto w = params[i].mutable_values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

void radam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
                OptimizerState& state) {
  check_shapes(params, grads, state);
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double beta2_t = std::pow(state.beta2, t);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - beta2_t;
  const double rho_inf = 2.0 / (1.0 - state.beta2) - 1.0;
  const double rho_t = rho_inf - 2.0 * t * beta2_t / bc2;
  const bool rectified = rho_t > 4.0;
  double r_t = 0.0;
  if (rectified) {
    r_t = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf /
                    ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    update_moments(m, v, grads[i], state);
    auto w = params[i].mutable_values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double m_hat = m[j] / bc1;
      if (rectified) {
        const double adaptive = std::sqrt(bc2) / (std::sqrt(v[j]) + state.eps);
        w[j] -= state.lr * r_t * m_hat * adaptive;
      } else {
        w[j] -= state.lr * m_hat;
      }
    }
  }
}

Optimizer::Optimizer(OptimizerKind kind, std::vector<Tensor> params, double lr)
    : kind_(kind), params_(std::move(params)), state_(make_optimizer_state(params_, lr)) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
}

void Optimizer::step() {
  std::vector<std::vector<double>> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) {
    if (p.has_grad()) {
      grads.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      grads.emplace_back(p.size(), 0.0);
    }
  }
  if (kind_ == OptimizerKind::adam) {
    adam_step(params_, grads, state_);
  } else {
    radam_step(params_, grads, state_);
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace xdd::num
