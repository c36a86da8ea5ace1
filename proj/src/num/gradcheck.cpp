#include "xdd/num/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "xdd/error.hpp"

namespace xdd::num {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, ParamList& params,
                           const GradCheckOptions& options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-3)) {
    throw DomainError("grad_check: eps " + std::to_string(options.eps) +
                      " outside [1e-7, 1e-3]");
  }
  for (auto& p : params) {
    if (!p.tensor.requires_grad()) {
      throw DomainError("grad_check: parameter '" + p.name + "' does not require a gradient");
    }
    p.tensor.zero_grad();
  }

  const double first = loss_fn().item();
  const double second = loss_fn().item();
  if (first != second) {
    throw OracleError("grad_check: loss function is not deterministic (" +
                      std::to_string(first) + " vs " + std::to_string(second) + ")");
  }

  loss_fn().backward();

  GradCheckReport report;
  for (auto& p : params) {
    ParamGradError entry;
    entry.name = p.name;
    std::vector<double> analytic(p.tensor.size(), 0.0);
    if (p.tensor.has_grad()) {
      auto g = p.tensor.grad();
      std::copy(g.begin(), g.end(), analytic.begin());
    }
    auto values = p.tensor.mutable_values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + options.eps;
      const double plus = loss_fn().item();
      values[j] = saved - options.eps;
      const double minus = loss_fn().item();
      values[j] = saved;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double a = analytic[j] * options.analytic_scale;
      const double err = relative_error(a, numeric);
      if (err > entry.max_rel_error || j == 0) {
        entry.max_rel_error = err;
        entry.worst_index = j;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.params.push_back(std::move(entry));
    p.tensor.zero_grad();
  }
  return report;
}

}  // namespace xdd::num
