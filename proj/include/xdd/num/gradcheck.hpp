#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "xdd/num/tensor.hpp"

namespace xdd::num {

struct GradCheckOptions {
  double eps = 1e-5;
  /// Multiplies the analytic gradient before comparison. Anything other
  /// than 1 is a fault injection used to test the checker itself.
  double analytic_scale = 1.0;
};

struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;
  double max_rel_error = 0.0;
};

/// |a − n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares the reverse-mode gradient of `loss_fn` against central finite
/// differences for every coordinate of every parameter. `loss_fn` must
/// rebuild its graph from the parameters on each call; it is evaluated
/// twice up front and must return bitwise-identical losses.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, ParamList& params,
                           const GradCheckOptions& options = {});

}  // namespace xdd::num
