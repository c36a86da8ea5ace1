#pragma once

// Finite-difference verification of every differentiable building block,
// on random small instances.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "xdd/num/gradcheck.hpp"

namespace xdd::verify {

struct SuiteOptions {
  std::size_t instances = 100;  // per component
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  // Draws with a nonzero gradient coordinate below this are redrawn. At
  // fp64 a central difference with eps 1e-5 carries ~1e-11 absolute
  // roundoff, so smaller gradients cannot be checked to 1e-4 relative.
  // Set to 0 to check every draw.
  double min_resolvable_gradient = 1e-7;
  num::GradCheckOptions check;
};

struct ComponentResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t unresolvable = 0;  // draws skipped by min_resolvable_gradient
  double max_rel_error = 0.0;
  std::string worst_param;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

struct SuiteReport {
  std::vector<ComponentResult> components;
  double seconds = 0.0;

  bool passed() const;
};

std::vector<std::string> component_names();

SuiteReport run_gradcheck_suite(const SuiteOptions& options = {});

}  // namespace xdd::verify
