#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vggft {

struct GradCheckResult {
  std::string kernel;
  double max_rel_error = 0.0;
};

// Compares analytic gradients against central finite differences (h = 1e-3,
// 64-bit) on random inputs for every differentiable kernel plus the composed
// classifier head. Elements with |analytic| < 1e-8 are compared absolutely.
std::vector<GradCheckResult> run_gradcheck(uint64_t seed = 42);

constexpr double kGradCheckTolerance = 1e-4;

}  // namespace vggft
