#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace umit {

struct GradOutcome {
  std::string name;
  double err = 0;
  double tol = 0;
  bool pass = false;
};

// Finite-difference verification of every differentiable operator plus
// multi-op compositions and a second-order penalty case, all in 64-bit.
// `only` keeps checks whose name contains the substring. fault != 0 corrupts
// one analytic adjoint per check so a caller can confirm failures are caught.
std::vector<GradOutcome> run_gradchecks(uint64_t seed, double fault = 0.0,
                                        const std::string& only = "");

}  // namespace umit
