#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace segan {

struct GradSuiteCase {
  std::string op;
  double err32 = 0.0;  // max relative error, float forward/backward vs double FD
  double err64 = 0.0;  // max relative error, double forward/backward vs double FD
  bool pass = false;
};

struct GradSuiteResult {
  std::vector<GradSuiteCase> cases;
  bool pass = false;
  double seconds = 0.0;
  int total_shapes = 0;  // distinct random shape/seed configurations exercised
};

// Finite-difference checks over every differentiable op and both losses, several random
// shapes each. Thresholds: 1e-4 in 32-bit, 1e-6 in 64-bit.
GradSuiteResult run_gradient_suite(uint64_t seed);

}  // namespace segan
