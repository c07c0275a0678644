// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pvl/numerics/gradcheck.hpp"

namespace pvl::harness {

struct GradSuiteOptions {
  double primitive_tolerance = 1e-6;
  double composite_tolerance = 1e-4;
  double step = 1e-5;
  double floor = 1e-4;
  /// Test hook: adds `fault_bias` to the analytic gradient of this case.
  std::string inject_fault;
  double fault_bias = 1.0;
  std::uint64_t seed = 0x67726164ULL;
};

struct GradSuiteEntry {
  std::string name;
  bool composite = false;
  double tolerance = 0.0;
  GradCheckResult result;
  bool passed = false;
};

/// Finite-difference check of every primitive op and of the composite losses
/// through the full modulated-prefix forward of a tiny model (D=8, two heads,
/// two blocks, two patches).
std::vector<GradSuiteEntry> run_grad_suite(const GradSuiteOptions &options = {});

std::vector<std::string> grad_suite_case_names();

} // namespace pvl::harness
