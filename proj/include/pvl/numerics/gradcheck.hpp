// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <string>

#include "pvl/numerics/optim.hpp"

namespace pvl {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Denominator floor: rel = |a - n| / max(|a|, |n|, floor).
  double floor = 1e-4;
  /// Test hook: added to every analytic gradient before comparison.
  double analytic_bias = 0.0;
};

/// Compares reverse-mode gradients of `loss_fn` with central differences for
/// every element of every parameter in `params` (trainable flag ignored).
/// `loss_fn` must rebuild the graph on each call and return a scalar.
GradCheckResult gradcheck(const std::function<Tensor()> &loss_fn,
                          std::span<const Parameter> params,
                          const GradCheckOptions &options = {});

} // namespace pvl
