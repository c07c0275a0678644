// SPDX-License-Identifier: Apache-2.0
#include "pvl/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pvl {

GradCheckResult gradcheck(const std::function<Tensor()> &loss_fn,
                          std::span<const Parameter> params,
                          const GradCheckOptions &options) {
  std::vector<bool> previous;
  for (const auto &p : params) {
    Tensor t = p.tensor;
    previous.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.clear_grad();
  }
  backward(loss_fn());

  std::vector<std::vector<double>> analytic;
  for (const auto &p : params) {
    auto g = p.tensor.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty())
      analytic.back().assign(p.tensor.numel(), 0.0);
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor t = params[k].tensor;
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double plus = loss_fn().item();
      values[i] = saved - options.step;
      const double minus = loss_fn().item();
      values[i] = saved;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[k][i] + options.analytic_bias;
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error || !std::isfinite(rel)) {
        result.max_rel_error = std::isfinite(rel) ? rel : HUGE_VAL;
        result.worst_parameter = params[k].name;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }

  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor t = params[k].tensor;
    t.clear_grad();
    t.set_requires_grad(previous[k]);
  }
  return result;
}

} // namespace pvl
