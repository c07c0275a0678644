// SPDX-License-Identifier: Apache-2.0
#include "pvl/numerics/optim.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "pvl/numerics/errors.hpp"

namespace pvl {

void check_unique_names(std::span<const Parameter> params) {
  std::set<std::string> seen;
  for (const auto &p : params)
    if (!seen.insert(p.name).second)
      throw ContractError("duplicate parameter name: " + p.name);
}

void adam_step(std::span<const Parameter> params, AdamState &state, double lr) {
  for (const auto &p : params)
    if (p.trainable && !p.tensor.has_grad())
      throw ContractError("adam_step: trainable parameter '" + p.name +
                          "' has no gradient");

  state.step += 1;
  const auto &opt = state.options;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);

  for (const auto &p : params) {
    if (!p.trainable)
      continue;
    Tensor w = p.tensor;
    auto values = w.mutable_data();
    auto grad = w.grad();
    auto &m = state.first_moment[p.name];
    auto &v = state.second_moment[p.name];
    if (m.empty()) {
      m.assign(values.size(), 0.0);
      v.assign(values.size(), 0.0);
    }
    if (m.size() != values.size())
      throw ContractError("adam_step: moment buffer shape changed for '" +
                          p.name + "'");
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * grad[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  }
  for (const auto &p : params) {
    Tensor w = p.tensor;
    if (w.has_grad())
      w.zero_grad();
  }
}

double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double lr_base) {
  if (total_steps == 0)
    throw ContractError("cosine_lr: total_steps must be at least 1");
  if (step > total_steps)
    throw ContractError("cosine_lr: step " + std::to_string(step) +
                        " beyond total " + std::to_string(total_steps));
  const double frac =
      static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_base * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

double grad_norm(std::span<const Parameter> params) {
  double s = 0.0;
  for (const auto &p : params)
    for (double g : p.tensor.grad())
      s += g * g;
  return std::sqrt(s);
}

} // namespace pvl
