// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pvl/numerics/tensor.hpp"

namespace pvl {

/// A named model weight. `tensor` is a handle into the owning model, so
/// updates through a Parameter are visible to the model.
struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = false;
};

/// Throws ContractError when two parameters share a name.
void check_unique_names(std::span<const Parameter> params);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers keyed by parameter name.
struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
};

/// One bias-corrected Adam update of every trainable parameter, followed by
/// clearing all gradients. Non-trainable parameters are never written.
void adam_step(std::span<const Parameter> params, AdamState &state, double lr);

/// lr_base * 0.5 * (1 + cos(pi * step / total_steps))
double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double lr_base);

/// Global L2 norm of the gradients held by `params` (absent grads count as 0).
double grad_norm(std::span<const Parameter> params);

} // namespace pvl
