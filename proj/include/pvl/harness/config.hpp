// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pvl/backbone/vit.hpp"
#include "pvl/objectives/losses.hpp"
#include "pvl/pkt/model.hpp"

namespace pvl::harness {

struct ExperimentConfig {
  std::string method = "full";
  std::string preset = "cifar-mini";
  backbone::ViTConfig vit;
  objectives::LossWeights weights;
  double proto_scale = 10.0;
  double noise_sigma = 0.15;

  double lr = 2e-4;
  double pretrain_lr = 3e-3;
  /// Learning rate of the fine-tune baseline in incremental sessions.
  double finetune_incremental_lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t pretrain_epochs = 12;
  std::size_t base_epochs = 5;
  std::size_t incremental_epochs = 3;

  bool use_pkt_layers = true;
  bool use_modulation = true;
  bool use_b_prompt = true;
  bool use_vl_prompt = true;
  bool use_ed = true;
  bool use_skd = true;
  /// Naive fine-tuning: every backbone weight trainable in every session.
  bool finetune_all = false;
  bool refresh_base_prototypes = true;

  /// Stop the base session after this many steps (0 = all) without
  /// shortening its learning-rate schedule; used by diagnostics.
  std::size_t max_base_steps = 0;
  bool base_only = false;

  std::uint64_t seed = 1;
  bool parallel = true;

  /// Throws ConfigError on inconsistent flags or non-positive schedule values.
  void validate() const;

  ModelOptions model_options() const;
  /// Loss weights with disabled terms zeroed.
  objectives::LossWeights effective_weights() const;
  objectives::FeatureMode feature_mode() const;

  bool operator==(const ExperimentConfig &) const = default;
};

/// "baseline-finetune", "pkt", "pkt-ed", "pkt-skd", "full".
std::vector<std::string> method_names();
/// Applies the method's flags on top of `base`; throws ConfigError for an
/// unknown name.
ExperimentConfig apply_method(ExperimentConfig base, const std::string &method);

} // namespace pvl::harness
