// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pvl/backbone/vit.hpp"
#include "pvl/pkt/prompts.hpp"

namespace pvl {

enum class SessionKind { Pretrain, Base, Incremental };

struct ModelOptions {
  bool use_b_prompt = true;
  bool use_modulation = true;
  bool use_vl_prompt = true;
  pkt::PoolMode pool = pkt::PoolMode::Mean;
};

/// Backbone, prompts, and an optional linear pretext head.
struct Model {
  backbone::ViTConfig config;
  backbone::BackboneState backbone;
  pkt::PromptState prompts;
  Tensor head_w; // [D x pretext classes], undefined when absent
  Tensor head_b;
  ModelOptions options;

  static Model create(const backbone::ViTConfig &config, std::uint64_t seed);

  /// Every weight, named and in a fixed order; trainable mirrors requires_grad.
  std::vector<Parameter> parameters() const;
  /// Parameters whose names start with `prefix`.
  std::vector<Parameter> parameters(const std::string &prefix) const;

  /// Independent deep copy.
  Model clone() const;

  /// Makes exactly the named parameters trainable; unknown names throw.
  void set_trainable(const std::set<std::string> &names);

  void attach_head(std::size_t classes, std::uint64_t seed);
  void drop_head();
};

struct Features {
  Tensor cls;  // f^cls
  Tensor vis;  // f^vis
  Tensor lang; // f^lang
};

/// Tuned layer with prompt knowledge: modulation prompts from a prefix-free
/// pass, modulated B-Prompt prefix, then the prefixed block.
Tensor modulated_block(const Model &model, const Tensor &x, std::size_t layer,
                       backbone::ForwardTrace *trace = nullptr);

/// Patch embedding, sequence assembly with the VL-Prompt (zeros when
/// disabled), every block, final LN; returns tokens 0, 1, 2.
Features forward(const Model &model, std::span<const double> image,
                 backbone::ForwardTrace *trace = nullptr);

/// Names of the parameters updated in a session of the given kind.
std::set<std::string> trainable_set(const Model &model, SessionKind kind);

} // namespace pvl
