// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pvl/backbone/vit.hpp"

namespace pvl::pkt {

/// How per-token modulation features collapse to one D-vector.
enum class PoolMode { Mean, ClsToken };

/// Point-wise (1x1) convolutions of one tuned layer. Each head map is
/// (D/H -> D/H) applied token-wise; the generic map is (D -> D).
struct ModulationConvs {
  std::vector<Tensor> head_w; // H x [dh x dh]
  std::vector<Tensor> head_b; // H x [dh]
  Tensor generic_w;           // [D x D]
  Tensor generic_b;           // [D]
};

struct PromptState {
  /// [L, 2, P, D]: per tuned layer, P key rows then P value rows.
  /// Undefined when the config has no tuned layers.
  Tensor b_prompt;
  /// [2, D]: row 0 vision token, row 1 language token.
  Tensor vl;
  std::vector<ModulationConvs> convs; // one per tuned layer
};

/// B-Prompt and VL-Prompt truncated normal (std 0.02); modulation
/// convolutions at the identity convention (weights 0, bias 1).
PromptState init_prompts(const backbone::ViTConfig &config, Rng &rng);

void visit_parameters(PromptState &state,
                      const std::function<void(const std::string &, Tensor &)> &fn);

/// Raw key/value prefix rows of tuned layer `layer` (each P x D).
backbone::Prefix b_prompt_layer(const PromptState &state,
                                const backbone::ViTConfig &config,
                                std::size_t layer);

/// Input-dependent scales for one tuned layer, plus the intermediate
/// features they were computed from.
struct ModulationPrompts {
  Tensor specific; // P_M^S, [D]
  Tensor generic;  // P_M^G, [D]
  Tensor h_msa;    // concatenated head outputs, [T x D]
  Tensor h_mlp;    // [T x D]
};

/// Runs the layer's own attention on LN(x) without prefixes, applies the
/// head-specific convolutions to each head's output and pools over tokens,
/// then runs the layer's MLP on LN(x + MSA) and applies the generic
/// convolution the same way.
ModulationPrompts compute_modulation(const backbone::BlockWeights &block,
                                     const ModulationConvs &convs,
                                     const backbone::ViTConfig &config,
                                     const Tensor &x,
                                     PoolMode pool = PoolMode::Mean);

/// Variant that reuses LN1(x) projections already computed by the caller.
ModulationPrompts compute_modulation(const backbone::BlockWeights &block,
                                     const ModulationConvs &convs,
                                     const backbone::ViTConfig &config,
                                     const Tensor &x,
                                     const backbone::Projections &proj,
                                     PoolMode pool);

/// keys' = P_M^S (.) keys, values' = P_M^G (.) values, broadcast over rows.
backbone::Prefix modulate(const backbone::Prefix &raw, const Tensor &specific,
                          const Tensor &generic);

} // namespace pvl::pkt
