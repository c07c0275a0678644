// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pvl/numerics/optim.hpp"
#include "pvl/numerics/rng.hpp"
#include "pvl/numerics/tensor.hpp"

namespace pvl::backbone {

// Fixed token layout: [CLS; vision; language; patches...].
inline constexpr std::size_t kClsToken = 0;
inline constexpr std::size_t kVisionToken = 1;
inline constexpr std::size_t kLanguageToken = 2;
inline constexpr std::size_t kFirstPatchToken = 3;

struct ViTConfig {
  std::size_t image_height = 16;
  std::size_t image_width = 16;
  std::size_t channels = 1;
  std::size_t patch_size = 4;
  std::size_t embed_dim = 32;
  std::size_t num_heads = 4;
  std::size_t depth = 4;
  double mlp_ratio = 2.0;
  std::size_t prefix_len = 1;
  std::size_t tuned_layers = 2;

  std::size_t grid_h() const { return image_height / patch_size; }
  std::size_t grid_w() const { return image_width / patch_size; }
  std::size_t num_patches() const { return grid_h() * grid_w(); }
  std::size_t num_tokens() const { return kFirstPatchToken + num_patches(); }
  std::size_t head_dim() const { return embed_dim / num_heads; }
  std::size_t mlp_hidden() const;
  std::size_t patch_dim() const { return channels * patch_size * patch_size; }
  std::size_t image_numel() const {
    return channels * image_height * image_width;
  }

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;

  bool operator==(const ViTConfig &) const = default;
};

struct BlockWeights {
  Tensor ln1_g, ln1_b;
  Tensor w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
  Tensor ln2_g, ln2_b;
  Tensor w_fc1, b_fc1, w_fc2, b_fc2;
};

struct BackboneState {
  Tensor patch_w, patch_b; // [patch_dim x D], [D]
  Tensor cls_token;        // [D]
  Tensor pos_embed;        // [T x D]
  std::vector<BlockWeights> blocks;
  Tensor norm_g, norm_b;
};

/// Linear weights Xavier-uniform, biases zero, LN gains one; [CLS] and
/// positional embeddings truncated normal with std 0.02.
BackboneState init_backbone(const ViTConfig &config, Rng &rng);

/// Visits every weight as (name, tensor) in a fixed order.
void visit_parameters(BackboneState &state,
                      const std::function<void(const std::string &, Tensor &)> &fn);
void visit_parameters(const BackboneState &state,
                      const std::function<void(const std::string &, const Tensor &)> &fn);

/// Names of the weights that belong to block `index`.
std::string block_prefix(std::size_t index);

/// Splits an image (C x H x W, row-major) into non-overlapping patches:
/// one row per patch in raster order, flattened channel-major.
Tensor patchify(const ViTConfig &config, std::span<const double> image);

/// Linear projection of every patch: [num_patches x D].
Tensor patch_embed(const BackboneState &state, const ViTConfig &config,
                   std::span<const double> image);

/// [CLS; vl_prompt rows; patches] + positional embeddings. `vl_prompt` must
/// be 2 x D.
Tensor assemble_sequence(const BackboneState &state, const ViTConfig &config,
                         const Tensor &patch_tokens, const Tensor &vl_prompt);

/// Key/value rows prepended to every head's attention (P x D each).
struct Prefix {
  Tensor keys;
  Tensor values;
};

/// Query/key/value projections of a normalized token matrix.
struct Projections {
  Tensor q, k, v;
};

Projections project_qkv(const BlockWeights &block, const Tensor &normed);

/// Per-head scaled dot-product attention; returns concatenated head outputs
/// before the output projection (T x D). Prefix rows extend keys and values
/// only, sliced per head with the same contiguous partition as the tokens.
Tensor attend(const Projections &proj, std::size_t num_heads,
              const Prefix *prefix = nullptr);

Tensor mlp(const BlockWeights &block, const Tensor &normed);

/// Pre-norm block: x + MSA(LN(x)) then + MLP(LN(.)). A prefix is only legal
/// for blocks below config.tuned_layers.
Tensor block_forward(const BackboneState &state, const ViTConfig &config,
                     const Tensor &x, std::size_t block_index,
                     const Prefix *prefix = nullptr);

/// Same as block_forward, reusing projections of LN1(x) computed by the
/// caller.
Tensor block_forward_projected(const BlockWeights &block,
                               const ViTConfig &config, const Tensor &x,
                               const Projections &proj, const Prefix *prefix);

struct ForwardTrace {
  std::vector<Tensor> block_inputs;
  Tensor final_tokens; // T x D after the final LN
  std::vector<Tensor> h_msa;
  std::vector<Tensor> h_mlp;
};

/// Replacement for block_forward on tuned layers (index < tuned_layers).
using TunedBlockFn = std::function<Tensor(const Tensor &x, std::size_t index)>;

/// Runs every block over an assembled sequence and applies the final LN.
/// Blocks below config.tuned_layers go through `tuned` when it is set.
Tensor encode(const BackboneState &state, const ViTConfig &config,
              const Tensor &sequence, const TunedBlockFn &tuned = {},
              ForwardTrace *trace = nullptr);

} // namespace pvl::backbone
