// SPDX-License-Identifier: Apache-2.0
#include "pvl/backbone/vit.hpp"

#include <cmath>

#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/ops.hpp"

namespace pvl::backbone {

std::size_t ViTConfig::mlp_hidden() const {
  return static_cast<std::size_t>(
      std::lround(mlp_ratio * static_cast<double>(embed_dim)));
}

void ViTConfig::validate() const {
  auto fail = [](const std::string &msg) { throw ConfigError("vit: " + msg); };
  if (patch_size == 0 || image_height == 0 || image_width == 0 || channels == 0)
    fail("image and patch sizes must be positive");
  if (image_height % patch_size || image_width % patch_size)
    fail("image " + std::to_string(image_height) + "x" +
         std::to_string(image_width) + " not divisible by patch " +
         std::to_string(patch_size));
  if (embed_dim == 0 || num_heads == 0 || embed_dim % num_heads)
    fail("embed_dim " + std::to_string(embed_dim) + " not divisible by " +
         std::to_string(num_heads) + " heads");
  if (depth == 0)
    fail("depth must be positive");
  if (tuned_layers > depth)
    fail("tuned_layers " + std::to_string(tuned_layers) + " exceeds depth " +
         std::to_string(depth));
  if (prefix_len == 0)
    fail("prefix_len must be at least 1");
  if (mlp_hidden() == 0)
    fail("mlp_ratio yields an empty hidden layer");
}

namespace {

Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng &rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(fan_in * fan_out);
  for (auto &v : w)
    v = dist(rng);
  return Tensor::matrix(fan_in, fan_out, std::move(w));
}

Tensor trunc_normal(Shape shape, double std, Rng &rng) {
  std::vector<double> w(shape_numel(shape));
  for (auto &v : w)
    v = truncated_normal(rng, std);
  return Tensor(std::move(shape), std::move(w));
}

template <typename State, typename Fn>
void visit_impl(State &s, Fn &&fn) {
  fn("patch_embed.w", s.patch_w);
  fn("patch_embed.b", s.patch_b);
  fn("cls_token", s.cls_token);
  fn("pos_embed", s.pos_embed);
  for (std::size_t i = 0; i < s.blocks.size(); ++i) {
    auto &b = s.blocks[i];
    const auto p = block_prefix(i);
    fn(p + "ln1.g", b.ln1_g);
    fn(p + "ln1.b", b.ln1_b);
    fn(p + "msa.w_q", b.w_q);
    fn(p + "msa.b_q", b.b_q);
    fn(p + "msa.w_k", b.w_k);
    fn(p + "msa.b_k", b.b_k);
    fn(p + "msa.w_v", b.w_v);
    fn(p + "msa.b_v", b.b_v);
    fn(p + "msa.w_o", b.w_o);
    fn(p + "msa.b_o", b.b_o);
    fn(p + "ln2.g", b.ln2_g);
    fn(p + "ln2.b", b.ln2_b);
    fn(p + "mlp.w1", b.w_fc1);
    fn(p + "mlp.b1", b.b_fc1);
    fn(p + "mlp.w2", b.w_fc2);
    fn(p + "mlp.b2", b.b_fc2);
  }
  fn("norm.g", s.norm_g);
  fn("norm.b", s.norm_b);
}

} // namespace

BackboneState init_backbone(const ViTConfig &config, Rng &rng) {
  config.validate();
  const std::size_t d = config.embed_dim, hidden = config.mlp_hidden();
  BackboneState s;
  s.patch_w = xavier(config.patch_dim(), d, rng);
  s.patch_b = Tensor::zeros({d});
  s.cls_token = trunc_normal({d}, 0.02, rng);
  s.pos_embed = trunc_normal({config.num_tokens(), d}, 0.02, rng);
  for (std::size_t i = 0; i < config.depth; ++i) {
    BlockWeights b;
    b.ln1_g = Tensor::ones({d});
    b.ln1_b = Tensor::zeros({d});
    b.w_q = xavier(d, d, rng);
    b.b_q = Tensor::zeros({d});
    b.w_k = xavier(d, d, rng);
    b.b_k = Tensor::zeros({d});
    b.w_v = xavier(d, d, rng);
    b.b_v = Tensor::zeros({d});
    b.w_o = xavier(d, d, rng);
    b.b_o = Tensor::zeros({d});
    b.ln2_g = Tensor::ones({d});
    b.ln2_b = Tensor::zeros({d});
    b.w_fc1 = xavier(d, hidden, rng);
    b.b_fc1 = Tensor::zeros({hidden});
    b.w_fc2 = xavier(hidden, d, rng);
    b.b_fc2 = Tensor::zeros({d});
    s.blocks.push_back(std::move(b));
  }
  s.norm_g = Tensor::ones({d});
  s.norm_b = Tensor::zeros({d});
  return s;
}

void visit_parameters(
    BackboneState &state,
    const std::function<void(const std::string &, Tensor &)> &fn) {
  visit_impl(state, fn);
}

void visit_parameters(
    const BackboneState &state,
    const std::function<void(const std::string &, const Tensor &)> &fn) {
  visit_impl(state, fn);
}

std::string block_prefix(std::size_t index) {
  return "block." + std::to_string(index) + ".";
}

Tensor patchify(const ViTConfig &config, std::span<const double> image) {
  if (image.size() != config.image_numel())
    throw DimensionError("patchify: image has " + std::to_string(image.size()) +
                         " values, expected " +
                         std::to_string(config.image_numel()));
  const std::size_t p = config.patch_size, h = config.image_height,
                    w = config.image_width;
  const std::size_t n = config.num_patches(), pd = config.patch_dim();
  std::vector<double> out(n * pd);
  std::size_t idx = 0;
  for (std::size_t gy = 0; gy < config.grid_h(); ++gy)
    for (std::size_t gx = 0; gx < config.grid_w(); ++gx)
      for (std::size_t c = 0; c < config.channels; ++c)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t x = 0; x < p; ++x)
            out[idx++] = image[(c * h + gy * p + y) * w + gx * p + x];
  return Tensor::matrix(n, pd, std::move(out));
}

Tensor patch_embed(const BackboneState &state, const ViTConfig &config,
                   std::span<const double> image) {
  return linear(patchify(config, image), state.patch_w, state.patch_b);
}

Tensor assemble_sequence(const BackboneState &state, const ViTConfig &config,
                         const Tensor &patch_tokens, const Tensor &vl_prompt) {
  const std::size_t d = config.embed_dim;
  if (vl_prompt.rows() != 2 || vl_prompt.cols() != d)
    throw DimensionError("assemble_sequence: VL-Prompt must be 2x" +
                         std::to_string(d) + ", got " +
                         shape_str(vl_prompt.shape()));
  if (patch_tokens.rows() != config.num_patches() || patch_tokens.cols() != d)
    throw DimensionError("assemble_sequence: patch tokens " +
                         shape_str(patch_tokens.shape()) + " do not match config");
  Tensor seq = concat_rows({reshape(state.cls_token, {1, d}),
                            reshape(vl_prompt, {2, d}), patch_tokens});
  return add(seq, state.pos_embed);
}

Projections project_qkv(const BlockWeights &block, const Tensor &normed) {
  return {linear(normed, block.w_q, block.b_q),
          linear(normed, block.w_k, block.b_k),
          linear(normed, block.w_v, block.b_v)};
}

Tensor attend(const Projections &proj, std::size_t num_heads,
              const Prefix *prefix) {
  const std::size_t d = proj.q.cols();
  const std::size_t dh = d / num_heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (prefix && (prefix->keys.cols() != d || prefix->values.cols() != d ||
                 prefix->keys.rows() != prefix->values.rows()))
    throw DimensionError("attend: prefix keys " +
                         shape_str(prefix->keys.shape()) + " / values " +
                         shape_str(prefix->values.shape()) +
                         " do not match embed dim " + std::to_string(d));
  std::vector<Tensor> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const std::size_t c0 = h * dh, c1 = c0 + dh;
    Tensor q = slice_cols(proj.q, c0, c1);
    Tensor k = slice_cols(proj.k, c0, c1);
    Tensor v = slice_cols(proj.v, c0, c1);
    if (prefix) {
      k = concat_rows({slice_cols(prefix->keys, c0, c1), k});
      v = concat_rows({slice_cols(prefix->values, c0, c1), v});
    }
    Tensor weights = softmax(scale(matmul_nt(q, k), inv_scale), -1);
    heads.push_back(matmul(weights, v));
  }
  return num_heads == 1 ? heads.front() : concat_cols(heads);
}

Tensor mlp(const BlockWeights &block, const Tensor &normed) {
  return linear(gelu(linear(normed, block.w_fc1, block.b_fc1)), block.w_fc2,
                block.b_fc2);
}

Tensor block_forward_projected(const BlockWeights &block,
                               const ViTConfig &config, const Tensor &x,
                               const Projections &proj, const Prefix *prefix) {
  Tensor heads = attend(proj, config.num_heads, prefix);
  Tensor x1 = add(x, linear(heads, block.w_o, block.b_o));
  return add(x1, mlp(block, layer_norm(x1, block.ln2_g, block.ln2_b)));
}

Tensor block_forward(const BackboneState &state, const ViTConfig &config,
                     const Tensor &x, std::size_t block_index,
                     const Prefix *prefix) {
  if (block_index >= state.blocks.size())
    throw IndexError("block_forward: block " + std::to_string(block_index) +
                     " of " + std::to_string(state.blocks.size()));
  if (prefix && block_index >= config.tuned_layers)
    throw ContractError("block_forward: prefix supplied to non-tuned block " +
                        std::to_string(block_index));
  const auto &block = state.blocks[block_index];
  Projections proj =
      project_qkv(block, layer_norm(x, block.ln1_g, block.ln1_b));
  return block_forward_projected(block, config, x, proj, prefix);
}

Tensor encode(const BackboneState &state, const ViTConfig &config,
              const Tensor &sequence, const TunedBlockFn &tuned,
              ForwardTrace *trace) {
  Tensor x = sequence;
  for (std::size_t i = 0; i < state.blocks.size(); ++i) {
    if (trace)
      trace->block_inputs.push_back(x);
    if (tuned && i < config.tuned_layers)
      x = tuned(x, i);
    else
      x = block_forward(state, config, x, i);
  }
  Tensor out = layer_norm(x, state.norm_g, state.norm_b);
  if (trace)
    trace->final_tokens = out;
  return out;
}

} // namespace pvl::backbone
