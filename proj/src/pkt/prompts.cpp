// SPDX-License-Identifier: Apache-2.0
#include "pvl/pkt/prompts.hpp"

#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/ops.hpp"

namespace pvl::pkt {

using backbone::Prefix;
using backbone::ViTConfig;

PromptState init_prompts(const ViTConfig &config, Rng &rng) {
  config.validate();
  const std::size_t d = config.embed_dim, dh = config.head_dim();
  const std::size_t layers = config.tuned_layers, p = config.prefix_len;
  PromptState s;
  if (layers > 0) {
    std::vector<double> b(layers * 2 * p * d);
    for (auto &v : b)
      v = truncated_normal(rng, 0.02);
    s.b_prompt = Tensor({layers, 2, p, d}, std::move(b));
  }
  std::vector<double> vl(2 * d);
  for (auto &v : vl)
    v = truncated_normal(rng, 0.02);
  s.vl = Tensor::matrix(2, d, std::move(vl));
  for (std::size_t l = 0; l < layers; ++l) {
    ModulationConvs c;
    for (std::size_t h = 0; h < config.num_heads; ++h) {
      c.head_w.push_back(Tensor::zeros({dh, dh}));
      c.head_b.push_back(Tensor::ones({dh}));
    }
    c.generic_w = Tensor::zeros({d, d});
    c.generic_b = Tensor::ones({d});
    s.convs.push_back(std::move(c));
  }
  return s;
}

void visit_parameters(
    PromptState &state,
    const std::function<void(const std::string &, Tensor &)> &fn) {
  if (state.b_prompt.defined())
    fn("prompt.b_prompt", state.b_prompt);
  fn("prompt.vl", state.vl);
  for (std::size_t l = 0; l < state.convs.size(); ++l) {
    auto &c = state.convs[l];
    const std::string p = "prompt.mod." + std::to_string(l) + ".";
    for (std::size_t h = 0; h < c.head_w.size(); ++h) {
      fn(p + "head." + std::to_string(h) + ".w", c.head_w[h]);
      fn(p + "head." + std::to_string(h) + ".b", c.head_b[h]);
    }
    fn(p + "generic.w", c.generic_w);
    fn(p + "generic.b", c.generic_b);
  }
}

Prefix b_prompt_layer(const PromptState &state, const ViTConfig &config,
                      std::size_t layer) {
  if (layer >= config.tuned_layers || !state.b_prompt.defined())
    throw ContractError("b_prompt_layer: layer " + std::to_string(layer) +
                        " is not a tuned layer");
  const std::size_t p = config.prefix_len;
  const std::size_t key0 = 2 * layer * p;
  return {slice_rows(state.b_prompt, key0, key0 + p),
          slice_rows(state.b_prompt, key0 + p, key0 + 2 * p)};
}

namespace {

Tensor pool_tokens(const Tensor &tokens, PoolMode pool) {
  return pool == PoolMode::Mean ? mean_rows(tokens)
                                : row(tokens, backbone::kClsToken);
}

} // namespace

ModulationPrompts compute_modulation(const backbone::BlockWeights &block,
                                     const ModulationConvs &convs,
                                     const ViTConfig &config, const Tensor &x,
                                     PoolMode pool) {
  auto proj = backbone::project_qkv(block,
                                    layer_norm(x, block.ln1_g, block.ln1_b));
  return compute_modulation(block, convs, config, x, proj, pool);
}

ModulationPrompts compute_modulation(const backbone::BlockWeights &block,
                                     const ModulationConvs &convs,
                                     const ViTConfig &config, const Tensor &x,
                                     const backbone::Projections &proj,
                                     PoolMode pool) {
  const std::size_t heads = config.num_heads, dh = config.head_dim();
  if (convs.head_w.size() != heads)
    throw DimensionError("compute_modulation: " +
                         std::to_string(convs.head_w.size()) +
                         " head convolutions for " + std::to_string(heads) +
                         " heads");
  ModulationPrompts out;
  out.h_msa = backbone::attend(proj, heads);

  std::vector<Tensor> per_head;
  per_head.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor head_out = slice_cols(out.h_msa, h * dh, (h + 1) * dh);
    per_head.push_back(reshape(
        pool_tokens(linear(head_out, convs.head_w[h], convs.head_b[h]), pool),
        {1, dh}));
  }
  out.specific = reshape(heads == 1 ? per_head.front() : concat_cols(per_head),
                         {config.embed_dim});

  Tensor attn = linear(out.h_msa, block.w_o, block.b_o);
  out.h_mlp =
      backbone::mlp(block, layer_norm(add(x, attn), block.ln2_g, block.ln2_b));
  out.generic = pool_tokens(linear(out.h_mlp, convs.generic_w, convs.generic_b),
                            pool);
  return out;
}

Prefix modulate(const Prefix &raw, const Tensor &specific,
                const Tensor &generic) {
  return {mul_rowvec(raw.keys, specific), mul_rowvec(raw.values, generic)};
}

} // namespace pvl::pkt
