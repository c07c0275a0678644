// SPDX-License-Identifier: Apache-2.0
#include "pvl/pkt/model.hpp"

#include <cmath>

#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/ops.hpp"

namespace pvl {

using backbone::ForwardTrace;
using backbone::Prefix;

Model Model::create(const backbone::ViTConfig &config, std::uint64_t seed) {
  Model m;
  m.config = config;
  Rng backbone_rng(derive_seed(seed, 0xB0));
  m.backbone = backbone::init_backbone(config, backbone_rng);
  Rng prompt_rng(derive_seed(seed, 0xB1));
  m.prompts = pkt::init_prompts(config, prompt_rng);
  return m;
}

namespace {

template <typename Fn> void visit_all(Model &m, Fn &&fn) {
  backbone::visit_parameters(m.backbone, fn);
  pkt::visit_parameters(m.prompts, fn);
  if (m.head_w.defined()) {
    fn("head.w", m.head_w);
    fn("head.b", m.head_b);
  }
}

// Tensors are handles, so a shallow copy visits the same storage.
template <typename Fn> void visit_all(const Model &m, Fn &&fn) {
  Model view = m;
  visit_all(view, fn);
}

} // namespace

std::vector<Parameter> Model::parameters() const {
  std::vector<Parameter> out;
  visit_all(*this, [&](const std::string &n, Tensor &t) {
    out.push_back({n, t, t.requires_grad()});
  });
  return out;
}

std::vector<Parameter> Model::parameters(const std::string &prefix) const {
  std::vector<Parameter> out;
  visit_all(*this, [&](const std::string &n, Tensor &t) {
    if (n.rfind(prefix, 0) == 0)
      out.push_back({n, t, t.requires_grad()});
  });
  return out;
}

Model Model::clone() const {
  Model m = *this;
  visit_all(m, [](const std::string &, Tensor &t) { t = t.clone(); });
  return m;
}

void Model::set_trainable(const std::set<std::string> &names) {
  std::size_t matched = 0;
  visit_all(*this, [&](const std::string &n, Tensor &t) {
    bool on = names.count(n) > 0;
    matched += on;
    t.set_requires_grad(on);
    t.clear_grad();
  });
  if (matched != names.size())
    throw ContractError("set_trainable: " +
                        std::to_string(names.size() - matched) +
                        " unknown parameter name(s)");
}

void Model::attach_head(std::size_t classes, std::uint64_t seed) {
  const std::size_t d = config.embed_dim;
  Rng rng(derive_seed(seed, 0xB2));
  const double limit = std::sqrt(6.0 / static_cast<double>(d + classes));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(d * classes);
  for (auto &v : w)
    v = dist(rng);
  head_w = Tensor::matrix(d, classes, std::move(w));
  head_b = Tensor::zeros({classes});
}

void Model::drop_head() {
  head_w = Tensor();
  head_b = Tensor();
}

Tensor modulated_block(const Model &model, const Tensor &x, std::size_t layer,
                       ForwardTrace *trace) {
  const auto &config = model.config;
  if (layer >= config.tuned_layers)
    throw ContractError("modulated_block: layer " + std::to_string(layer) +
                        " is not tuned (L=" +
                        std::to_string(config.tuned_layers) + ")");
  const auto &block = model.backbone.blocks[layer];
  auto proj =
      backbone::project_qkv(block, layer_norm(x, block.ln1_g, block.ln1_b));

  if (!model.options.use_b_prompt)
    return backbone::block_forward_projected(block, config, x, proj, nullptr);

  Prefix prefix = pkt::b_prompt_layer(model.prompts, config, layer);
  if (model.options.use_modulation) {
    auto mods = pkt::compute_modulation(block, model.prompts.convs[layer],
                                        config, x, proj, model.options.pool);
    if (trace) {
      trace->h_msa.push_back(mods.h_msa);
      trace->h_mlp.push_back(mods.h_mlp);
    }
    prefix = pkt::modulate(prefix, mods.specific, mods.generic);
  }
  return backbone::block_forward_projected(block, config, x, proj, &prefix);
}

Features forward(const Model &model, std::span<const double> image,
                 ForwardTrace *trace) {
  const auto &config = model.config;
  Tensor patches = backbone::patch_embed(model.backbone, config, image);
  Tensor vl = model.options.use_vl_prompt
                  ? model.prompts.vl
                  : Tensor::zeros({2, config.embed_dim});
  Tensor seq = backbone::assemble_sequence(model.backbone, config, patches, vl);
  Tensor out = backbone::encode(
      model.backbone, config, seq,
      [&](const Tensor &x, std::size_t i) {
        return modulated_block(model, x, i, trace);
      },
      trace);
  return {row(out, backbone::kClsToken), row(out, backbone::kVisionToken),
          row(out, backbone::kLanguageToken)};
}

std::set<std::string> trainable_set(const Model &model, SessionKind kind) {
  std::set<std::string> names;
  const auto &opt = model.options;
  switch (kind) {
  case SessionKind::Pretrain:
    backbone::visit_parameters(
        model.backbone,
        [&](const std::string &n, const Tensor &) { names.insert(n); });
    if (model.head_w.defined()) {
      names.insert("head.w");
      names.insert("head.b");
    }
    break;
  case SessionKind::Base:
    for (const auto &p : model.parameters()) {
      const auto &n = p.name;
      for (std::size_t i = 0; i < model.config.tuned_layers; ++i)
        if (n.rfind(backbone::block_prefix(i), 0) == 0)
          names.insert(n);
      if (n == "prompt.b_prompt" && opt.use_b_prompt)
        names.insert(n);
      if (n.rfind("prompt.mod.", 0) == 0 && opt.use_b_prompt &&
          opt.use_modulation)
        names.insert(n);
    }
    if (opt.use_vl_prompt)
      names.insert("prompt.vl");
    break;
  case SessionKind::Incremental:
    if (opt.use_vl_prompt)
      names.insert("prompt.vl");
    break;
  }
  return names;
}

} // namespace pvl
