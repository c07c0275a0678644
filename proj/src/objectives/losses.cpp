// SPDX-License-Identifier: Apache-2.0
#include "pvl/objectives/losses.hpp"

#include "pvl/numerics/errors.hpp"

namespace pvl::objectives {

Tensor classification_feature(const Features &f, FeatureMode mode) {
  if (mode == FeatureMode::ClsOnly)
    return f.cls;
  return scale(add(f.cls, f.vis), 0.5);
}

Tensor loss_ed(const Tensor &logits_vis, const Tensor &logits_cls,
               std::size_t label, double eps) {
  if (logits_vis.numel() != logits_cls.numel())
    throw DimensionError("loss_ed: logits over different class sets " +
                         shape_str(logits_vis.shape()) + " vs " +
                         shape_str(logits_cls.shape()));
  Tensor ce_sum = add(cross_entropy(logits_vis, label),
                      cross_entropy(logits_cls, label));
  Tensor kl = kl_divergence(softmax(logits_vis), softmax(logits_cls));
  return log(add_scalar(div(ce_sum, add_scalar(kl, eps)), 1.0));
}

Tensor loss_kd(const Tensor &f_lang, const Tensor &embedding, double tau) {
  if (f_lang.numel() != embedding.numel())
    throw DimensionError("loss_kd: feature " + shape_str(f_lang.shape()) +
                         " vs embedding " + shape_str(embedding.shape()));
  if (!(tau > 0.0))
    throw ContractError("loss_kd: temperature must be positive");
  Tensor teacher = softmax(scale(reshape(embedding, {embedding.numel()}),
                                 1.0 / tau));
  Tensor student = softmax(scale(reshape(f_lang, {f_lang.numel()}), 1.0 / tau));
  return scale(kl_divergence(teacher, student), tau * tau);
}

Tensor loss_skd(const Tensor &f_lang, const Tensor &embedding,
                const PrototypeClassifier &psi, std::size_t label,
                double gamma, double tau) {
  Tensor kd = loss_kd(f_lang, embedding, tau);
  if (gamma == 0.0)
    return kd;
  return add(kd, scale(cross_entropy(psi.logits(f_lang), label), gamma));
}

namespace {

LossResult session_loss(std::span<const SampleTerms> batch,
                        const PrototypeClassifier &psi, double alpha,
                        const LossWeights &w, FeatureMode mode) {
  if (batch.empty())
    throw ContractError("session loss over an empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  LossResult r;
  r.parts.alpha = alpha;
  r.parts.beta = w.beta;
  r.parts.gamma = w.gamma;

  std::vector<Tensor> per_sample;
  per_sample.reserve(batch.size());
  for (const auto &s : batch) {
    Tensor ce = cross_entropy(psi.logits(classification_feature(s.features, mode)),
                              s.label);
    Tensor total = ce;
    r.parts.ce_main += ce.item() * inv_n;
    if (alpha != 0.0) {
      Tensor ed = loss_ed(psi.logits(s.features.vis),
                          psi.logits(s.features.cls), s.label);
      r.parts.l_ed += ed.item() * inv_n;
      total = add(total, scale(ed, alpha));
    }
    if (w.beta != 0.0) {
      Tensor kd = loss_kd(s.features.lang, s.embedding, w.tau);
      Tensor skd = kd;
      r.parts.l_kd += kd.item() * inv_n;
      if (w.gamma != 0.0) {
        Tensor ce_lang = cross_entropy(psi.logits(s.features.lang), s.label);
        r.parts.l_skd_ce += ce_lang.item() * inv_n;
        skd = add(skd, scale(ce_lang, w.gamma));
      }
      total = add(total, scale(skd, w.beta));
    }
    per_sample.push_back(total);
  }
  r.total = average(per_sample);
  r.parts.total = r.total.item();
  return r;
}

} // namespace

LossResult loss_base(std::span<const SampleTerms> batch,
                     const PrototypeClassifier &psi, const LossWeights &weights,
                     FeatureMode mode) {
  return session_loss(batch, psi, weights.alpha, weights, mode);
}

LossResult loss_inc(std::span<const SampleTerms> batch,
                    const PrototypeClassifier &psi, const LossWeights &weights,
                    FeatureMode mode) {
  return session_loss(batch, psi, 0.0, weights, mode);
}

} // namespace pvl::objectives
