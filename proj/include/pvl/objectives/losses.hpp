// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "pvl/numerics/ops.hpp"
#include "pvl/objectives/prototype.hpp"
#include "pvl/pkt/model.hpp"

namespace pvl::objectives {

struct LossWeights {
  double alpha = 0.5; // entropy-based divergence
  double beta = 0.5;  // semantic knowledge distillation
  double gamma = 0.1; // CE anchor inside the distillation term
  double tau = 2.0;   // distillation temperature

  bool operator==(const LossWeights &) const = default;
};

/// Which output tokens form the classification feature.
enum class FeatureMode {
  ClsVisAverage, // (f^cls + f^vis) / 2
  ClsOnly,       // f^cls, used when the VL-Prompt is disabled
};

Tensor classification_feature(const Features &f, FeatureMode mode);

/// log((CE(vis, y) + CE(cls, y)) / (KL(softmax(vis) || softmax(cls)) + eps) + 1)
Tensor loss_ed(const Tensor &logits_vis, const Tensor &logits_cls,
               std::size_t label, double eps = kKlEpsilon);

/// tau^2 * KL(softmax(teacher / tau) || softmax(student / tau)), with the
/// class-name embedding as teacher and the language-token feature as student.
Tensor loss_kd(const Tensor &f_lang, const Tensor &embedding, double tau);

/// loss_kd + gamma * CE(psi(f_lang), label)
Tensor loss_skd(const Tensor &f_lang, const Tensor &embedding,
                const PrototypeClassifier &psi, std::size_t label,
                double gamma, double tau);

struct LossBreakdown {
  double total = 0.0;
  double ce_main = 0.0;
  double l_ed = 0.0;
  double l_kd = 0.0;
  double l_skd_ce = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

struct LossResult {
  Tensor total;
  LossBreakdown parts;
};

/// One training sample as seen by the losses. `label` is the row of the
/// sample's class in the prototype classifier.
struct SampleTerms {
  Features features;
  std::size_t label = 0;
  Tensor embedding; // [D]
};

/// Batch mean of CE(psi(f^clf), y) + alpha * L_ED + beta * L_SKD.
/// Terms whose weight is zero are skipped and reported as 0.
LossResult loss_base(std::span<const SampleTerms> batch,
                     const PrototypeClassifier &psi, const LossWeights &weights,
                     FeatureMode mode = FeatureMode::ClsVisAverage);

/// Batch mean of CE(psi(f^clf), y) + beta * L_SKD; L_ED reported as 0.
LossResult loss_inc(std::span<const SampleTerms> batch,
                    const PrototypeClassifier &psi, const LossWeights &weights,
                    FeatureMode mode = FeatureMode::ClsVisAverage);

} // namespace pvl::objectives
