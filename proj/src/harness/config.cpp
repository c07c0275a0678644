// SPDX-License-Identifier: Apache-2.0
#include "pvl/harness/config.hpp"

#include <cmath>

#include "pvl/numerics/errors.hpp"

namespace pvl::harness {

void ExperimentConfig::validate() const {
  vit.validate();
  if (use_modulation && !use_b_prompt)
    throw ConfigError("modulation requires the B-Prompt");
  if (use_ed && !use_vl_prompt)
    throw ConfigError("the divergence loss needs the vision token of the VL-Prompt");
  if (use_skd && !use_vl_prompt)
    throw ConfigError("distillation needs the language token of the VL-Prompt");
  if (finetune_all && (use_b_prompt || use_vl_prompt))
    throw ConfigError("the fine-tune baseline runs without prompts");
  auto positive = [](double v, const char *what) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string(what) + " must be positive");
  };
  positive(lr, "lr");
  positive(pretrain_lr, "pretrain lr");
  positive(finetune_incremental_lr, "fine-tune incremental lr");
  positive(proto_scale, "prototype scale");
  positive(weights.tau, "tau");
  if (!(noise_sigma >= 0.0))
    throw ConfigError("noise sigma must be non-negative");
  if (weights.alpha < 0.0 || weights.beta < 0.0 || weights.gamma < 0.0)
    throw ConfigError("loss weights must be non-negative");
  if (batch_size == 0 || base_epochs == 0 || incremental_epochs == 0)
    throw ConfigError("batch size and session epochs must be positive");
}

ModelOptions ExperimentConfig::model_options() const {
  ModelOptions o;
  o.use_b_prompt = use_b_prompt && vit.tuned_layers > 0;
  o.use_modulation = use_modulation && o.use_b_prompt;
  o.use_vl_prompt = use_vl_prompt;
  return o;
}

objectives::LossWeights ExperimentConfig::effective_weights() const {
  auto w = weights;
  if (!use_ed)
    w.alpha = 0.0;
  if (!use_skd)
    w.beta = 0.0;
  return w;
}

objectives::FeatureMode ExperimentConfig::feature_mode() const {
  return use_vl_prompt ? objectives::FeatureMode::ClsVisAverage
                       : objectives::FeatureMode::ClsOnly;
}

std::vector<std::string> method_names() {
  return {"baseline-finetune", "pkt", "pkt-ed", "pkt-skd", "full"};
}

ExperimentConfig apply_method(ExperimentConfig c, const std::string &method) {
  c.method = method;
  c.finetune_all = false;
  c.use_pkt_layers = c.use_modulation = c.use_b_prompt = c.use_vl_prompt = true;
  c.use_ed = c.use_skd = true;
  if (method == "baseline-finetune") {
    c.finetune_all = true;
    c.use_pkt_layers = c.use_modulation = c.use_b_prompt = c.use_vl_prompt = false;
    c.use_ed = c.use_skd = false;
  } else if (method == "pkt") {
    c.use_ed = c.use_skd = false;
  } else if (method == "pkt-ed") {
    c.use_skd = false;
  } else if (method == "pkt-skd") {
    c.use_ed = false;
  } else if (method != "full") {
    throw ConfigError("unknown method '" + method + "'");
  }
  return c;
}

} // namespace pvl::harness
