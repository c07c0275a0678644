// SPDX-License-Identifier: Apache-2.0
#include "pvl/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <functional>

#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/ops.hpp"
#include "pvl/numerics/optim.hpp"
#include "pvl/numerics/rng.hpp"
#include "pvl/objectives/features.hpp"

namespace pvl::harness {

namespace {

constexpr std::uint64_t kModelTag = 0x4d4f44454cULL;
constexpr std::uint64_t kPretrainShuffleTag = 0x5052455452ULL;
constexpr std::uint64_t kSessionShuffleTag = 0x5345535300ULL;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct StepOutput {
  Tensor total;
  objectives::LossBreakdown parts;
};

struct LoopResult {
  std::vector<objectives::LossBreakdown> trace;
  std::vector<double> epoch_mean_loss;
  std::size_t steps = 0;
};

/// Shuffled mini-batch Adam with a cosine schedule over all steps.
LoopResult train_loop(Model &model, std::vector<std::size_t> samples,
                      std::size_t epochs, std::size_t batch_size, double lr,
                      std::uint64_t shuffle_seed, std::size_t max_steps,
                      const std::function<StepOutput(std::span<const std::size_t>)> &step_fn,
                      const std::function<void()> &after_backward = {}) {
  LoopResult out;
  const std::size_t n = samples.size();
  if (n == 0 || epochs == 0)
    return out;
  const std::size_t batch = std::min(batch_size, n);
  const std::size_t per_epoch = (n + batch - 1) / batch;
  const std::size_t total = epochs * per_epoch;
  const std::size_t stop = max_steps > 0 ? std::min(total, max_steps) : total;

  auto params = model.parameters();
  AdamState adam;
  Rng rng(shuffle_seed);
  std::size_t step = 0;
  for (std::size_t e = 0; e < epochs && step < stop; ++e) {
    std::shuffle(samples.begin(), samples.end(), rng);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < per_epoch && step < stop; ++b) {
      const std::size_t lo = b * batch, hi = std::min(n, lo + batch);
      std::span<const std::size_t> ids(samples.data() + lo, hi - lo);
      StepOutput s = step_fn(ids);
      backward(s.total);
      if (after_backward)
        after_backward();
      adam_step(params, adam, cosine_lr(step, total, lr));
      out.trace.push_back(s.parts);
      sum += s.parts.total;
      ++count;
      ++step;
    }
    out.epoch_mean_loss.push_back(sum / static_cast<double>(count));
  }
  out.steps = step;
  return out;
}

using Snapshot = std::map<std::string, std::vector<double>>;

Snapshot snapshot_frozen(const Model &model, const std::set<std::string> &trainable) {
  Snapshot s;
  for (const auto &p : model.parameters())
    if (!trainable.count(p.name))
      s[p.name].assign(p.tensor.data().begin(), p.tensor.data().end());
  return s;
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
}

std::vector<std::string> changed_params(const Model &model, const Snapshot &before) {
  std::vector<std::string> changed;
  for (const auto &p : model.parameters()) {
    auto it = before.find(p.name);
    if (it != before.end() && !bit_equal(p.tensor.data(), it->second))
      changed.push_back(p.name);
  }
  return changed;
}

std::vector<double> prototype_rows(const objectives::PrototypeClassifier &psi) {
  auto m = psi.matrix();
  return {m.data().begin(), m.data().end()};
}

StepOutput session_step(const Model &model, const objectives::PrototypeClassifier &psi,
                        const DataContext &data, const ExperimentConfig &config,
                        std::span<const std::size_t> ids, bool base) {
  std::vector<objectives::SampleTerms> terms;
  terms.reserve(ids.size());
  const auto weights = config.effective_weights();
  for (auto idx : ids) {
    const auto cls = data.bundle.labels[idx];
    objectives::SampleTerms t;
    t.features = forward(model, data.bundle.image(idx));
    t.label = *psi.index_of(cls);
    if (weights.beta != 0.0)
      t.embedding = Tensor::vector(data.embeddings.at(cls).vector);
    terms.push_back(std::move(t));
  }
  auto r = base ? objectives::loss_base(terms, psi, weights, config.feature_mode())
                : objectives::loss_inc(terms, psi, weights, config.feature_mode());
  return {r.total, r.parts};
}

} // namespace

DataContext make_context(const ExperimentConfig &config) {
  auto preset = protocol::make_preset(config.preset, config.seed);
  preset.generator.noise_sigma = config.noise_sigma;
  preset.generator.image_size = config.vit.image_height;
  preset.generator.channels = config.vit.channels;
  preset.generator.patch_size = config.vit.patch_size;
  auto bundle = protocol::generate_synthetic(preset.generator, config.parallel);
  auto table = objectives::ClassEmbeddingTable::pseudo(bundle.class_names,
                                                       config.vit.embed_dim);
  return make_context(config, std::move(bundle), std::move(table));
}

DataContext make_context(const ExperimentConfig &config,
                         protocol::DatasetBundle bundle,
                         objectives::ClassEmbeddingTable embeddings) {
  if (bundle.height != config.vit.image_height ||
      bundle.width != config.vit.image_width ||
      bundle.channels != config.vit.channels)
    throw ConfigError("dataset images are " + std::to_string(bundle.channels) +
                      "x" + std::to_string(bundle.height) + "x" +
                      std::to_string(bundle.width) +
                      ", backbone expects " + std::to_string(config.vit.channels) +
                      "x" + std::to_string(config.vit.image_height) + "x" +
                      std::to_string(config.vit.image_width));
  if (embeddings.dim() != config.vit.embed_dim)
    throw ConfigError("embedding dimension " + std::to_string(embeddings.dim()) +
                      " differs from the backbone width " +
                      std::to_string(config.vit.embed_dim));
  auto preset = protocol::make_preset(config.preset, config.seed);
  DataContext ctx;
  ctx.stream = protocol::make_stream(bundle, preset.stream);
  auto violations = protocol::validate_stream(ctx.stream, bundle);
  if (!violations.empty()) {
    std::string msg = "stream validation failed:";
    for (const auto &v : violations)
      msg += "\n  " + std::string(protocol::violation_name(v.kind)) + ": " + v.message;
    throw ConfigError(msg);
  }
  for (std::size_t t = 0; t < ctx.stream.num_sessions(); ++t)
    for (auto cls : ctx.stream.sessions[t].classes)
      embeddings.at(cls);
  ctx.bundle = std::move(bundle);
  ctx.embeddings = std::move(embeddings);
  return ctx;
}

PretrainReport pseudo_pretrain(Model &model, const DataContext &data,
                               const ExperimentConfig &config) {
  const auto &pretext = data.stream.pretext;
  if (pretext.classes.empty())
    throw ConfigError("pseudo-pretraining needs pretext classes");
  std::map<std::uint32_t, std::size_t> row;
  for (std::size_t i = 0; i < pretext.classes.size(); ++i)
    row[pretext.classes[i]] = i;

  const ModelOptions saved = model.options;
  model.options = ModelOptions{false, false, false, saved.pool};
  model.attach_head(pretext.classes.size(), derive_seed(config.seed, kModelTag + 1));
  model.set_trainable(trainable_set(model, SessionKind::Pretrain));

  auto logits_of = [&](const Features &f) {
    return linear(f.cls, model.head_w, model.head_b);
  };
  auto loop = train_loop(
      model, pretext.samples, config.pretrain_epochs, config.batch_size,
      config.pretrain_lr, derive_seed(config.seed, kPretrainShuffleTag), 0,
      [&](std::span<const std::size_t> ids) {
        std::vector<Tensor> losses;
        for (auto idx : ids)
          losses.push_back(cross_entropy(logits_of(forward(model, data.bundle.image(idx))),
                                         row[data.bundle.labels[idx]]));
        StepOutput s;
        s.total = average(losses);
        s.parts.total = s.parts.ce_main = s.total.item();
        return s;
      });

  PretrainReport rep;
  rep.epoch_mean_loss = loop.epoch_mean_loss;
  rep.steps = loop.steps;
  auto feats = objectives::extract_features(model, data.bundle, pretext.samples,
                                            config.parallel);
  std::size_t correct = 0;
  {
    NoGradGuard guard;
    for (std::size_t i = 0; i < feats.size(); ++i) {
      Tensor logits = logits_of(feats[i]);
      auto lg = logits.data();
      auto best = std::max_element(lg.begin(), lg.end()) - lg.begin();
      correct += static_cast<std::size_t>(best) ==
                 row[data.bundle.labels[pretext.samples[i]]];
    }
  }
  rep.train_accuracy = static_cast<double>(correct) /
                       static_cast<double>(pretext.samples.size());
  model.set_trainable({});
  model.drop_head();
  model.options = saved;
  return rep;
}

RunState init_run(const ExperimentConfig &config) {
  RunState s{Model::create(config.vit, derive_seed(config.seed, kModelTag)),
             objectives::PrototypeClassifier(config.vit.embed_dim, config.proto_scale),
             {}};
  s.model.options = config.model_options();
  return s;
}

std::set<std::string> session_trainable(const Model &model,
                                        const ExperimentConfig &config,
                                        SessionKind kind) {
  if (config.finetune_all && kind != SessionKind::Pretrain) {
    std::set<std::string> names;
    for (const auto &p : model.parameters())
      if (p.name.rfind("prompt.", 0) != 0 && p.name.rfind("head.", 0) != 0)
        names.insert(p.name);
    return names;
  }
  auto names = trainable_set(model, kind);
  if (kind == SessionKind::Base && !config.use_pkt_layers)
    std::erase_if(names, [](const std::string &n) { return n.rfind("block.", 0) == 0; });
  return names;
}

SessionReport evaluate_session(const RunState &state, const DataContext &data,
                               std::size_t session,
                               const ExperimentConfig &config) {
  SessionReport r;
  r.index = session;
  r.classes = data.stream.sessions.at(session).classes;
  r.prototype_rows = state.psi.size();
  const auto &eval = data.stream.eval.at(session);
  auto feats = objectives::extract_features(state.model, data.bundle, eval,
                                            config.parallel);
  std::map<std::uint32_t, std::size_t> correct;
  std::size_t total_correct = 0;
  NoGradGuard guard;
  const auto &ids = state.psi.class_ids();
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const auto cls = data.bundle.labels[eval[i]];
    Tensor logits = state.psi.logits(
        objectives::classification_feature(feats[i], config.feature_mode()));
    auto lg = logits.data();
    auto best = static_cast<std::size_t>(std::max_element(lg.begin(), lg.end()) - lg.begin());
    const bool ok = ids[best] == cls;
    correct[cls] += ok;
    ++r.per_class_count[cls];
    total_correct += ok;
  }
  for (const auto &[cls, n] : r.per_class_count)
    r.per_class[cls] = static_cast<double>(correct[cls]) / static_cast<double>(n);
  r.accuracy = eval.empty() ? 0.0
                            : static_cast<double>(total_correct) /
                                  static_cast<double>(eval.size());
  return r;
}

namespace {

SessionReport run_session(RunState &state, const DataContext &data,
                          std::size_t session, const ExperimentConfig &config) {
  const auto t0 = Clock::now();
  const bool base = session == 0;
  const auto &split = data.stream.sessions.at(session);
  objectives::build_prototypes(state.psi, state.model, data.bundle, split.samples,
                               split.classes, config.parallel);

  const auto kind = base ? SessionKind::Base : SessionKind::Incremental;
  const auto names = session_trainable(state.model, config, kind);
  state.model.set_trainable(names);
  const Snapshot frozen = snapshot_frozen(state.model, names);
  const auto rows_before = prototype_rows(state.psi);

  LoopResult loop;
  if (!names.empty()) {
    const double lr = !base && config.finetune_all ? config.finetune_incremental_lr
                                                   : config.lr;
    std::function<void()> log_norm;
    if (base)
      log_norm = [&] {
        const auto &bp = state.model.prompts.b_prompt;
        double s = 0.0;
        if (bp.defined() && bp.has_grad())
          for (double g : bp.grad())
            s += g * g;
        state.bprompt_grad_norms.push_back(std::sqrt(s));
      };
    loop = train_loop(
        state.model, split.samples,
        base ? config.base_epochs : config.incremental_epochs, config.batch_size,
        lr, derive_seed(derive_seed(config.seed, kSessionShuffleTag), session),
        base ? config.max_base_steps : 0,
        [&](std::span<const std::size_t> ids) {
          return session_step(state.model, state.psi, data, config, ids, base);
        },
        log_norm);
  }

  const auto changed = changed_params(state.model, frozen);
  const bool rows_same = bit_equal(prototype_rows(state.psi), rows_before);
  state.model.set_trainable({});

  if (base && config.refresh_base_prototypes)
    objectives::refresh_prototypes(state.psi, state.model, data.bundle,
                                   split.samples, split.classes, config.parallel);

  SessionReport r = evaluate_session(state, data, session, config);
  r.loss_trace = std::move(loop.trace);
  r.epoch_mean_loss = std::move(loop.epoch_mean_loss);
  r.steps = loop.steps;
  r.changed_frozen = changed;
  r.frozen_identical = changed.empty();
  r.prototypes_identical = rows_same;
  r.wall_seconds = seconds_since(t0);
  return r;
}

} // namespace

SessionReport run_base_session(RunState &state, const DataContext &data,
                               const ExperimentConfig &config) {
  return run_session(state, data, 0, config);
}

SessionReport run_incremental_session(RunState &state, const DataContext &data,
                                      std::size_t session,
                                      const ExperimentConfig &config) {
  if (session == 0 || session >= data.stream.num_sessions())
    throw ContractError("incremental session index " + std::to_string(session) +
                        " out of range");
  if (state.psi.size() == 0)
    throw ContractError("incremental session before the base session");
  return run_session(state, data, session, config);
}

std::map<std::string, double>
fisher_diagnostic(const Model &model, const objectives::PrototypeClassifier &psi,
                  const protocol::DatasetBundle &bundle,
                  std::span<const std::size_t> samples,
                  std::span<const std::string> groups,
                  objectives::FeatureMode mode) {
  auto params = model.parameters();
  std::vector<bool> saved;
  for (auto &p : params) {
    saved.push_back(p.tensor.requires_grad());
    bool in_group = false;
    for (const auto &g : groups)
      in_group |= p.name.rfind(g, 0) == 0;
    p.tensor.clear_grad();
    p.tensor.set_requires_grad(in_group);
  }
  std::vector<std::vector<double>> acc(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    acc[i].assign(params[i].tensor.numel(), 0.0);

  for (auto idx : samples) {
    auto row = psi.index_of(bundle.labels.at(idx));
    if (!row)
      throw ContractError("fisher: class " + std::to_string(bundle.labels[idx]) +
                          " has no prototype");
    Features f = forward(model, bundle.image(idx));
    Tensor loss = cross_entropy(psi.logits(objectives::classification_feature(f, mode)), *row);
    backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto &t = params[i].tensor;
      if (!t.has_grad())
        continue;
      auto g = t.grad();
      for (std::size_t j = 0; j < g.size(); ++j)
        acc[i][j] += g[j] * g[j];
      t.clear_grad();
    }
  }

  std::map<std::string, double> out;
  const double inv_n = samples.empty() ? 0.0 : 1.0 / static_cast<double>(samples.size());
  for (const auto &g : groups) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].name.rfind(g, 0) == 0) {
        for (double v : acc[i])
          s += v * inv_n;
        n += acc[i].size();
      }
    out[g] = n ? s / static_cast<double>(n) : 0.0;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].tensor.clear_grad();
    params[i].tensor.set_requires_grad(saved[i]);
  }
  return out;
}

RunReport run_experiment(const ExperimentConfig &config, const DataContext &data,
                         PretrainCache *cache) {
  config.validate();
  RunReport rep;
  rep.config = config;
  RunState state = init_run(config);

  if (cache && cache->count(config.seed)) {
    const auto &[cached, prerep] = cache->at(config.seed);
    state.model.backbone = cached.clone().backbone;
    rep.pretrain = prerep;
  } else {
    rep.pretrain = pseudo_pretrain(state.model, data, config);
    if (cache)
      cache->emplace(config.seed, std::make_pair(state.model.clone(), rep.pretrain));
  }

  rep.sessions.push_back(run_base_session(state, data, config));
  if (!config.base_only)
    for (std::size_t t = 1; t < data.stream.num_sessions(); ++t)
      rep.sessions.push_back(run_incremental_session(state, data, t, config));
  rep.metrics = compute_metrics(rep.sessions);
  rep.bprompt_grad_norms = state.bprompt_grad_norms;

  if (!config.base_only) {
    std::vector<std::string> groups;
    for (std::size_t l = 0; l < config.vit.depth; ++l)
      groups.push_back(backbone::block_prefix(l));
    groups.push_back("prompt.b_prompt");
    groups.push_back("prompt.vl");
    const auto &base = data.stream.sessions[0].samples;
    std::vector<std::size_t> subset(base.begin(),
                                    base.begin() + static_cast<std::ptrdiff_t>(
                                                       std::min<std::size_t>(64, base.size())));
    rep.fisher = fisher_diagnostic(state.model, state.psi, data.bundle, subset,
                                   groups, config.feature_mode());
  }
  return rep;
}

} // namespace pvl::harness
