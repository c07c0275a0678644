// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pvl/harness/config.hpp"
#include "pvl/harness/metrics.hpp"
#include "pvl/objectives/embeddings.hpp"
#include "pvl/objectives/prototype.hpp"
#include "pvl/protocol/stream.hpp"

namespace pvl::harness {

/// Dataset, stream, and class-name embeddings for one seed.
struct DataContext {
  protocol::DatasetBundle bundle;
  protocol::FSCILStream stream;
  objectives::ClassEmbeddingTable embeddings;
};

/// Generates the preset's dataset and stream for `config.seed`. Throws
/// ConfigError when the stream fails validation.
DataContext make_context(const ExperimentConfig &config);
/// Builds a context from existing data; the stream uses the preset shape.
DataContext make_context(const ExperimentConfig &config,
                         protocol::DatasetBundle bundle,
                         objectives::ClassEmbeddingTable embeddings);

struct PretrainReport {
  double train_accuracy = 0.0;
  std::vector<double> epoch_mean_loss;
  std::size_t steps = 0;
};

/// Trains every backbone weight plus a temporary linear head on the pretext
/// classes with plain cross-entropy; prompts are left untouched and the head
/// is dropped afterwards.
PretrainReport pseudo_pretrain(Model &model, const DataContext &data,
                               const ExperimentConfig &config);

/// Mutable state threaded through the sessions of one run.
struct RunState {
  Model model;
  objectives::PrototypeClassifier psi;
  std::vector<double> bprompt_grad_norms;
};

RunState init_run(const ExperimentConfig &config);

/// Names trained in a session under the config's ablation flags.
std::set<std::string> session_trainable(const Model &model,
                                        const ExperimentConfig &config,
                                        SessionKind kind);

SessionReport run_base_session(RunState &state, const DataContext &data,
                               const ExperimentConfig &config);
SessionReport run_incremental_session(RunState &state, const DataContext &data,
                                      std::size_t session,
                                      const ExperimentConfig &config);

/// Accuracy over every class of eval set `session`.
SessionReport evaluate_session(const RunState &state, const DataContext &data,
                               std::size_t session,
                               const ExperimentConfig &config);

/// Mean over samples of squared CE gradients, averaged over the elements of
/// the parameters whose names start with each group prefix. Samples must
/// belong to classes present in `psi`.
std::map<std::string, double>
fisher_diagnostic(const Model &model, const objectives::PrototypeClassifier &psi,
                  const protocol::DatasetBundle &bundle,
                  std::span<const std::size_t> samples,
                  std::span<const std::string> groups,
                  objectives::FeatureMode mode);

struct RunReport {
  ExperimentConfig config;
  PretrainReport pretrain;
  std::vector<SessionReport> sessions;
  Metrics metrics;
  std::vector<double> bprompt_grad_norms;
  std::map<std::string, double> fisher;
};

/// Pretrained backbones keyed by seed, shared across grid cells.
using PretrainCache = std::map<std::uint64_t, std::pair<Model, PretrainReport>>;

/// Pseudo-pretrain, base session, then every incremental session.
RunReport run_experiment(const ExperimentConfig &config, const DataContext &data,
                         PretrainCache *cache = nullptr);

} // namespace pvl::harness
