// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pvl/harness/experiment.hpp"

namespace pvl::harness {

struct AblationCell {
  std::string label;
  ExperimentConfig config; // seed is replaced per run
};

/// baseline-finetune, pkt, pkt-ed, pkt-skd, full.
std::vector<AblationCell> method_grid(const ExperimentConfig &base);
/// PKT-only runs with `tuned_layers` set to each value, labelled "layers-N".
std::vector<AblationCell> layer_sweep(const ExperimentConfig &base,
                                      std::span<const std::size_t> layers);

struct AblationRow {
  std::string label;
  std::vector<RunReport> runs; // one per seed, in seed order
  Metrics median;
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows; // grid order

  const AblationRow *find(const std::string &label) const;
};

using AblationProgress =
    std::function<void(const std::string &label, std::uint64_t seed, const RunReport &)>;

/// Runs every cell for every seed. Cells sharing a seed share the dataset,
/// stream, and pretrained backbone; a cell whose config equals an earlier
/// cell's reuses that run.
AblationTable run_ablation_suite(std::span<const AblationCell> cells,
                                 std::span<const std::uint64_t> seeds,
                                 const AblationProgress &progress = {});

/// label,a_base,a_last,a_avg,fgt,base_retention,runs (medians).
std::string ablation_to_csv(const AblationTable &table);

struct OrderCheck {
  std::string description;
  bool ok = false;
};

/// Directional checks over median metrics; checks whose rows are absent are
/// skipped.
std::vector<OrderCheck> check_ablation_order(const AblationTable &table,
                                             std::size_t depth);

} // namespace pvl::harness
