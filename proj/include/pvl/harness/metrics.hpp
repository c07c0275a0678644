// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pvl/objectives/losses.hpp"

namespace pvl::harness {

struct SessionReport {
  std::size_t index = 0;
  std::vector<std::uint32_t> classes; // C^t
  double accuracy = 0.0;              // over all seen classes
  std::map<std::uint32_t, double> per_class;
  std::map<std::uint32_t, std::size_t> per_class_count;
  std::vector<objectives::LossBreakdown> loss_trace; // one per step
  std::vector<double> epoch_mean_loss;
  std::size_t steps = 0;
  std::size_t prototype_rows = 0;
  bool frozen_identical = true;
  bool prototypes_identical = true;
  std::vector<std::string> changed_frozen;
  double wall_seconds = 0.0;
};

struct Metrics {
  double a_base = 0.0;
  double a_last = 0.0;
  double a_avg = 0.0;
  double fgt = 0.0;
  /// Accuracy on session-0 classes at the final session over A_Base.
  double base_retention = 0.0;
};

/// Sample-weighted accuracy over `classes` from a session's per-class table.
double accuracy_on(const SessionReport &report,
                   std::span<const std::uint32_t> classes);

/// Throws ContractError for an empty report list.
Metrics compute_metrics(std::span<const SessionReport> reports);

/// Median of each metric; the mean of the middle pair for even counts.
Metrics median_metrics(std::span<const Metrics> runs);
double median(std::vector<double> values);

} // namespace pvl::harness
