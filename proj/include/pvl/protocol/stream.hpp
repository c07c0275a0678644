// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pvl/protocol/dataset.hpp"
#include "pvl/protocol/synthetic.hpp"

namespace pvl::protocol {

struct StreamParams {
  std::size_t base_classes = 20;
  std::size_t way = 5;
  std::size_t shot = 5;
  std::size_t num_incremental = 4;
  std::size_t eval_per_class = 20;
  std::size_t pretext_classes = 16;
  std::uint64_t seed = 0;

  std::size_t total_classes() const {
    return base_classes + way * num_incremental + pretext_classes;
  }
};

struct SessionSplit {
  std::size_t index = 0;
  std::vector<std::uint32_t> classes; // C^t
  std::vector<std::size_t> samples;   // dataset indices
  std::size_t way = 0;
  std::size_t shot = 0; // 0 for the base session
};

struct FSCILStream {
  StreamParams params;
  std::vector<SessionSplit> sessions;       // [0] = base
  std::vector<std::vector<std::size_t>> eval; // eval[t] covers sessions <= t
  SessionSplit pretext;

  std::size_t num_sessions() const { return sessions.size(); }
  /// Union of C^s for s <= t, in session order.
  std::vector<std::uint32_t> seen_classes(std::size_t t) const;
};

/// Throws ConfigError with counts when the bundle cannot supply the stream.
FSCILStream make_stream(const DatasetBundle &bundle, const StreamParams &params);

enum class ViolationKind {
  ClassOverlap,
  Cardinality,
  SampleOutsideSession,
  EvalCoverage,
  EvalTrainOverlap,
  PretextOverlap,
  BadIndex,
};

const char *violation_name(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string message;
};

/// Every violation found; an empty list means the stream is well-formed.
std::vector<Violation> validate_stream(const FSCILStream &stream,
                                       const DatasetBundle &bundle);

struct Preset {
  std::string name;
  GeneratorParams generator;
  StreamParams stream;
};

/// "cifar-mini" or "cub-mini"; throws ConfigError otherwise.
Preset make_preset(const std::string &name, std::uint64_t seed);
std::vector<std::string> preset_names();

} // namespace pvl::protocol
