// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pvl/objectives/prototype.hpp"
#include "pvl/pkt/model.hpp"
#include "pvl/protocol/dataset.hpp"

namespace pvl::objectives {

/// Output features of `indices` with gradients disabled, in index order.
/// The parallel path splits samples across threads; results are identical
/// to the serial path.
std::vector<Features> extract_features(const Model &model,
                                       const protocol::DatasetBundle &bundle,
                                       std::span<const std::size_t> indices,
                                       bool parallel = true);

/// Mean f^cls per class over the listed samples, one D-vector per entry of
/// `class_ids`. Throws ContractError naming a class without samples.
std::vector<std::vector<double>>
class_means(const Model &model, const protocol::DatasetBundle &bundle,
            std::span<const std::size_t> samples,
            std::span<const std::uint32_t> class_ids, bool parallel = true);

/// Appends a prototype row per class, in the given order.
void build_prototypes(PrototypeClassifier &psi, const Model &model,
                      const protocol::DatasetBundle &bundle,
                      std::span<const std::size_t> samples,
                      std::span<const std::uint32_t> class_ids,
                      bool parallel = true);

/// Overwrites the rows of existing classes from the current model.
void refresh_prototypes(PrototypeClassifier &psi, const Model &model,
                        const protocol::DatasetBundle &bundle,
                        std::span<const std::size_t> samples,
                        std::span<const std::uint32_t> class_ids,
                        bool parallel = true);

} // namespace pvl::objectives
