// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pvl/numerics/tensor.hpp"

namespace pvl::objectives {

enum class Similarity { Cosine, Dot };

/// Frozen matrix of class prototypes. Rows are appended in class order and
/// never reordered; the matrix never participates in gradient computation.
class PrototypeClassifier {
public:
  PrototypeClassifier() = default;
  explicit PrototypeClassifier(std::size_t dim, double scale = 10.0,
                               Similarity similarity = Similarity::Cosine);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return class_ids_.size(); }
  double scale() const { return scale_; }
  Similarity similarity() const { return similarity_; }
  const std::vector<std::uint32_t> &class_ids() const { return class_ids_; }
  std::optional<std::size_t> index_of(std::uint32_t class_id) const;

  /// Throws ContractError for a duplicate class id, DimensionError for a
  /// wrong-length row.
  void append(std::uint32_t class_id, std::span<const double> prototype);
  /// Overwrites an existing row in place.
  void replace(std::uint32_t class_id, std::span<const double> prototype);

  std::span<const double> prototype(std::size_t row) const;
  /// Raw rows as a constant [size x dim] tensor.
  Tensor matrix() const;

  /// Cosine mode: scale * cos(proto_j, f); dot mode: scale * <proto_j, f>.
  /// Norms are floored at kNormEpsilon.
  Tensor logits(const Tensor &feature) const;

private:
  void refresh_cache();

  std::size_t dim_ = 0;
  double scale_ = 10.0;
  Similarity similarity_ = Similarity::Cosine;
  std::vector<std::uint32_t> class_ids_;
  std::vector<double> rows_;
  Tensor cache_; // normalized (cosine) or raw (dot) rows
};

} // namespace pvl::objectives
