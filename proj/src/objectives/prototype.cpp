// SPDX-License-Identifier: Apache-2.0
#include "pvl/objectives/prototype.hpp"

#include <algorithm>
#include <cmath>

#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/ops.hpp"

namespace pvl::objectives {

PrototypeClassifier::PrototypeClassifier(std::size_t dim, double scale,
                                         Similarity similarity)
    : dim_(dim), scale_(scale), similarity_(similarity) {
  if (dim == 0)
    throw DimensionError("prototype classifier needs a positive dimension");
}

std::optional<std::size_t>
PrototypeClassifier::index_of(std::uint32_t class_id) const {
  auto it = std::find(class_ids_.begin(), class_ids_.end(), class_id);
  if (it == class_ids_.end())
    return std::nullopt;
  return static_cast<std::size_t>(it - class_ids_.begin());
}

void PrototypeClassifier::append(std::uint32_t class_id,
                                 std::span<const double> prototype) {
  if (prototype.size() != dim_)
    throw DimensionError("prototype for class " + std::to_string(class_id) +
                         " has " + std::to_string(prototype.size()) +
                         " values, expected " + std::to_string(dim_));
  if (index_of(class_id))
    throw ContractError("class " + std::to_string(class_id) +
                        " already has a prototype");
  class_ids_.push_back(class_id);
  rows_.insert(rows_.end(), prototype.begin(), prototype.end());
  refresh_cache();
}

void PrototypeClassifier::replace(std::uint32_t class_id,
                                  std::span<const double> prototype) {
  auto idx = index_of(class_id);
  if (!idx)
    throw ContractError("class " + std::to_string(class_id) +
                        " has no prototype to replace");
  if (prototype.size() != dim_)
    throw DimensionError("replacement prototype has wrong length");
  std::copy(prototype.begin(), prototype.end(),
            rows_.begin() + static_cast<std::ptrdiff_t>(*idx * dim_));
  refresh_cache();
}

std::span<const double> PrototypeClassifier::prototype(std::size_t row) const {
  if (row >= size())
    throw IndexError("prototype row " + std::to_string(row) + " of " +
                     std::to_string(size()));
  return std::span<const double>(rows_).subspan(row * dim_, dim_);
}

Tensor PrototypeClassifier::matrix() const {
  if (rows_.empty())
    throw ContractError("prototype classifier is empty");
  return Tensor::matrix(size(), dim_, rows_);
}

void PrototypeClassifier::refresh_cache() {
  std::vector<double> cached = rows_;
  if (similarity_ == Similarity::Cosine) {
    for (std::size_t r = 0; r < size(); ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim_; ++j)
        s += cached[r * dim_ + j] * cached[r * dim_ + j];
      const double n = std::max(std::sqrt(s), kNormEpsilon);
      for (std::size_t j = 0; j < dim_; ++j)
        cached[r * dim_ + j] /= n;
    }
  }
  cache_ = Tensor::matrix(size(), dim_, std::move(cached));
}

Tensor PrototypeClassifier::logits(const Tensor &feature) const {
  if (feature.numel() != dim_)
    throw DimensionError("logits: feature " + shape_str(feature.shape()) +
                         " does not match prototype dimension " +
                         std::to_string(dim_));
  if (class_ids_.empty())
    throw ContractError("logits: prototype classifier is empty");
  Tensor f = reshape(feature, {dim_});
  if (similarity_ == Similarity::Cosine)
    f = l2_normalize(f);
  return pvl::scale(matmul_nt(f, cache_), scale_);
}

} // namespace pvl::objectives
