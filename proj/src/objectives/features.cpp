// SPDX-License-Identifier: Apache-2.0
#include "pvl/objectives/features.hpp"

#include <map>

#include "pvl/numerics/errors.hpp"

namespace pvl::objectives {

std::vector<Features> extract_features(const Model &model,
                                       const protocol::DatasetBundle &bundle,
                                       std::span<const std::size_t> indices,
                                       bool parallel) {
  std::vector<Features> out(indices.size());
  const auto n = static_cast<std::int64_t>(indices.size());
#pragma omp parallel if (parallel)
  {
    NoGradGuard guard;
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)] =
          forward(model, bundle.image(indices[static_cast<std::size_t>(i)]));
  }
  return out;
}

std::vector<std::vector<double>>
class_means(const Model &model, const protocol::DatasetBundle &bundle,
            std::span<const std::size_t> samples,
            std::span<const std::uint32_t> class_ids, bool parallel) {
  const std::size_t d = model.config.embed_dim;
  std::map<std::uint32_t, std::size_t> row;
  for (std::size_t i = 0; i < class_ids.size(); ++i)
    row[class_ids[i]] = i;
  std::vector<std::size_t> used;
  for (auto idx : samples)
    if (row.count(bundle.labels.at(idx)))
      used.push_back(idx);

  auto feats = extract_features(model, bundle, used, parallel);
  std::vector<std::vector<double>> sums(class_ids.size(),
                                        std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(class_ids.size(), 0);
  // Accumulate in sample order so the result does not depend on threading.
  for (std::size_t i = 0; i < used.size(); ++i) {
    const std::size_t r = row[bundle.labels[used[i]]];
    const auto &f = feats[i].cls.data();
    for (std::size_t j = 0; j < d; ++j)
      sums[r][j] += f[j];
    ++counts[r];
  }
  for (std::size_t r = 0; r < class_ids.size(); ++r) {
    if (counts[r] == 0)
      throw ContractError("no samples for class " +
                          std::to_string(class_ids[r]) +
                          " when building prototypes");
    for (auto &v : sums[r])
      v /= static_cast<double>(counts[r]);
  }
  return sums;
}

void build_prototypes(PrototypeClassifier &psi, const Model &model,
                      const protocol::DatasetBundle &bundle,
                      std::span<const std::size_t> samples,
                      std::span<const std::uint32_t> class_ids, bool parallel) {
  auto means = class_means(model, bundle, samples, class_ids, parallel);
  for (std::size_t r = 0; r < class_ids.size(); ++r)
    psi.append(class_ids[r], means[r]);
}

void refresh_prototypes(PrototypeClassifier &psi, const Model &model,
                        const protocol::DatasetBundle &bundle,
                        std::span<const std::size_t> samples,
                        std::span<const std::uint32_t> class_ids,
                        bool parallel) {
  auto means = class_means(model, bundle, samples, class_ids, parallel);
  for (std::size_t r = 0; r < class_ids.size(); ++r)
    psi.replace(class_ids[r], means[r]);
}

} // namespace pvl::objectives
