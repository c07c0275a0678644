// SPDX-License-Identifier: Apache-2.0
#include "pvl/harness/metrics.hpp"

#include <algorithm>

#include "pvl/numerics/errors.hpp"

namespace pvl::harness {

double accuracy_on(const SessionReport &r,
                   std::span<const std::uint32_t> classes) {
  double correct = 0.0, total = 0.0;
  for (auto c : classes) {
    auto it = r.per_class.find(c);
    if (it == r.per_class.end())
      continue;
    auto n = r.per_class_count.count(c) ? r.per_class_count.at(c) : 1;
    correct += it->second * static_cast<double>(n);
    total += static_cast<double>(n);
  }
  return total > 0.0 ? correct / total : 0.0;
}

Metrics compute_metrics(std::span<const SessionReport> reports) {
  if (reports.empty())
    throw ContractError("compute_metrics: no session reports");
  Metrics m;
  m.a_base = reports.front().accuracy;
  m.a_last = reports.back().accuracy;
  double s = 0.0;
  for (const auto &r : reports)
    s += r.accuracy;
  m.a_avg = s / static_cast<double>(reports.size());

  const std::size_t last = reports.size() - 1;
  if (last > 0) {
    double f = 0.0;
    for (std::size_t k = 0; k < last; ++k) {
      const auto &cls = reports[k].classes;
      double best = 0.0;
      for (std::size_t t = k; t <= last; ++t)
        best = std::max(best, accuracy_on(reports[t], cls));
      f += best - accuracy_on(reports[last], cls);
    }
    m.fgt = f / static_cast<double>(last);
  }
  const double base0 = accuracy_on(reports.front(), reports.front().classes);
  m.base_retention =
      base0 > 0.0 ? accuracy_on(reports.back(), reports.front().classes) / base0
                  : 0.0;
  return m;
}

double median(std::vector<double> v) {
  if (v.empty())
    throw ContractError("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Metrics median_metrics(std::span<const Metrics> runs) {
  auto col = [&](double Metrics::*f) {
    std::vector<double> v;
    for (const auto &m : runs)
      v.push_back(m.*f);
    return median(std::move(v));
  };
  Metrics m;
  m.a_base = col(&Metrics::a_base);
  m.a_last = col(&Metrics::a_last);
  m.a_avg = col(&Metrics::a_avg);
  m.fgt = col(&Metrics::fgt);
  m.base_retention = col(&Metrics::base_retention);
  return m;
}

} // namespace pvl::harness
