// SPDX-License-Identifier: Apache-2.0
#include "pvl/harness/ablation.hpp"

#include <sstream>

#include "pvl/harness/report.hpp"
#include "pvl/numerics/errors.hpp"

namespace pvl::harness {

std::vector<AblationCell> method_grid(const ExperimentConfig &base) {
  std::vector<AblationCell> cells;
  for (const auto &m : method_names())
    cells.push_back({m, apply_method(base, m)});
  return cells;
}

std::vector<AblationCell> layer_sweep(const ExperimentConfig &base,
                                      std::span<const std::size_t> layers) {
  std::vector<AblationCell> cells;
  for (auto l : layers) {
    if (l > base.vit.depth)
      throw ConfigError("cannot tune " + std::to_string(l) + " of " +
                        std::to_string(base.vit.depth) + " layers");
    auto c = apply_method(base, "pkt");
    c.vit.tuned_layers = l;
    cells.push_back({"layers-" + std::to_string(l), c});
  }
  return cells;
}

const AblationRow *AblationTable::find(const std::string &label) const {
  for (const auto &r : rows)
    if (r.label == label)
      return &r;
  return nullptr;
}

AblationTable run_ablation_suite(std::span<const AblationCell> cells,
                                 std::span<const std::uint64_t> seeds,
                                 const AblationProgress &progress) {
  if (cells.empty() || seeds.empty())
    throw ConfigError("ablation grid needs at least one cell and one seed");
  AblationTable table;
  table.seeds.assign(seeds.begin(), seeds.end());
  for (const auto &c : cells) {
    c.config.validate();
    table.rows.push_back({c.label, {}, {}});
  }

  PretrainCache cache;
  for (auto seed : seeds) {
    auto first = cells.front().config;
    first.seed = seed;
    const DataContext data = make_context(first);
    std::vector<ExperimentConfig> done;
    std::vector<std::size_t> done_row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto cfg = cells[i].config;
      cfg.seed = seed;
      RunReport rep;
      bool reused = false;
      for (std::size_t k = 0; k < done.size(); ++k)
        if (done[k] == cfg) {
          rep = table.rows[done_row[k]].runs.back();
          reused = true;
          break;
        }
      if (!reused)
        rep = run_experiment(cfg, data, &cache);
      done.push_back(cfg);
      done_row.push_back(i);
      if (progress)
        progress(cells[i].label, seed, rep);
      table.rows[i].runs.push_back(std::move(rep));
    }
    cache.erase(seed);
  }
  for (auto &row : table.rows) {
    std::vector<Metrics> ms;
    for (const auto &r : row.runs)
      ms.push_back(r.metrics);
    row.median = median_metrics(ms);
  }
  return table;
}

std::string ablation_to_csv(const AblationTable &t) {
  std::ostringstream out;
  out << "label,a_base,a_last,a_avg,fgt,base_retention,runs\n";
  for (const auto &r : t.rows)
    out << r.label << ',' << format_double(r.median.a_base) << ','
        << format_double(r.median.a_last) << ',' << format_double(r.median.a_avg)
        << ',' << format_double(r.median.fgt) << ','
        << format_double(r.median.base_retention) << ',' << r.runs.size() << '\n';
  return out.str();
}

std::vector<OrderCheck> check_ablation_order(const AblationTable &t,
                                             std::size_t depth) {
  std::vector<OrderCheck> out;
  auto row = [&](const std::string &l) { return t.find(l); };
  const auto *full = row("full");
  const auto *skd = row("pkt-skd");
  const auto *pkt = row("pkt");
  const auto *base = row("baseline-finetune");
  if (full && skd)
    out.push_back({"A_Avg full >= pkt-skd", full->median.a_avg >= skd->median.a_avg});
  if (skd && pkt)
    out.push_back({"A_Avg pkt-skd >= pkt", skd->median.a_avg >= pkt->median.a_avg});
  if (full && pkt)
    out.push_back({"A_Avg full - pkt >= 0.01",
                   full->median.a_avg - pkt->median.a_avg >= 0.01});
  if (base)
    out.push_back({"baseline-finetune base retention < 0.5",
                   base->median.base_retention < 0.5});
  if (full)
    out.push_back({"full base retention >= 0.8", full->median.base_retention >= 0.8});
  const auto *l0 = row("layers-0");
  const auto *l2 = row("layers-2");
  const auto *ld = row("layers-" + std::to_string(depth));
  if (l0 && l2)
    out.push_back({"A_Last layers-2 > layers-0", l2->median.a_last > l0->median.a_last});
  if (ld && l2 && ld != l2)
    out.push_back({"A_Last layers-2 > layers-" + std::to_string(depth),
                   l2->median.a_last > ld->median.a_last});
  return out;
}

} // namespace pvl::harness
