// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "pvl/harness/ablation.hpp"
#include "pvl/harness/config.hpp"
#include "pvl/harness/experiment.hpp"
#include "pvl/harness/metrics.hpp"
#include "pvl/harness/report.hpp"
#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/ops.hpp"
#include "pvl/objectives/features.hpp"
#include "pvl/objectives/losses.hpp"

using namespace pvl;
using namespace pvl::harness;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.vit.image_height = c.vit.image_width = 8;
  c.vit.embed_dim = 8;
  c.vit.num_heads = 2;
  c.vit.depth = 2;
  c.vit.tuned_layers = 1;
  c.pretrain_epochs = 1;
  c.base_epochs = 1;
  c.incremental_epochs = 1;
  c.seed = 3;
  return c;
}

const DataContext &tiny_context() {
  static const DataContext ctx = make_context(tiny_config());
  return ctx;
}

const RunReport &tiny_run() {
  static const RunReport rep = run_experiment(tiny_config(), tiny_context());
  return rep;
}

SessionReport session(std::size_t idx, std::vector<std::uint32_t> classes,
                      std::map<std::uint32_t, double> per_class) {
  SessionReport r;
  r.index = idx;
  r.classes = std::move(classes);
  double s = 0.0;
  for (auto &[c, a] : per_class) {
    r.per_class[c] = a;
    r.per_class_count[c] = 10;
    s += a;
  }
  r.accuracy = s / per_class.size();
  return r;
}

std::vector<Parameter> with_prefix(const Model &m, const std::string &p) {
  return m.parameters(p);
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("metric arithmetic") {
  std::vector<SessionReport> r;
  r.push_back(session(0, {0}, {{0, 0.9}}));
  r.push_back(session(1, {1}, {{0, 0.8}, {1, 0.8}}));
  r.push_back(session(2, {2}, {{0, 0.7}, {1, 0.7}, {2, 0.7}}));
  auto m = compute_metrics(r);
  CHECK(m.a_base == doctest::Approx(0.9));
  CHECK(m.a_last == doctest::Approx(0.7));
  CHECK(m.a_avg == doctest::Approx(0.8));
  // Fgt: class set 0 dropped 0.9 -> 0.7, class set 1 dropped 0.8 -> 0.7
  CHECK(m.fgt == doctest::Approx((0.2 + 0.1) / 2.0));
  CHECK(m.base_retention == doctest::Approx(0.7 / 0.9));

  auto one = compute_metrics(std::vector<SessionReport>{session(0, {0, 1}, {{0, 0.5}, {1, 1.0}})});
  CHECK(one.a_base == one.a_last);
  CHECK(one.a_avg == one.a_last);
  CHECK(one.fgt == 0.0);
  CHECK_THROWS_AS(compute_metrics(std::vector<SessionReport>{}), ContractError);
}

TEST_CASE("no degradation means zero forgetting") {
  std::vector<SessionReport> r;
  r.push_back(session(0, {0, 1}, {{0, 0.6}, {1, 0.8}}));
  r.push_back(session(1, {2}, {{0, 0.6}, {1, 0.8}, {2, 0.4}}));
  r.push_back(session(2, {3}, {{0, 0.7}, {1, 0.8}, {2, 0.5}, {3, 0.1}}));
  CHECK(compute_metrics(r).fgt == 0.0);
}

TEST_CASE("forgetting uses the best accuracy at or after each session") {
  std::vector<SessionReport> r;
  r.push_back(session(0, {0}, {{0, 0.5}}));
  r.push_back(session(1, {1}, {{0, 0.9}, {1, 0.4}}));
  r.push_back(session(2, {2}, {{0, 0.6}, {1, 0.2}, {2, 1.0}}));
  CHECK(compute_metrics(r).fgt == doctest::Approx(((0.9 - 0.6) + (0.4 - 0.2)) / 2.0));
}

TEST_CASE("accuracy on a class subset is sample weighted") {
  SessionReport r;
  r.per_class = {{0, 1.0}, {1, 0.5}};
  r.per_class_count = {{0, 10}, {1, 30}};
  std::vector<std::uint32_t> both = {0, 1};
  CHECK(accuracy_on(r, both) == doctest::Approx((10 + 15) / 40.0));
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS_AS(median({}), ContractError);
  std::vector<Metrics> runs(3);
  runs[0].a_avg = 0.1;
  runs[1].a_avg = 0.9;
  runs[2].a_avg = 0.5;
  CHECK(median_metrics(runs).a_avg == 0.5);
}

TEST_CASE("config validation and methods") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  c.use_b_prompt = false;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.use_vl_prompt = false;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  CHECK(method_names().size() == 5);
  for (const auto &m : method_names())
    CHECK_NOTHROW(apply_method(ExperimentConfig{}, m).validate());
  auto pkt = apply_method(ExperimentConfig{}, "pkt");
  CHECK_FALSE(pkt.use_ed);
  CHECK_FALSE(pkt.use_skd);
  CHECK(pkt.effective_weights().alpha == 0.0);
  auto ft = apply_method(ExperimentConfig{}, "baseline-finetune");
  CHECK(ft.finetune_all);
  CHECK(ft.feature_mode() == objectives::FeatureMode::ClsOnly);
  CHECK_THROWS_AS(apply_method(ExperimentConfig{}, "magic"), ConfigError);
}

TEST_CASE("fisher matches hand-accumulated squared gradients") {
  const auto &ctx = tiny_context();
  auto cfg = tiny_config();
  RunState st = init_run(cfg);
  const auto &base = ctx.stream.sessions[0];
  objectives::build_prototypes(st.psi, st.model, ctx.bundle, base.samples,
                               base.classes, false);
  std::vector<std::size_t> samples(base.samples.begin(), base.samples.begin() + 3);
  std::vector<std::string> groups = {"prompt.vl", "block.1."};
  auto fisher = fisher_diagnostic(st.model, st.psi, ctx.bundle, samples, groups,
                                  cfg.feature_mode());

  for (const auto &g : groups) {
    Model m = st.model.clone();
    std::set<std::string> names;
    for (const auto &p : m.parameters())
      if (p.name.rfind(g, 0) == 0)
        names.insert(p.name);
    m.set_trainable(names);
    auto params = with_prefix(m, g);
    std::vector<std::vector<double>> acc(params.size());
    std::size_t count = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      acc[i].assign(params[i].tensor.numel(), 0.0);
      count += params[i].tensor.numel();
    }
    for (auto idx : samples) {
      Features f = forward(m, ctx.bundle.image(idx));
      auto row = *st.psi.index_of(ctx.bundle.labels[idx]);
      backward(cross_entropy(
          st.psi.logits(objectives::classification_feature(f, cfg.feature_mode())),
          row));
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto gr = params[i].tensor.grad();
        for (std::size_t j = 0; j < gr.size(); ++j)
          acc[i][j] += gr[j] * gr[j];
        params[i].tensor.clear_grad();
      }
    }
    double s = 0.0;
    for (const auto &a : acc)
      for (double v : a)
        s += v / 3.0;
    CHECK(fisher.at(g) == doctest::Approx(s / count).epsilon(1e-12));
    CHECK(fisher.at(g) > 0.0);
  }

  auto twice = fisher_diagnostic(st.model, st.psi, ctx.bundle, samples, groups,
                                 cfg.feature_mode());
  CHECK(twice == fisher);
  // The head is absent, so a group matching nothing reports 0.
  std::vector<std::string> none = {"head."};
  CHECK(fisher_diagnostic(st.model, st.psi, ctx.bundle, samples, none,
                          cfg.feature_mode())
            .at("head.") == 0.0);
}

TEST_CASE("pretraining leaves prompts untouched and is deterministic") {
  auto cfg = tiny_config();
  RunState a = init_run(cfg), b = init_run(cfg);
  auto vl = std::vector<double>(a.model.prompts.vl.data().begin(),
                                a.model.prompts.vl.data().end());
  auto bp = std::vector<double>(a.model.prompts.b_prompt.data().begin(),
                                a.model.prompts.b_prompt.data().end());
  auto ra = pseudo_pretrain(a.model, tiny_context(), cfg);
  pseudo_pretrain(b.model, tiny_context(), cfg);
  CHECK(std::equal(vl.begin(), vl.end(), a.model.prompts.vl.data().begin()));
  CHECK(std::equal(bp.begin(), bp.end(), a.model.prompts.b_prompt.data().begin()));
  CHECK_FALSE(a.model.head_w.defined());
  CHECK(ra.steps > 0);
  auto pa = a.model.parameters(), pb = b.model.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(),
                     pb[i].tensor.data().begin()));
}

TEST_CASE("sessions pass the freeze audits") {
  const auto &rep = tiny_run();
  const auto &stream = tiny_context().stream;
  REQUIRE(rep.sessions.size() == stream.num_sessions());
  std::size_t rows = 0;
  for (std::size_t t = 0; t < rep.sessions.size(); ++t) {
    const auto &s = rep.sessions[t];
    CHECK(s.frozen_identical);
    CHECK(s.changed_frozen.empty());
    CHECK(s.prototypes_identical);
    rows += stream.sessions[t].classes.size();
    CHECK(s.prototype_rows == rows);
    auto seen = stream.seen_classes(t);
    CHECK(s.per_class.size() == seen.size());
    for (auto c : seen)
      CHECK(s.per_class.count(c));
    CHECK(s.accuracy >= 0.0);
    CHECK(s.accuracy <= 1.0);
    CHECK(s.loss_trace.size() == s.steps);
  }
  CHECK(rep.bprompt_grad_norms.size() == rep.sessions[0].steps);
  double mean = 0.0;
  for (const auto &s : rep.sessions)
    mean += s.accuracy / rep.sessions.size();
  CHECK(std::abs(rep.metrics.a_avg - mean) < 1e-12);
  CHECK(rep.fisher.size() == tiny_config().vit.depth + 2);
}

TEST_CASE("frozen b-prompt logs zero gradient norms") {
  auto cfg = tiny_config();
  cfg.use_pkt_layers = false;
  cfg.use_modulation = false;
  cfg.use_b_prompt = false;
  cfg.base_only = true;
  auto rep = run_experiment(cfg, tiny_context());
  REQUIRE_FALSE(rep.bprompt_grad_norms.empty());
  for (double v : rep.bprompt_grad_norms)
    CHECK(v == 0.0);
  CHECK(rep.sessions.size() == 1);
}

TEST_CASE("max base steps caps the session") {
  auto cfg = tiny_config();
  cfg.base_only = true;
  cfg.max_base_steps = 3;
  auto rep = run_experiment(cfg, tiny_context());
  CHECK(rep.sessions[0].steps == 3);
  CHECK(rep.bprompt_grad_norms.size() == 3);
}

TEST_CASE("runs are deterministic end to end") {
  auto again = run_experiment(tiny_config(), tiny_context());
  CHECK(report_to_json(again) == report_to_json(tiny_run()));
}

TEST_CASE("report json round trip") {
  const auto &rep = tiny_run();
  auto text = report_to_json(rep);
  auto back = report_from_json(text);
  CHECK(back.config == rep.config);
  CHECK(back.metrics.a_avg == rep.metrics.a_avg);
  CHECK(back.sessions.size() == rep.sessions.size());
  CHECK(report_to_json(back) == text);
  CHECK_THROWS_AS(report_from_json("{"), ParseError);
  CHECK_THROWS_AS(report_from_json(R"({"schema_version": 99})"), ParseError);
}

TEST_CASE("csv round trip") {
  auto rows = report_csv_rows(tiny_run());
  CHECK(rows.size() == tiny_run().sessions.size());
  auto text = csv_to_text(rows);
  CHECK(text.rfind(std::string(kCsvHeader), 0) == 0);
  CHECK(csv_from_text(text) == rows);
  CHECK_THROWS_AS(csv_from_text("session,accuracy\n1,2\n"), ParseError);
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("ablation grid shape and ordering checks") {
  auto grid = method_grid(ExperimentConfig{});
  CHECK(grid.size() == 5);
  std::vector<std::size_t> layers = {0, 2, 4};
  auto sweep = layer_sweep(ExperimentConfig{}, layers);
  CHECK(sweep.size() == 3);
  CHECK(sweep[2].label == "layers-4");
  CHECK(sweep[1].config == apply_method(ExperimentConfig{}, "pkt"));

  AblationTable t;
  auto row = [&](std::string label, double avg, double last, double ret) {
    AblationRow r;
    r.label = std::move(label);
    r.median.a_avg = avg;
    r.median.a_last = last;
    r.median.base_retention = ret;
    t.rows.push_back(r);
  };
  row("baseline-finetune", 0.3, 0.1, 0.2);
  row("pkt", 0.70, 0.6, 0.9);
  row("pkt-skd", 0.72, 0.6, 0.9);
  row("full", 0.75, 0.6, 0.9);
  row("layers-0", 0.6, 0.5, 0.9);
  row("layers-4", 0.6, 0.55, 0.9);
  auto checks = check_ablation_order(t, 4);
  CHECK_FALSE(checks.empty());
  for (const auto &c : checks)
    CHECK_MESSAGE(c.ok, c.description);
  t.rows[3].median.a_avg = 0.705;
  bool any_failed = false;
  for (const auto &c : check_ablation_order(t, 4))
    any_failed |= !c.ok;
  CHECK(any_failed);
  CHECK(t.find("pkt") == &t.rows[1]);
  CHECK(t.find("nope") == nullptr);
}

TEST_CASE("ablation suite reuses equal configurations") {
  auto base = tiny_config();
  std::vector<AblationCell> cells = {{"pkt", apply_method(base, "pkt")},
                                     {"layers-1", apply_method(base, "pkt")}};
  std::vector<std::uint64_t> seeds = {3};
  std::size_t runs = 0;
  auto t = run_ablation_suite(cells, seeds,
                              [&](const std::string &, std::uint64_t, const RunReport &) {
                                ++runs;
                              });
  CHECK(t.rows.size() == 2);
  CHECK(report_to_json(t.rows[0].runs[0]) == report_to_json(t.rows[1].runs[0]));
  auto csv = ablation_to_csv(t);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

} // TEST_SUITE
