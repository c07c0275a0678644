// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance [--cli PATH] [--seeds N] [--csv PATH] [--results PATH] [--strict]
// Exits 0 once every criterion has been evaluated; --strict also exits 1
// when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pvl/backbone/vit.hpp"
#include "pvl/cli/cli.hpp"
#include "pvl/harness/ablation.hpp"
#include "pvl/harness/gradsuite.hpp"
#include "pvl/harness/report.hpp"
#include "pvl/numerics/ops.hpp"
#include "pvl/numerics/optim.hpp"
#include "pvl/numerics/rng.hpp"
#include "pvl/objectives/losses.hpp"
#include "pvl/objectives/prototype.hpp"
#include "pvl/pkt/model.hpp"
#include "pvl/protocol/stream.hpp"
#include "pvl/protocol/synthetic.hpp"

using namespace pvl;
using namespace pvl::harness;
namespace fs = std::filesystem;

namespace {

int failures = 0;
std::string results;

void verdict(int id, bool ok, const std::string &detail) {
  char head[32];
  std::snprintf(head, sizeof head, "criterion %2d: %s  ", id, ok ? "PASS" : "FAIL");
  const std::string line = head + detail + "\n";
  std::fputs(line.c_str(), stdout);
  std::fflush(stdout);
  results += line;
  failures += ok ? 0 : 1;
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string sci(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", prec, v);
  return buf;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::vector<double> uniform(std::size_t n, std::uint64_t seed, double lo = -1, double hi = 1) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto &x : v)
    x = u(rng);
  return v;
}

std::vector<double> softmax_ref(const std::vector<double> &x) {
  double mx = *std::max_element(x.begin(), x.end()), z = 0;
  std::vector<double> p(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    z += (p[i] = std::exp(x[i] - mx));
  for (auto &v : p)
    v /= z;
  return p;
}

double kl_ref(const std::vector<double> &p, const std::vector<double> &q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0)
      s += p[i] * std::log(p[i] / q[i]);
  return s;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

// 1
void gradient_suite() {
  const double t0 = cpu_seconds();
  auto entries = run_grad_suite();
  const double secs = cpu_seconds() - t0;
  double prim = 0, comp = 0;
  bool ok = true;
  std::string worst;
  for (const auto &e : entries) {
    (e.composite ? comp : prim) = std::max(e.composite ? comp : prim, e.result.max_rel_error);
    if (!e.passed) {
      ok = false;
      worst = e.name;
    }
  }
  verdict(1, ok && secs < 60.0,
          std::to_string(entries.size()) + " cases, primitive max " + sci(prim) +
              " (<1e-6), composite max " + sci(comp) + " (<1e-4), " + fmt(secs, 1) +
              " s CPU" + (worst.empty() ? "" : ", failed: " + worst));
}

// 2
void identity_modulation() {
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Model m = Model::create(backbone::ViTConfig{}, seed);
    auto img = uniform(m.config.image_numel(), 100 + seed, 0, 1);
    Features on = forward(m, img);
    m.options.use_modulation = false;
    Features off = forward(m, img);
    for (auto [a, b] : {std::pair{&on.cls, &off.cls}, {&on.vis, &off.vis}, {&on.lang, &off.lang}})
      for (std::size_t i = 0; i < a->numel(); ++i)
        worst = std::max(worst, std::abs(a->data()[i] - b->data()[i]));
  }
  verdict(2, worst < 1e-10, "max abs diff " + sci(worst) + " over 5 models (<1e-10)");
}

// 4
void protocol_invariants() {
  std::size_t checked = 0;
  bool clean = true;
  for (const auto &name : protocol::preset_names())
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto p = protocol::make_preset(name, seed);
      auto b = protocol::generate_synthetic(p.generator);
      auto s = protocol::make_stream(b, p.stream);
      clean &= protocol::validate_stream(s, b).empty();
      ++checked;
    }

  auto p = protocol::make_preset("cifar-mini", 1);
  auto b = protocol::generate_synthetic(p.generator);
  const auto s = protocol::make_stream(b, p.stream);
  using K = protocol::ViolationKind;
  std::vector<std::pair<K, std::function<void(protocol::FSCILStream &)>>> faults = {
      {K::ClassOverlap, [](auto &t) { t.sessions[2].classes[0] = t.sessions[0].classes[3]; }},
      {K::Cardinality, [](auto &t) { t.sessions[1].samples.pop_back(); }},
      {K::SampleOutsideSession, [](auto &t) { t.sessions[3].samples[0] = t.sessions[0].samples[0]; }},
      {K::EvalCoverage, [](auto &t) { t.eval[4].pop_back(); }},
      {K::EvalTrainOverlap, [](auto &t) { t.eval[2][0] = t.sessions[1].samples[0]; }},
      {K::PretextOverlap, [](auto &t) { t.pretext.classes[0] = t.sessions[4].classes[0]; }},
      {K::BadIndex, [&](auto &t) { t.sessions[0].samples[0] = b.size() + 1; }},
  };
  std::size_t detected = 0;
  std::string missed;
  for (auto &[kind, inject] : faults) {
    auto t = s;
    inject(t);
    auto v = protocol::validate_stream(t, b);
    if (std::any_of(v.begin(), v.end(), [&](const auto &x) { return x.kind == kind; }))
      ++detected;
    else
      missed += std::string(" ") + protocol::violation_name(kind);
  }
  verdict(4, clean && detected == faults.size(),
          std::to_string(checked) + " preset streams " + (clean ? "clean" : "VIOLATED") + ", " +
              std::to_string(detected) + "/" + std::to_string(faults.size()) +
              " injected faults named" + missed);
}

// 9
void oracle_equivalences() {
  std::vector<std::string> bad;
  auto x = uniform(7, 1, -3, 3), y = uniform(7, 2, -3, 3);

  auto sm = softmax(Tensor::vector(x));
  auto ref = softmax_ref(x);
  double e = 0;
  for (std::size_t i = 0; i < 7; ++i)
    e = std::max(e, std::abs(sm.data()[i] - ref[i]));
  if (e > 1e-14)
    bad.push_back("softmax");

  auto p = softmax_ref(x), q = softmax_ref(y);
  if (rel(kl_divergence(Tensor::vector(p), Tensor::vector(q)).item(), kl_ref(p, q)) > 1e-12)
    bad.push_back("kl");

  objectives::PrototypeClassifier psi(7, 10.0);
  std::vector<std::vector<double>> protos;
  for (std::uint32_t c = 0; c < 4; ++c) {
    protos.push_back(uniform(7, 10 + c));
    psi.append(c, protos.back());
  }
  auto lg = psi.logits(Tensor::vector(x));
  for (std::size_t c = 0; c < 4; ++c) {
    double dot = 0, nx = 0, np = 0;
    for (std::size_t j = 0; j < 7; ++j) {
      dot += x[j] * protos[c][j];
      nx += x[j] * x[j];
      np += protos[c][j] * protos[c][j];
    }
    if (rel(lg.data()[c], 10.0 * dot / std::sqrt(nx * np)) > 1e-12) {
      bad.push_back("prototype-logits");
      break;
    }
  }

  const std::size_t label = 3;
  const double ce = -std::log(softmax_ref(x)[label]) - std::log(softmax_ref(y)[label]);
  const double ed = std::log(ce / (kl_ref(softmax_ref(x), softmax_ref(y)) + 1e-8) + 1);
  if (rel(objectives::loss_ed(Tensor::vector(x), Tensor::vector(y), label).item(), ed) > 1e-12)
    bad.push_back("loss_ed");

  // Single-token block: attention reduces to the value projection.
  backbone::ViTConfig c;
  c.embed_dim = 8;
  c.num_heads = 2;
  c.depth = 1;
  c.tuned_layers = 0;
  Rng rng(5);
  auto st = backbone::init_backbone(c, rng);
  auto &bw = st.blocks[0];
  auto tok = uniform(8, 6);
  auto out = backbone::block_forward(st, c, Tensor::matrix(1, 8, tok), 0);
  auto lnv = [](const std::vector<double> &v, const Tensor &g, const Tensor &bb) {
    double m = 0, s = 0;
    for (double a : v)
      m += a / v.size();
    for (double a : v)
      s += (a - m) * (a - m) / v.size();
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      r[i] = (v[i] - m) / std::sqrt(s + kLayerNormEpsilon) * g.data()[i] + bb.data()[i];
    return r;
  };
  auto affine = [](const std::vector<double> &v, const Tensor &w, const Tensor &bb) {
    std::vector<double> r(w.cols());
    for (std::size_t j = 0; j < w.cols(); ++j) {
      r[j] = bb.data()[j];
      for (std::size_t k = 0; k < v.size(); ++k)
        r[j] += v[k] * w.at(k, j);
    }
    return r;
  };
  auto v = affine(lnv(tok, bw.ln1_g, bw.ln1_b), bw.w_v, bw.b_v);
  auto o = affine(v, bw.w_o, bw.b_o);
  std::vector<double> x1(8);
  for (std::size_t i = 0; i < 8; ++i)
    x1[i] = tok[i] + o[i];
  auto h = affine(lnv(x1, bw.ln2_g, bw.ln2_b), bw.w_fc1, bw.b_fc1);
  for (auto &a : h)
    a = 0.5 * a * (1 + std::erf(a / std::sqrt(2.0)));
  auto m2 = affine(h, bw.w_fc2, bw.b_fc2);
  double be = 0;
  for (std::size_t i = 0; i < 8; ++i)
    be = std::max(be, std::abs(out.data()[i] - (x1[i] + m2[i])));
  if (be > 1e-12)
    bad.push_back("block");

  // Adam, 10 steps on f(w) = sum(w^4)/4.
  auto w0 = uniform(5, 7);
  Tensor w = Tensor::vector(w0, true);
  std::vector<Parameter> params = {{"w", w, true}};
  AdamState state;
  std::vector<double> r = w0, m(5, 0), s(5, 0);
  double ae = 0;
  for (int t = 1; t <= 10; ++t) {
    backward(scale(sum(square(square(w))), 0.25));
    adam_step(params, state, 0.05);
    for (std::size_t i = 0; i < 5; ++i) {
      const double g = r[i] * r[i] * r[i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      s[i] = 0.999 * s[i] + 0.001 * g * g;
      r[i] -= 0.05 * (m[i] / (1 - std::pow(0.9, t))) /
              (std::sqrt(s[i] / (1 - std::pow(0.999, t))) + 1e-8);
      ae = std::max(ae, std::abs(w.data()[i] - r[i]));
    }
  }
  if (ae > 1e-12)
    bad.push_back("adam");

  std::string names;
  for (const auto &n : bad)
    names += " " + n;
  verdict(9, bad.empty(),
          "softmax, kl, prototype logits, loss_ed, single-token block, adam (10 steps, max " +
              sci(ae) + ")" + (bad.empty() ? "" : "; failed:" + names));
}

// 10
void determinism(const std::string &cli_path) {
  auto dir = fs::temp_directory_path() / "pvl_acceptance";
  fs::create_directories(dir);
  std::vector<std::string> outs = {(dir / "a.json").string(), (dir / "b.json").string()};
  bool ran = true;
  for (const auto &o : outs) {
    if (!cli_path.empty()) {
      std::string cmd = "\"" + cli_path + "\" run --preset cifar-mini --seed 1 -o \"" + o +
                        "\" > /dev/null";
      ran &= std::system(cmd.c_str()) == 0;
    } else {
      std::ostringstream sink;
      ran &= cli::run({"run", "--preset", "cifar-mini", "--seed", "1", "-o", o}, sink, sink) == 0;
    }
  }
  bool same = ran && read_text_file(outs[0]) == read_text_file(outs[1]);
  verdict(10, same, ran ? (same ? "two report files byte-identical" : "report files differ")
                        : "run command failed");
  fs::remove_all(dir);
}

double pooled_median(const AblationRow &row, std::size_t steps) {
  std::vector<double> v;
  for (const auto &r : row.runs)
    for (std::size_t i = 0; i < std::min(steps, r.bprompt_grad_norms.size()); ++i)
      v.push_back(r.bprompt_grad_norms[i]);
  return v.empty() ? 0.0 : median(v);
}

} // namespace

int main(int argc, char **argv) {
  std::string cli_path, csv_path, results_path;
  std::size_t num_seeds = 5;
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc)
      cli_path = argv[++i];
    else if (a == "--seeds" && i + 1 < argc)
      num_seeds = std::stoul(argv[++i]);
    else if (a == "--csv" && i + 1 < argc)
      csv_path = argv[++i];
    else if (a == "--results" && i + 1 < argc)
      results_path = argv[++i];
    else if (a == "--strict")
      strict = true;
    else {
      std::fprintf(stderr, "usage: acceptance [--cli PATH] [--seeds N] [--csv PATH] "
                           "[--results PATH] [--strict]\n");
      return 2;
    }
  }

  gradient_suite();
  identity_modulation();

  // Shared grid for criteria 3, 5, 6, 7 and 8.
  ExperimentConfig base;
  base.preset = "cifar-mini";
  std::vector<AblationCell> cells = method_grid(base);
  std::vector<std::size_t> layers = {0, base.vit.depth};
  for (auto &c : layer_sweep(base, layers))
    cells.push_back(c);
  ExperimentConfig off = apply_method(base, "full");
  off.use_modulation = false;
  off.base_only = true;
  off.max_base_steps = 50;
  cells.push_back({"modulation-off", off});

  std::vector<std::uint64_t> seeds;
  for (std::size_t s = 1; s <= num_seeds; ++s)
    seeds.push_back(s);
  std::map<std::string, double> cpu_by_label;
  double mark = cpu_seconds();
  auto table = run_ablation_suite(cells, seeds, [&](const std::string &label, std::uint64_t seed,
                                                   const RunReport &rep) {
    const double now = cpu_seconds();
    cpu_by_label[label] += now - mark;
    mark = now;
    std::fprintf(stderr, "  seed %llu %-18s A_Base %.3f A_Last %.3f A_Avg %.3f ret %.3f\n",
                 static_cast<unsigned long long>(seed), label.c_str(), rep.metrics.a_base,
                 rep.metrics.a_last, rep.metrics.a_avg, rep.metrics.base_retention);
  });
  if (!csv_path.empty())
    write_text_file(csv_path, ablation_to_csv(table));

  // 3
  std::size_t sessions = 0, audited_runs = 0;
  bool frozen = true;
  for (const auto &row : table.rows)
    for (const auto &r : row.runs) {
      ++audited_runs;
      for (const auto &s : r.sessions) {
        ++sessions;
        frozen &= s.frozen_identical && s.prototypes_identical;
      }
    }
  verdict(3, frozen,
          std::to_string(sessions) + " sessions across " + std::to_string(audited_runs) +
              " runs, frozen parameters and prototype rows " +
              (frozen ? "bit-identical" : "CHANGED"));

  protocol_invariants();

  const auto &ft = *table.find("baseline-finetune");
  const auto &full = *table.find("full");
  const auto &pkt = *table.find("pkt");
  const auto &skd = *table.find("pkt-skd");
  const auto &l0 = *table.find("layers-0");
  const auto &ld = *table.find("layers-" + std::to_string(base.vit.depth));

  // 5
  const double t5 = cpu_by_label["baseline-finetune"] + cpu_by_label["full"];
  verdict(5, ft.median.base_retention < 0.5 && full.median.base_retention >= 0.8 && t5 < 900,
          "retention fine-tune " + fmt(ft.median.base_retention) + " (<0.5), full " +
              fmt(full.median.base_retention) + " (>=0.8), " + fmt(t5, 0) + " s CPU (<900)");

  // 6
  double t6 = 0;
  for (const auto &m : method_names())
    t6 += cpu_by_label[m];
  const double fa = full.median.a_avg, sa = skd.median.a_avg, pa = pkt.median.a_avg;
  verdict(6, fa >= sa && sa >= pa && fa - pa >= 0.01 && t6 < 1800,
          "A_Avg full " + fmt(fa) + ", pkt-skd " + fmt(sa) + ", pkt " + fmt(pa) +
              ", full-pkt " + fmt(fa - pa) + " (>=0.01), " + fmt(t6, 0) + " s CPU (<1800)");

  // 7
  verdict(7, pkt.median.a_last > l0.median.a_last && pkt.median.a_last > ld.median.a_last,
          "A_Last L=2 " + fmt(pkt.median.a_last) + ", L=0 " + fmt(l0.median.a_last) + ", L=" +
              std::to_string(base.vit.depth) + " " + fmt(ld.median.a_last));

  // 8
  const double on = pooled_median(full, 50), offm = pooled_median(*table.find("modulation-off"), 50);
  verdict(8, on > offm,
          "median |grad B-Prompt| first 50 steps: modulation " + sci(on, 5) +
              ", forced ones " + sci(offm, 5));

  oracle_equivalences();
  determinism(cli_path);

  char summary[64];
  std::snprintf(summary, sizeof summary, "%s: %d of 10 criteria failed\n",
                failures ? "FAIL" : "PASS", failures);
  std::fputs(summary, stdout);
  results += summary;
  if (!results_path.empty())
    write_text_file(results_path, results);
  return strict && failures ? 1 : 0;
}
