// SPDX-License-Identifier: Apache-2.0
#include "pvl/harness/gradsuite.hpp"

#include <functional>

#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/ops.hpp"
#include "pvl/numerics/rng.hpp"
#include "pvl/objectives/losses.hpp"
#include "pvl/pkt/model.hpp"

namespace pvl::harness {

namespace {

struct Case {
  std::string name;
  bool composite;
  std::function<Tensor()> loss;
  std::vector<Parameter> params;
};

class Fixture {
public:
  explicit Fixture(std::uint64_t seed) : rng_(seed) {}

  Tensor random(Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(shape_numel(shape));
    for (auto &x : v)
      x = u(rng_);
    return Tensor(std::move(shape), std::move(v), true);
  }

  /// sum(op(...) * W) with a fixed random W of the op's output shape.
  Case weighted(std::string name, std::vector<Tensor> inputs,
                std::function<Tensor(const std::vector<Tensor> &)> op) {
    Tensor probe;
    {
      NoGradGuard g;
      probe = op(inputs);
    }
    Tensor w = random(probe.shape());
    w.set_requires_grad(false);
    Case c{std::move(name), false, {}, {}};
    for (std::size_t i = 0; i < inputs.size(); ++i)
      c.params.push_back({c.name + ".in" + std::to_string(i), inputs[i], true});
    c.loss = [inputs, w, op] { return sum(mul(op(inputs), w)); };
    return c;
  }

  Rng &rng() { return rng_; }

private:
  Rng rng_;
};

std::vector<Case> primitive_cases(Fixture &f) {
  std::vector<Case> cs;
  using V = std::vector<Tensor>;
  cs.push_back(f.weighted("matmul", {f.random({3, 4}), f.random({4, 2})},
                          [](const V &x) { return matmul(x[0], x[1]); }));
  cs.push_back(f.weighted("matmul_vec", {f.random({4}), f.random({4, 3})},
                          [](const V &x) { return matmul(x[0], x[1]); }));
  cs.push_back(f.weighted("matmul_nt", {f.random({3, 4}), f.random({2, 4})},
                          [](const V &x) { return matmul_nt(x[0], x[1]); }));
  cs.push_back(f.weighted("transpose", {f.random({3, 2})},
                          [](const V &x) { return transpose(x[0]); }));
  cs.push_back(f.weighted("add", {f.random({2, 3}), f.random({2, 3})},
                          [](const V &x) { return add(x[0], x[1]); }));
  cs.push_back(f.weighted("sub", {f.random({2, 3}), f.random({2, 3})},
                          [](const V &x) { return sub(x[0], x[1]); }));
  cs.push_back(f.weighted("mul", {f.random({2, 3}), f.random({2, 3})},
                          [](const V &x) { return mul(x[0], x[1]); }));
  cs.push_back(f.weighted("div", {f.random({2, 3}), f.random({2, 3}, 0.5, 2.0)},
                          [](const V &x) { return div(x[0], x[1]); }));
  cs.push_back(f.weighted("scale", {f.random({5})},
                          [](const V &x) { return scale(x[0], -1.7); }));
  cs.push_back(f.weighted("add_scalar", {f.random({5})},
                          [](const V &x) { return add_scalar(x[0], 0.3); }));
  cs.push_back(f.weighted("log", {f.random({5}, 0.2, 3.0)},
                          [](const V &x) { return log(x[0]); }));
  cs.push_back(f.weighted("exp", {f.random({5})},
                          [](const V &x) { return exp(x[0]); }));
  cs.push_back(f.weighted("square", {f.random({5})},
                          [](const V &x) { return square(x[0]); }));
  cs.push_back(f.weighted("gelu", {f.random({2, 4}, -3.0, 3.0)},
                          [](const V &x) { return gelu(x[0]); }));
  cs.push_back(f.weighted("add_rowvec", {f.random({3, 4}), f.random({4})},
                          [](const V &x) { return add_rowvec(x[0], x[1]); }));
  cs.push_back(f.weighted("mul_rowvec", {f.random({3, 4}), f.random({4})},
                          [](const V &x) { return mul_rowvec(x[0], x[1]); }));
  cs.push_back(f.weighted("linear", {f.random({3, 4}), f.random({4, 2}), f.random({2})},
                          [](const V &x) { return linear(x[0], x[1], x[2]); }));
  cs.push_back(f.weighted("sum", {f.random({2, 3})},
                          [](const V &x) { return sum(x[0]); }));
  cs.push_back(f.weighted("mean", {f.random({2, 3})},
                          [](const V &x) { return mean(x[0]); }));
  cs.push_back(f.weighted("mean_rows", {f.random({3, 4})},
                          [](const V &x) { return mean_rows(x[0]); }));
  cs.push_back(f.weighted("average", {f.random({4}), f.random({4}), f.random({4})},
                          [](const V &x) { return average(x); }));
  cs.push_back(f.weighted("softmax", {f.random({2, 5}, -3.0, 3.0)},
                          [](const V &x) { return softmax(x[0]); }));
  cs.push_back(f.weighted("softmax_axis0", {f.random({3, 4}, -3.0, 3.0)},
                          [](const V &x) { return softmax(x[0], 0); }));
  cs.push_back(f.weighted("log_softmax", {f.random({6}, -3.0, 3.0)},
                          [](const V &x) { return log_softmax(x[0]); }));
  cs.push_back(f.weighted("layer_norm", {f.random({3, 5})},
                          [](const V &x) { return layer_norm(x[0]); }));
  cs.push_back(f.weighted("layer_norm_affine",
                          {f.random({3, 5}), f.random({5}), f.random({5})},
                          [](const V &x) { return layer_norm(x[0], x[1], x[2]); }));
  cs.push_back(f.weighted("l2_normalize", {f.random({2, 4})},
                          [](const V &x) { return l2_normalize(x[0]); }));
  cs.push_back(f.weighted("cross_entropy", {f.random({5}, -3.0, 3.0)},
                          [](const V &x) { return cross_entropy(x[0], 2); }));
  cs.push_back(f.weighted("kl_divergence",
                          {f.random({5}, -2.0, 2.0), f.random({5}, -2.0, 2.0)},
                          [](const V &x) {
                            return kl_divergence(softmax(x[0]), softmax(x[1]));
                          }));
  cs.push_back(f.weighted("reshape", {f.random({2, 3})},
                          [](const V &x) { return reshape(x[0], {3, 2}); }));
  cs.push_back(f.weighted("slice_rows", {f.random({4, 3})},
                          [](const V &x) { return slice_rows(x[0], 1, 3); }));
  cs.push_back(f.weighted("slice_cols", {f.random({3, 5})},
                          [](const V &x) { return slice_cols(x[0], 1, 4); }));
  cs.push_back(f.weighted("concat_rows", {f.random({2, 3}), f.random({1, 3})},
                          [](const V &x) { return concat_rows(x); }));
  cs.push_back(f.weighted("concat_cols", {f.random({2, 3}), f.random({2, 2})},
                          [](const V &x) { return concat_cols(x); }));
  cs.push_back(f.weighted("row", {f.random({3, 4})},
                          [](const V &x) { return row(x[0], 1); }));
  return cs;
}

backbone::ViTConfig tiny_config() {
  backbone::ViTConfig c;
  c.image_height = 4;
  c.image_width = 8;
  c.channels = 1;
  c.patch_size = 4;
  c.embed_dim = 8;
  c.num_heads = 2;
  c.depth = 2;
  c.mlp_ratio = 2.0;
  c.prefix_len = 1;
  c.tuned_layers = 2;
  return c;
}

std::vector<Case> composite_cases(Fixture &f) {
  auto model = std::make_shared<Model>(Model::create(tiny_config(), 0x7469));
  // Identity-initialised modulation would hide its gradient paths.
  for (auto &p : model->parameters("prompt.")) {
    auto v = p.tensor.mutable_data();
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto &x : v)
      x += u(f.rng());
  }
  const std::size_t d = model->config.embed_dim;
  auto psi = std::make_shared<objectives::PrototypeClassifier>(d, 10.0);
  for (std::uint32_t c = 0; c < 3; ++c) {
    Tensor proto = f.random({d});
    psi->append(c, proto.data());
  }
  auto image = [&] {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(model->config.image_numel());
    for (auto &x : v)
      x = u(f.rng());
    return v;
  };
  auto img_a = image(), img_b = image();
  Tensor emb_a = f.random({d}), emb_b = f.random({d});
  emb_a.set_requires_grad(false);
  emb_b.set_requires_grad(false);

  std::vector<Parameter> params = model->parameters();
  for (auto &p : params)
    p.trainable = true;
  const objectives::LossWeights w;

  std::vector<Case> cs;
  cs.push_back({"loss_ed", true,
                [=] {
                  Features fa = forward(*model, img_a);
                  return objectives::loss_ed(psi->logits(fa.vis), psi->logits(fa.cls), 1);
                },
                params});
  cs.push_back({"loss_skd", true,
                [=] {
                  Features fa = forward(*model, img_a);
                  return objectives::loss_skd(fa.lang, emb_a, *psi, 1, w.gamma, w.tau);
                },
                params});
  auto batch = [=] {
    std::vector<objectives::SampleTerms> terms;
    terms.push_back({forward(*model, img_a), 1, emb_a});
    terms.push_back({forward(*model, img_b), 2, emb_b});
    return terms;
  };
  cs.push_back({"loss_base", true,
                [=] { return objectives::loss_base(batch(), *psi, w).total; },
                params});
  cs.push_back({"loss_inc", true,
                [=] { return objectives::loss_inc(batch(), *psi, w).total; },
                params});
  return cs;
}

std::vector<Case> all_cases(std::uint64_t seed) {
  Fixture f(seed);
  auto cs = primitive_cases(f);
  for (auto &c : composite_cases(f))
    cs.push_back(std::move(c));
  return cs;
}

} // namespace

std::vector<std::string> grad_suite_case_names() {
  std::vector<std::string> names;
  for (const auto &c : all_cases(0))
    names.push_back(c.name);
  return names;
}

std::vector<GradSuiteEntry> run_grad_suite(const GradSuiteOptions &options) {
  auto cases = all_cases(options.seed);
  if (!options.inject_fault.empty()) {
    bool found = false;
    for (const auto &c : cases)
      found |= c.name == options.inject_fault;
    if (!found)
      throw ConfigError("no gradient case named '" + options.inject_fault + "'");
  }
  std::vector<GradSuiteEntry> out;
  for (const auto &c : cases) {
    GradCheckOptions go;
    go.step = options.step;
    go.floor = options.floor;
    if (c.name == options.inject_fault)
      go.analytic_bias = options.fault_bias;
    GradSuiteEntry e;
    e.name = c.name;
    e.composite = c.composite;
    e.tolerance = c.composite ? options.composite_tolerance
                              : options.primitive_tolerance;
    e.result = gradcheck(c.loss, c.params, go);
    e.passed = e.result.max_rel_error < e.tolerance;
    out.push_back(std::move(e));
  }
  return out;
}

} // namespace pvl::harness
