// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/ops.hpp"
#include "pvl/numerics/rng.hpp"
#include "pvl/pkt/model.hpp"
#include "pvl/pkt/prompts.hpp"

using namespace pvl;

namespace {

std::vector<double> test_image(const backbone::ViTConfig &c, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> img(c.image_numel());
  for (auto &v : img)
    v = u(rng);
  return img;
}

double max_diff(const Tensor &a, const Tensor &b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

} // namespace

TEST_SUITE("pkt") {

TEST_CASE("prompt shapes and identity modulation convention") {
  backbone::ViTConfig c;
  Rng rng(2);
  auto ps = pkt::init_prompts(c, rng);
  CHECK(ps.b_prompt.shape() == Shape{2, 2, 1, 32});
  CHECK(ps.vl.shape() == Shape{2, 32});
  REQUIRE(ps.convs.size() == 2);
  CHECK(ps.convs[0].head_w.size() == 4);
  for (double v : ps.convs[1].generic_w.data())
    CHECK(v == 0.0);
  for (double v : ps.convs[1].head_b[3].data())
    CHECK(v == 1.0);

  c.tuned_layers = 0;
  auto none = pkt::init_prompts(c, rng);
  CHECK_FALSE(none.b_prompt.defined());
  CHECK(none.convs.empty());
}

TEST_CASE("identity modulation equals the unmodulated prefix") {
  Model m = Model::create(backbone::ViTConfig{}, 3);
  auto img = test_image(m.config, 4);
  Features with = forward(m, img);
  m.options.use_modulation = false;
  Features without = forward(m, img);
  CHECK(max_diff(with.cls, without.cls) < 1e-10);
  CHECK(max_diff(with.vis, without.vis) < 1e-10);
  CHECK(max_diff(with.lang, without.lang) < 1e-10);
}

TEST_CASE("modulation prompts scale keys and values per column") {
  backbone::Prefix raw{Tensor::matrix(1, 3, {1, 2, 3}),
                       Tensor::matrix(1, 3, {4, 5, 6})};
  auto out = pkt::modulate(raw, Tensor::vector({2, 0, -1}),
                           Tensor::vector({0.5, 1, 2}));
  CHECK(out.keys.at(0, 0) == 2.0);
  CHECK(out.keys.at(0, 1) == 0.0);
  CHECK(out.keys.at(0, 2) == -3.0);
  CHECK(out.values.at(0, 0) == 2.0);
  CHECK(out.values.at(0, 2) == 12.0);
}

TEST_CASE("non-identity modulation changes the output") {
  Model m = Model::create(backbone::ViTConfig{}, 3);
  auto img = test_image(m.config, 4);
  Features before = forward(m, img);
  auto b = m.prompts.convs[0].generic_b.mutable_data();
  for (auto &v : b)
    v = 3.0;
  CHECK(max_diff(forward(m, img).cls, before.cls) > 1e-6);
}

TEST_CASE("b-prompt slices per layer") {
  backbone::ViTConfig c;
  c.prefix_len = 2;
  Rng rng(7);
  auto ps = pkt::init_prompts(c, rng);
  auto p1 = pkt::b_prompt_layer(ps, c, 1);
  CHECK(p1.keys.shape() == Shape{2, 32});
  CHECK(p1.keys.at(1, 5) == ps.b_prompt.data()[(1 * 2 + 0) * 2 * 32 + 32 + 5]);
  CHECK(p1.values.at(0, 0) == ps.b_prompt.data()[(1 * 2 + 1) * 2 * 32]);
  CHECK_THROWS(pkt::b_prompt_layer(ps, c, 2));
}

TEST_CASE("disabling the vl prompt feeds zero rows") {
  Model m = Model::create(backbone::ViTConfig{}, 8);
  auto img = test_image(m.config, 1);
  m.options.use_vl_prompt = false;
  Features a = forward(m, img);
  Model z = m.clone();
  for (auto &v : z.prompts.vl.mutable_data())
    v = 0.0;
  z.options.use_vl_prompt = true;
  CHECK(max_diff(a.cls, forward(z, img).cls) == 0.0);
}

TEST_CASE("trainable sets follow the session kind") {
  Model m = Model::create(backbone::ViTConfig{}, 1);
  auto base = trainable_set(m, SessionKind::Base);
  CHECK(base.count("prompt.vl"));
  CHECK(base.count("prompt.b_prompt"));
  bool any_block2 = false, any_block0 = false;
  for (const auto &n : base) {
    any_block0 |= n.rfind(backbone::block_prefix(0), 0) == 0;
    any_block2 |= n.rfind(backbone::block_prefix(2), 0) == 0;
  }
  CHECK(any_block0);
  CHECK_FALSE(any_block2);
  auto inc = trainable_set(m, SessionKind::Incremental);
  CHECK(inc == std::set<std::string>{"prompt.vl"});

  m.set_trainable(inc);
  for (const auto &p : m.parameters())
    CHECK(p.trainable == (p.name == "prompt.vl"));
  CHECK_THROWS_AS(m.set_trainable({"no.such.weight"}), ContractError);
}

TEST_CASE("clone is independent") {
  Model m = Model::create(backbone::ViTConfig{}, 1);
  Model c = m.clone();
  c.prompts.vl.mutable_data()[0] += 1.0;
  CHECK(c.prompts.vl.data()[0] != m.prompts.vl.data()[0]);
}

TEST_CASE("gradients flow into the prompts") {
  Model m = Model::create(backbone::ViTConfig{}, 1);
  m.set_trainable(trainable_set(m, SessionKind::Base));
  auto img = test_image(m.config, 2);
  Features f = forward(m, img);
  backward(sum(square(f.cls)));
  CHECK(m.prompts.b_prompt.has_grad());
  double g = 0.0;
  for (double v : m.prompts.b_prompt.grad())
    g += v * v;
  CHECK(g > 0.0);
  CHECK_FALSE(m.backbone.blocks[3].w_q.has_grad());
}

} // TEST_SUITE
