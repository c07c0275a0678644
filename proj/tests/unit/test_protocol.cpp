// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "pvl/numerics/errors.hpp"
#include "pvl/protocol/dataset.hpp"
#include "pvl/protocol/stream.hpp"
#include "pvl/protocol/synthetic.hpp"

using namespace pvl;
using namespace pvl::protocol;

namespace {

bool has_kind(const std::vector<Violation> &v, ViolationKind k) {
  return std::any_of(v.begin(), v.end(),
                     [&](const Violation &x) { return x.kind == k; });
}

std::pair<DatasetBundle, FSCILStream> small_stream(std::uint64_t seed) {
  GeneratorParams g{12, 10, 8, 1, 4, 0.1, seed};
  StreamParams s;
  s.base_classes = 4;
  s.way = 2;
  s.shot = 3;
  s.num_incremental = 2;
  s.eval_per_class = 4;
  s.pretext_classes = 4;
  s.seed = seed;
  auto b = generate_synthetic(g);
  return {b, make_stream(b, s)};
}

} // namespace

TEST_SUITE("protocol") {

TEST_CASE("noiseless samples of a class are identical renders") {
  GeneratorParams g{3, 4, 16, 2, 4, 0.0, 9};
  auto b = generate_synthetic(g);
  CHECK(b.size() == 12);
  CHECK_NOTHROW(b.validate());
  for (std::uint32_t c = 0; c < 3; ++c) {
    auto ref = render_grating(class_grating(9, c), 16, 2);
    for (std::size_t i = 0; i < b.size(); ++i)
      if (b.labels[i] == c) {
        auto img = b.image(i);
        CHECK(std::equal(img.begin(), img.end(), ref.begin()));
      }
  }
}

TEST_CASE("grating render follows its formula") {
  GratingSpec s{0.3, 2.0, 0.5, 0.8, 1.1};
  auto img = render_grating(s, 8, 2);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        const double xs = x / 8.0, ys = y / 8.0;
        const double v =
            0.5 + 0.5 * 0.8 *
                      std::sin(2 * M_PI * 2.0 *
                                   (xs * std::cos(0.3) + ys * std::sin(0.3)) +
                               0.5 + c * 1.1);
        CHECK(img[(c * 8 + y) * 8 + x] == doctest::Approx(v).epsilon(1e-12));
      }
}

TEST_CASE("class parameters stay in range") {
  for (std::uint32_t c = 0; c < 200; ++c) {
    auto g = class_grating(4, c);
    CHECK(g.orientation >= 0.0);
    CHECK(g.orientation < M_PI);
    CHECK(g.frequency >= 1.0);
    CHECK(g.frequency <= 4.0);
    CHECK(g.contrast >= 0.6);
    CHECK(g.contrast <= 1.0);
  }
}

TEST_CASE("generation is deterministic and parallel-invariant") {
  GeneratorParams g{6, 7, 16, 1, 4, 0.2, 21};
  auto a = generate_synthetic(g, true), b = generate_synthetic(g, false);
  CHECK(a == b);
  g.seed = 22;
  CHECK_FALSE(generate_synthetic(g) == a);
  for (double v : a.images) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("generator rejects bad parameters") {
  GeneratorParams g{2, 2, 10, 1, 4, 0.1, 1};
  CHECK_THROWS_AS(generate_synthetic(g), ConfigError);
  g.image_size = 8;
  g.noise_sigma = -0.1;
  CHECK_THROWS_AS(generate_synthetic(g), ConfigError);
  g.noise_sigma = 0.1;
  g.num_classes = 0;
  CHECK_THROWS_AS(generate_synthetic(g), ConfigError);
}

TEST_CASE("nearest class mean separates low-noise classes") {
  GeneratorParams g{20, 30, 16, 1, 4, 0.05, 2};
  auto b = generate_synthetic(g);
  const std::size_t n = b.image_numel();
  std::vector<std::vector<double>> mean(20, std::vector<double>(n, 0.0));
  std::vector<std::size_t> seen(20, 0);
  std::vector<std::size_t> test;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto c = b.labels[i];
    if (seen[c] < 15) {
      auto img = b.image(i);
      for (std::size_t j = 0; j < n; ++j)
        mean[c][j] += img[j] / 15.0;
      ++seen[c];
    } else {
      test.push_back(i);
    }
  }
  std::size_t correct = 0;
  for (auto i : test) {
    auto img = b.image(i);
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t c = 0; c < 20; ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        d += (img[j] - mean[c][j]) * (img[j] - mean[c][j]);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    correct += best == b.labels[i];
  }
  CHECK(double(correct) / test.size() >= 0.95);
}

TEST_CASE("dataset encoding round trip and header read") {
  GeneratorParams g{3, 2, 8, 2, 4, 0.1, 5};
  auto b = generate_synthetic(g);
  auto bytes = encode_dataset(b);
  CHECK(decode_dataset(bytes) == b);
  auto h = decode_dataset_header(bytes);
  CHECK(h.samples == 6);
  CHECK(h.classes == 3);
  CHECK(h.channels == 2);
  CHECK(h.class_names == b.class_names);

  auto path = std::filesystem::temp_directory_path() / "pvl_ds_test.pvds";
  save_dataset_file(b, path);
  CHECK(load_dataset_file(path) == b);
  CHECK(read_dataset_header(path).samples == 6);
  std::filesystem::remove(path);
}

TEST_CASE("truncated or corrupt dataset files fail with an offset") {
  GeneratorParams g{2, 2, 8, 1, 4, 0.1, 5};
  auto bytes = encode_dataset(generate_synthetic(g));
  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, bytes.size() - 8,
                          bytes.size() - 1}) {
    auto t = bytes;
    t.resize(cut);
    CHECK_THROWS_AS(decode_dataset(t), ParseError);
  }
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(decode_dataset(extra), ParseError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_dataset(bad), ParseError);
  auto ver = bytes;
  ver[4] = 9;
  try {
    decode_dataset(ver);
    FAIL("expected parse error");
  } catch (const ParseError &e) {
    CHECK(e.offset() == 4);
  }
}

TEST_CASE("bundle validation") {
  DatasetBundle b;
  b.height = b.width = 1;
  b.class_names = {"a", "b"};
  b.labels = {0, 0};
  b.images = {0.1, 0.2};
  CHECK_THROWS_AS(b.validate(), ConfigError); // class b has no samples
  b.labels = {0, 2};
  CHECK_THROWS_AS(b.validate(), ConfigError);
  b.labels = {0, 1};
  b.images = {0.1};
  CHECK_THROWS_AS(b.validate(), ConfigError);
  CHECK_THROWS_AS(b.image(5), IndexError);
}

TEST_CASE("stream structure satisfies every invariant") {
  auto [b, s] = small_stream(3);
  CHECK(validate_stream(s, b).empty());
  REQUIRE(s.num_sessions() == 3);
  CHECK(s.sessions[0].classes.size() == 4);
  CHECK(s.sessions[1].classes.size() == 2);
  CHECK(s.sessions[1].samples.size() == 6);
  CHECK(s.pretext.classes.size() == 4);

  std::set<std::uint32_t> all;
  for (const auto &sess : s.sessions)
    for (auto c : sess.classes)
      CHECK(all.insert(c).second);
  for (auto c : s.pretext.classes)
    CHECK(all.insert(c).second);

  for (std::size_t t = 0; t < 3; ++t) {
    auto seen = s.seen_classes(t);
    std::set<std::uint32_t> seen_set(seen.begin(), seen.end());
    CHECK(s.eval[t].size() == seen.size() * 4);
    for (auto i : s.eval[t])
      CHECK(seen_set.count(b.labels[i]));
    for (const auto &sess : s.sessions)
      for (auto i : sess.samples)
        CHECK(std::find(s.eval[t].begin(), s.eval[t].end(), i) == s.eval[t].end());
  }
}

TEST_CASE("streams are seed-deterministic") {
  auto [b1, s1] = small_stream(5);
  auto [b2, s2] = small_stream(5);
  CHECK(s1.sessions[1].classes == s2.sessions[1].classes);
  CHECK(s1.sessions[2].samples == s2.sessions[2].samples);
  CHECK(s1.eval[2] == s2.eval[2]);
  auto [b3, s3] = small_stream(6);
  CHECK_FALSE(s1.sessions[0].samples == s3.sessions[0].samples);
}

TEST_CASE("injected faults are each detected") {
  auto [b, s] = small_stream(3);
  {
    auto t = s;
    t.sessions[1].classes[0] = t.sessions[0].classes[0];
    CHECK(has_kind(validate_stream(t, b), ViolationKind::ClassOverlap));
  }
  {
    auto t = s;
    t.sessions[2].samples.pop_back();
    CHECK(has_kind(validate_stream(t, b), ViolationKind::Cardinality));
  }
  {
    auto t = s;
    t.sessions[1].samples[0] = t.sessions[0].samples[0];
    CHECK(has_kind(validate_stream(t, b), ViolationKind::SampleOutsideSession));
  }
  {
    auto t = s;
    t.eval[1].pop_back();
    CHECK(has_kind(validate_stream(t, b), ViolationKind::EvalCoverage));
  }
  {
    auto t = s;
    t.eval[0][0] = t.sessions[0].samples[0];
    CHECK(has_kind(validate_stream(t, b), ViolationKind::EvalTrainOverlap));
  }
  {
    auto t = s;
    t.pretext.classes[0] = t.sessions[1].classes[0];
    CHECK(has_kind(validate_stream(t, b), ViolationKind::PretextOverlap));
  }
  {
    auto t = s;
    t.sessions[0].samples[0] = b.size() + 3;
    CHECK(has_kind(validate_stream(t, b), ViolationKind::BadIndex));
  }
  CHECK(std::string(violation_name(ViolationKind::EvalTrainOverlap)) ==
        "eval-train-overlap");
}

TEST_CASE("one-shot sessions") {
  GeneratorParams g{10, 6, 8, 1, 4, 0.1, 1};
  auto b = generate_synthetic(g);
  StreamParams p{2, 3, 1, 2, 5, 2, 1};
  auto s = make_stream(b, p);
  CHECK(validate_stream(s, b).empty());
  CHECK(s.sessions[2].samples.size() == 3);
}

TEST_CASE("stream construction rejects an undersized bundle") {
  GeneratorParams g{10, 6, 8, 1, 4, 0.1, 1};
  auto b = generate_synthetic(g);
  StreamParams too_many{4, 3, 1, 2, 5, 2, 1};
  CHECK_THROWS_AS(make_stream(b, too_many), ConfigError);
  StreamParams too_deep{2, 3, 2, 2, 5, 2, 1};
  CHECK_THROWS_AS(make_stream(b, too_deep), ConfigError);
  StreamParams no_shot{2, 3, 0, 2, 5, 2, 1};
  CHECK_THROWS_AS(make_stream(b, no_shot), ConfigError);
}

TEST_CASE("presets produce valid streams") {
  for (const auto &name : preset_names()) {
    auto p = make_preset(name, 1);
    auto b = generate_synthetic(p.generator);
    auto s = make_stream(b, p.stream);
    CHECK(validate_stream(s, b).empty());
    CHECK(s.num_sessions() == p.stream.num_incremental + 1);
  }
  CHECK(make_preset("cub-mini", 1).stream.shot == 3);
  CHECK_THROWS_AS(make_preset("imagenet", 1), ConfigError);
}

} // TEST_SUITE
