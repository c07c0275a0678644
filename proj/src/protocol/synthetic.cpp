// SPDX-License-Identifier: Apache-2.0
#include "pvl/protocol/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/rng.hpp"

namespace pvl::protocol {

void GeneratorParams::validate() const {
  if (num_classes == 0 || samples_per_class == 0 || channels == 0)
    throw ConfigError("generator counts must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ConfigError("noise sigma must be finite and non-negative");
  if (patch_size == 0 || image_size < patch_size || image_size % patch_size)
    throw ConfigError("image size " + std::to_string(image_size) +
                      " cannot be split into patches of " +
                      std::to_string(patch_size));
}

GratingSpec class_grating(std::uint64_t seed, std::uint32_t class_id) {
  Rng rng(derive_seed(seed, class_id));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GratingSpec g;
  g.orientation = std::numbers::pi * u(rng);
  g.frequency = 1.0 + 3.0 * u(rng);
  g.phase = 2.0 * std::numbers::pi * u(rng);
  g.contrast = 0.6 + 0.4 * u(rng);
  g.channel_shift = 2.0 * std::numbers::pi * u(rng);
  return g;
}

std::vector<double> render_grating(const GratingSpec &g, std::size_t size,
                                   std::size_t channels) {
  std::vector<double> img(channels * size * size);
  const double ct = std::cos(g.orientation), st = std::sin(g.orientation);
  const double inv = 1.0 / static_cast<double>(size);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double u = (static_cast<double>(x) * ct +
                          static_cast<double>(y) * st) * inv;
        const double v = std::sin(2.0 * std::numbers::pi * g.frequency * u +
                                  g.phase + static_cast<double>(c) * g.channel_shift);
        img[(c * size + y) * size + x] = 0.5 + 0.5 * g.contrast * v;
      }
  return img;
}

namespace {

constexpr std::uint64_t kNoiseTag = 0x4e4f495345ULL;

void fill_class(const GeneratorParams &p, std::uint32_t cls,
                DatasetBundle &out) {
  const std::size_t numel = p.channels * p.image_size * p.image_size;
  const auto clean = render_grating(class_grating(p.seed, cls), p.image_size,
                                    p.channels);
  Rng rng(derive_seed(derive_seed(p.seed, kNoiseTag), cls));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t s = 0; s < p.samples_per_class; ++s) {
    const std::size_t idx = cls * p.samples_per_class + s;
    double *dst = out.images.data() + idx * numel;
    for (std::size_t i = 0; i < numel; ++i) {
      double v = clean[i];
      if (p.noise_sigma > 0.0)
        v += p.noise_sigma * noise(rng);
      dst[i] = std::clamp(v, 0.0, 1.0);
    }
    out.labels[idx] = cls;
  }
}

} // namespace

DatasetBundle generate_synthetic(const GeneratorParams &p, bool parallel) {
  p.validate();
  DatasetBundle b;
  b.channels = static_cast<std::uint32_t>(p.channels);
  b.height = b.width = static_cast<std::uint32_t>(p.image_size);
  const std::size_t n = p.num_classes * p.samples_per_class;
  b.images.resize(n * b.image_numel());
  b.labels.resize(n);
  b.class_names.resize(p.num_classes);
  for (std::size_t c = 0; c < p.num_classes; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "grating-%03zu", c);
    b.class_names[c] = name;
  }
  const auto classes = static_cast<std::int64_t>(p.num_classes);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t c = 0; c < classes; ++c)
    fill_class(p, static_cast<std::uint32_t>(c), b);
  return b;
}

} // namespace pvl::protocol
