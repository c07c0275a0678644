// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "pvl/protocol/dataset.hpp"

namespace pvl::protocol {

struct GeneratorParams {
  std::size_t num_classes = 0;
  std::size_t samples_per_class = 0;
  std::size_t image_size = 16;
  std::size_t channels = 1;
  std::size_t patch_size = 4; // only used to reject unpatchable sizes
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-class grating: 0.5 + 0.5 * contrast * sin(2 pi f (x cos t + y sin t) + phase)
/// with x, y in [0, 1). Channel c adds c * channel_shift to the phase.
struct GratingSpec {
  double orientation = 0.0;
  double frequency = 1.0; // cycles per image
  double phase = 0.0;
  double contrast = 1.0;
  double channel_shift = 0.0;
};

GratingSpec class_grating(std::uint64_t seed, std::uint32_t class_id);

/// Renders one noiseless image of `spec`, channel-major.
std::vector<double> render_grating(const GratingSpec &spec, std::size_t size,
                                   std::size_t channels);

/// Classes are generated independently from per-class derived seeds, so the
/// parallel and serial paths produce identical bundles.
DatasetBundle generate_synthetic(const GeneratorParams &params,
                                 bool parallel = true);

} // namespace pvl::protocol
