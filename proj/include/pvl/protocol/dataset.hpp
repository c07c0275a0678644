// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pvl::protocol {

/// Labeled images, channel-major (C x H x W) per image, values in [0, 1].
struct DatasetBundle {
  std::uint32_t channels = 1;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<double> images;
  std::vector<std::uint32_t> labels;
  std::vector<std::string> class_names; // class id = index
  std::string split = "all";            // not persisted

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::size_t image_numel() const {
    return std::size_t{channels} * height * width;
  }
  std::span<const double> image(std::size_t index) const;
  /// Number of samples carrying each class id.
  std::vector<std::size_t> class_counts() const;

  /// Throws ConfigError when labels reference unknown classes, a class has
  /// no samples, or the payload size disagrees with the counts.
  void validate() const;

  bool operator==(const DatasetBundle &) const = default;
};

// Dataset file:
//   "PVDS" | version u32 | N, C, channels, H, W (u32 each)
//   | C x (len u32 | UTF-8 name) | labels u32[N] | float64[N*channels*H*W]
// all little-endian.
inline constexpr char kDatasetMagic[4] = {'P', 'V', 'D', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;

struct DatasetHeader {
  std::uint32_t version = 0;
  std::uint32_t samples = 0;
  std::uint32_t classes = 0;
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::string> class_names;
};

std::vector<std::uint8_t> encode_dataset(const DatasetBundle &bundle);
/// Throws ParseError with the failing byte offset; never returns a partial
/// bundle.
DatasetBundle decode_dataset(std::span<const std::uint8_t> bytes);
DatasetHeader decode_dataset_header(std::span<const std::uint8_t> bytes);

void save_dataset_file(const DatasetBundle &bundle,
                       const std::filesystem::path &path);
DatasetBundle load_dataset_file(const std::filesystem::path &path);
/// Reads counts and class names without the label and image payload.
DatasetHeader read_dataset_header(const std::filesystem::path &path);

} // namespace pvl::protocol
