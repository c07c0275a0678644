// SPDX-License-Identifier: Apache-2.0
#include "pvl/protocol/dataset.hpp"

#include <cstring>
#include <fstream>

#include "pvl/numerics/binary_io.hpp"
#include "pvl/numerics/errors.hpp"

namespace pvl::protocol {

std::span<const double> DatasetBundle::image(std::size_t index) const {
  if (index >= size())
    throw IndexError("sample " + std::to_string(index) + " of " +
                     std::to_string(size()));
  return std::span<const double>(images).subspan(index * image_numel(),
                                                 image_numel());
}

std::vector<std::size_t> DatasetBundle::class_counts() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (auto l : labels)
    if (l < counts.size())
      ++counts[l];
  return counts;
}

void DatasetBundle::validate() const {
  if (images.size() != size() * image_numel())
    throw ConfigError("dataset payload has " + std::to_string(images.size()) +
                      " values for " + std::to_string(size()) + " images");
  for (auto l : labels)
    if (l >= num_classes())
      throw ConfigError("label " + std::to_string(l) + " has no class name");
  auto counts = class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0)
      throw ConfigError("class " + std::to_string(c) + " (" + class_names[c] +
                        ") has no samples");
}

std::vector<std::uint8_t> encode_dataset(const DatasetBundle &bundle) {
  bundle.validate();
  binio::Writer w;
  w.bytes(kDatasetMagic, 4);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(bundle.size()));
  w.u32(static_cast<std::uint32_t>(bundle.num_classes()));
  w.u32(bundle.channels);
  w.u32(bundle.height);
  w.u32(bundle.width);
  for (const auto &name : bundle.class_names)
    w.str(name);
  for (auto l : bundle.labels)
    w.u32(l);
  w.f64s(bundle.images);
  return w.take();
}

namespace {

DatasetHeader read_header(binio::Reader &r) {
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kDatasetMagic, 4) != 0)
    throw ParseError("bad dataset magic", 0);
  DatasetHeader h;
  const std::size_t version_at = r.offset();
  h.version = r.u32("version");
  if (h.version != kDatasetVersion)
    throw ParseError("unsupported dataset version " + std::to_string(h.version),
                     version_at);
  h.samples = r.u32("sample count");
  h.classes = r.u32("class count");
  h.channels = r.u32("channels");
  h.height = r.u32("height");
  h.width = r.u32("width");
  h.class_names.reserve(h.classes);
  for (std::uint32_t c = 0; c < h.classes; ++c)
    h.class_names.push_back(r.str("class name", 4096));
  return h;
}

} // namespace

DatasetHeader decode_dataset_header(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes);
  return read_header(r);
}

DatasetBundle decode_dataset(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes);
  DatasetHeader h = read_header(r);
  DatasetBundle b;
  b.channels = h.channels;
  b.height = h.height;
  b.width = h.width;
  b.class_names = std::move(h.class_names);

  const std::size_t labels_at = r.offset();
  if (r.remaining() < std::size_t{h.samples} * 4)
    throw ParseError("truncated label table", labels_at);
  b.labels.resize(h.samples);
  for (auto &l : b.labels) {
    const std::size_t at = r.offset();
    l = r.u32("label");
    if (l >= h.classes)
      throw ParseError("label " + std::to_string(l) + " out of range", at);
  }
  const std::size_t payload_at = r.offset();
  const std::size_t values = std::size_t{h.samples} * b.image_numel();
  if (r.remaining() != values * sizeof(double))
    throw ParseError("image payload has " + std::to_string(r.remaining()) +
                         " bytes, expected " +
                         std::to_string(values * sizeof(double)),
                     payload_at);
  b.images.resize(values);
  r.f64s(b.images, "image payload");
  return b;
}

void save_dataset_file(const DatasetBundle &bundle,
                       const std::filesystem::path &path) {
  binio::write_file(path, encode_dataset(bundle));
}

DatasetBundle load_dataset_file(const std::filesystem::path &path) {
  return decode_dataset(binio::read_file(path));
}

DatasetHeader read_dataset_header(const std::filesystem::path &path) {
  // Fixed fields plus a generous allowance for the name table.
  auto prefix = binio::read_file_prefix(path, 1u << 20);
  return decode_dataset_header(prefix);
}

} // namespace pvl::protocol
