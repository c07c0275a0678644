// SPDX-License-Identifier: Apache-2.0
#include "pvl/backbone/checkpoint.hpp"

#include <algorithm>
#include <cstring>

#include "pvl/numerics/binary_io.hpp"

namespace pvl::checkpoint {

std::vector<std::uint8_t> encode(std::span<const Parameter> params) {
  check_unique_names(params);
  std::vector<const Parameter *> sorted;
  for (const auto &p : params)
    sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(),
            [](auto *a, auto *b) { return a->name < b->name; });

  binio::Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  for (const auto *p : sorted) {
    w.str(p->name);
    const auto &shape = p->tensor.shape();
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape)
      w.u32(static_cast<std::uint32_t>(d));
    w.f64s(p->tensor.data());
  }
  return w.take();
}

TensorMap decode(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("bad checkpoint magic", 0);
  const std::size_t version_at = r.offset();
  if (auto v = r.u32("version"); v != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(v),
                     version_at);

  TensorMap out;
  std::string previous;
  while (!r.at_end()) {
    const std::size_t record_at = r.offset();
    std::string name = r.str("parameter name");
    if (!out.empty() && name <= previous)
      throw ParseError("records not in sorted name order at '" + name + "'",
                       record_at);
    const std::size_t rank_at = r.offset();
    auto rank = r.u32("rank");
    if (rank == 0 || rank > 8)
      throw ParseError("implausible rank " + std::to_string(rank), rank_at);
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto &d : shape) {
      d = r.u32("dimension");
      numel *= d;
    }
    if (numel == 0 || numel * sizeof(double) > r.remaining())
      throw ParseError("truncated payload for '" + name + "'", r.offset());
    std::vector<double> values(numel);
    r.f64s(values, "payload");
    out.emplace(name, Tensor(std::move(shape), std::move(values)));
    previous = std::move(name);
  }
  return out;
}

void save(const std::filesystem::path &path, std::span<const Parameter> params) {
  binio::write_file(path, encode(params));
}

TensorMap load(const std::filesystem::path &path) {
  return decode(binio::read_file(path));
}

void assign(std::span<const Parameter> params, const TensorMap &source) {
  if (source.size() != params.size())
    throw ContractError("checkpoint has " + std::to_string(source.size()) +
                        " tensors, model expects " +
                        std::to_string(params.size()));
  for (const auto &p : params) {
    auto it = source.find(p.name);
    if (it == source.end())
      throw ContractError("checkpoint is missing '" + p.name + "'");
    if (it->second.shape() != p.tensor.shape())
      throw DimensionError("checkpoint shape " +
                           shape_str(it->second.shape()) + " for '" + p.name +
                           "' does not match " + shape_str(p.tensor.shape()));
    Tensor dst = p.tensor;
    auto src = it->second.data();
    std::copy(src.begin(), src.end(), dst.mutable_data().begin());
  }
}

} // namespace pvl::checkpoint
