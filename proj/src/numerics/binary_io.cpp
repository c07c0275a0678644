// SPDX-License-Identifier: Apache-2.0
#include "pvl/numerics/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace pvl::binio {

std::vector<std::uint8_t> read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> read_file_prefix(const std::filesystem::path &path,
                                           std::size_t limit) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> buf(limit);
  in.read(reinterpret_cast<char *>(buf.data()),
          static_cast<std::streamsize>(limit));
  buf.resize(static_cast<std::size_t>(in.gcount()));
  return buf;
}

void write_file(const std::filesystem::path &path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw std::runtime_error("write failed for " + path.string());
}

} // namespace pvl::binio
