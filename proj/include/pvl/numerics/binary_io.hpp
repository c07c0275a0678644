// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pvl/numerics/errors.hpp"

// Little-endian byte buffer helpers shared by the binary file formats.
namespace pvl::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class Writer {
public:
  void bytes(const void *p, std::size_t n) {
    auto *b = static_cast<const std::uint8_t *>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void f64s(std::span<const double> v) { bytes(v.data(), v.size_bytes()); }
  void str(const std::string &s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

  void bytes(void *out, std::size_t n, const char *what) {
    if (remaining() < n)
      throw ParseError(std::string("truncated input reading ") + what, pos_);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char *what) {
    std::uint32_t v;
    bytes(&v, sizeof v, what);
    return v;
  }
  std::string str(const char *what, std::size_t max_len = 1u << 20) {
    const std::size_t at = pos_;
    auto n = u32(what);
    if (n > max_len)
      throw ParseError(std::string("implausible length for ") + what, at);
    std::string s(n, '\0');
    bytes(s.data(), n, what);
    return s;
  }
  void f64s(std::span<double> out, const char *what) {
    bytes(out.data(), out.size_bytes(), what);
  }

private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
/// Reads at most `limit` leading bytes.
std::vector<std::uint8_t> read_file_prefix(const std::filesystem::path &path,
                                           std::size_t limit);
void write_file(const std::filesystem::path &path,
                std::span<const std::uint8_t> bytes);

} // namespace pvl::binio
