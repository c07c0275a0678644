// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pvl {

/// Shape or dimension disagreement between operands.
class DimensionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// NaN or otherwise unusable numeric input.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IndexError : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

/// A caller violated a documented precondition.
class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Invalid user-facing configuration (generator parameters, stream sizes, ...).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed binary or text input. Carries the byte offset where decoding failed.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string &what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

} // namespace pvl
