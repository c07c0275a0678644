// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pvl/numerics/optim.hpp"

// Binary weight checkpoint:
//   "PVLG" | version u32 | { name_len u32 | name | rank u32 | dims u32[rank]
//                            | float64[numel] } ...
// Records are written in sorted name order; all integers and floats are
// little-endian.
namespace pvl::checkpoint {

inline constexpr char kMagic[4] = {'P', 'V', 'L', 'G'};
inline constexpr std::uint32_t kVersion = 1;

using TensorMap = std::map<std::string, Tensor>;

std::vector<std::uint8_t> encode(std::span<const Parameter> params);
TensorMap decode(std::span<const std::uint8_t> bytes);

void save(const std::filesystem::path &path, std::span<const Parameter> params);
TensorMap load(const std::filesystem::path &path);

/// Copies values from `source` into same-named parameters. Every parameter
/// must be present with a matching shape; extra entries are an error.
void assign(std::span<const Parameter> params, const TensorMap &source);

} // namespace pvl::checkpoint
