// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lixp/parameters.hpp"

namespace lixp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// LIXPCKPT layout, little-endian:
///   "LIXPCKPT" | u32 version | u32 parameter count |
///   per parameter: u32 name length, name bytes, u32 rows, u32 cols, rows*cols f64.
std::vector<std::uint8_t> encode_checkpoint(const ParameterStore& store);
/// Throws FormatError on bad magic, unknown version, truncation or trailing bytes.
ParameterStore decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ParameterStore& store, const std::string& path);
ParameterStore load_checkpoint(const std::string& path);

}  // namespace lixp
