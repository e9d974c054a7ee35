// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lixp/array.hpp"

namespace lixp {

/// Malformed or truncated binary file. The message says what was expected.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// LIXPEMB1, little-endian:
///   "LIXPEMB1" | u32 count | u32 dim | count*dim f32 row-major
///   optional: "LBL1" | u32 count | count i32 labels
/// Embeddings are rounded to float32 on write; that cast is the only loss.
struct EmbeddingFile {
  Array2 embeddings;
  std::optional<std::vector<int>> labels;
};

inline constexpr std::size_t kEmbeddingHeaderBytes = 16;

/// Serialized size for a count x dim matrix, with or without labels.
constexpr std::size_t embedding_file_size(std::size_t count, std::size_t dim, bool with_labels) {
  return kEmbeddingHeaderBytes + count * dim * 4 + (with_labels ? 8 + count * 4 : 0);
}

std::vector<std::uint8_t> encode_embeddings(const Array2& embeddings, const std::vector<int>* labels);
EmbeddingFile decode_embeddings(const std::vector<std::uint8_t>& bytes);

/// Writes the LIXPEMB1 file. Throws std::invalid_argument when labels.size()
/// differs from the row count or a dimension exceeds u32, std::runtime_error on I/O failure.
void export_embeddings(const Array2& embeddings, const std::vector<int>* labels, const std::string& path);
EmbeddingFile import_embeddings(const std::string& path);

/// Entrywise round trip through float32, the precision of the file.
Array2 round_to_float32(const Array2& a);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace lixp
