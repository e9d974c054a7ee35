// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/embedding_io.hpp"

#include <fstream>
#include <iterator>
#include <limits>

#include "byteio.hpp"

namespace lixp {

namespace {

constexpr std::string_view kMagic = "LIXPEMB1";
constexpr std::string_view kLabelMagic = "LBL1";
constexpr std::size_t kU32Max = std::numeric_limits<std::uint32_t>::max();

}  // namespace

Array2 round_to_float32(const Array2& a) {
  Array2 out = a;
  for (double& v : out.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

std::vector<std::uint8_t> encode_embeddings(const Array2& embeddings, const std::vector<int>* labels) {
  if (embeddings.rows() > kU32Max || embeddings.cols() > kU32Max) {
    throw std::invalid_argument("LIXPEMB1: shape " + embeddings.shape_string() +
                                " overflows the u32 header fields");
  }
  if (labels != nullptr && labels->size() != embeddings.rows()) {
    throw std::invalid_argument("LIXPEMB1: " + std::to_string(labels->size()) + " labels for " +
                                std::to_string(embeddings.rows()) + " rows");
  }
  detail::ByteWriter w;
  w.raw(kMagic);
  w.u32(static_cast<std::uint32_t>(embeddings.rows()));
  w.u32(static_cast<std::uint32_t>(embeddings.cols()));
  for (double v : embeddings.data()) w.f32(static_cast<float>(v));
  if (labels != nullptr) {
    w.raw(kLabelMagic);
    w.u32(static_cast<std::uint32_t>(labels->size()));
    for (int l : *labels) w.i32(l);
  }
  return w.take();
}

EmbeddingFile decode_embeddings(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "LIXPEMB1");
  r.expect(kMagic, "magic");
  const std::uint32_t count = r.u32("count");
  const std::uint32_t dim = r.u32("dim");
  const std::size_t payload = static_cast<std::size_t>(count) * dim * 4;
  if (r.remaining() < payload) {
    r.fail("embedding block declares " + std::to_string(count) + "x" + std::to_string(dim) +
           " but only " + std::to_string(r.remaining()) + " bytes follow");
  }
  EmbeddingFile out;
  out.embeddings = Array2(count, dim);
  for (double& v : out.embeddings.data()) v = static_cast<double>(r.f32("embedding"));
  if (r.at_end()) return out;

  r.expect(kLabelMagic, "label block magic");
  const std::uint32_t n_labels = r.u32("label count");
  if (n_labels != count) {
    r.fail("label count " + std::to_string(n_labels) + " does not match embedding count " +
           std::to_string(count));
  }
  r.need(static_cast<std::size_t>(n_labels) * 4, "labels");
  std::vector<int> labels(n_labels);
  for (int& l : labels) l = r.i32("label");
  if (!r.at_end()) r.fail(std::to_string(r.remaining()) + " trailing bytes after label block");
  out.labels = std::move(labels);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

void export_embeddings(const Array2& embeddings, const std::vector<int>* labels, const std::string& path) {
  write_file_bytes(path, encode_embeddings(embeddings, labels));
}

EmbeddingFile import_embeddings(const std::string& path) { return decode_embeddings(read_file_bytes(path)); }

}  // namespace lixp
