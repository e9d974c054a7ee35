// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/checkpoint.hpp"

#include <limits>

#include "byteio.hpp"
#include "lixp/embedding_io.hpp"

namespace lixp {

namespace {

constexpr std::string_view kMagic = "LIXPCKPT";

std::uint32_t checked_u32(std::size_t v, const std::string& what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError("LIXPCKPT: " + what + " " + std::to_string(v) + " does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParameterStore& store) {
  detail::ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(checked_u32(store.size(), "parameter count"));
  for (const auto& e : store.entries()) {
    w.u32(checked_u32(e.name.size(), "name length"));
    w.raw(e.name);
    w.u32(checked_u32(e.value.rows(), "rows of " + e.name));
    w.u32(checked_u32(e.value.cols(), "cols of " + e.name));
    for (double v : e.value.data()) w.f64(v);
  }
  return w.take();
}

ParameterStore decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "LIXPCKPT");
  r.expect(kMagic, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32("parameter count");
  ParameterStore store;
  for (std::uint32_t p = 0; p < count; ++p) {
    const std::uint32_t len = r.u32("name length");
    std::string name = r.raw(len, "parameter name");
    const std::uint32_t rows = r.u32("rows");
    const std::uint32_t cols = r.u32("cols");
    const std::uint64_t n = std::uint64_t{rows} * cols;
    if (n > r.remaining() / 8) {
      r.fail("payload of '" + name + "' (" + std::to_string(rows) + "x" + std::to_string(cols) +
             ") exceeds the remaining " + std::to_string(r.remaining()) + " bytes");
    }
    Array2 value(rows, cols);
    for (double& v : value.data()) v = r.f64("payload");
    if (store.contains(name)) r.fail("duplicate parameter '" + name + "'");
    store.add(std::move(name), std::move(value));
  }
  if (!r.at_end()) r.fail(std::to_string(r.remaining()) + " trailing bytes");
  return store;
}

void save_checkpoint(const ParameterStore& store, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(store));
}

ParameterStore load_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace lixp
