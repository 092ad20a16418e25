// Copyright 2026 The PENME Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "penme/binary_io.hpp"
#include "penme/error.hpp"

namespace penme {

// Dense float32 rows keyed by prompt id. Immutable once constructed.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::size_t dim, std::vector<std::string> ids, std::vector<float> values)
      : dim_(dim), ids_(std::move(ids)), values_(std::move(values)) {
    if (dim_ == 0) throw Error(ErrorKind::kDomain, "embedding dim must be positive");
    if (values_.size() != ids_.size() * dim_) {
      throw Error(ErrorKind::kDomain, "embedding payload has " + std::to_string(values_.size()) +
                                          " values, expected " +
                                          std::to_string(ids_.size() * dim_));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw Error(ErrorKind::kDomain, "non-finite value in row '" + ids_[i / dim_] + "'");
      }
    }
    index_.reserve(ids_.size());
    for (std::size_t r = 0; r < ids_.size(); ++r) {
      if (!index_.emplace(ids_[r], r).second) {
        throw Error(ErrorKind::kValidation, "duplicate embedding id '" + ids_[r] + "'");
      }
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& values() const { return values_; }

  bool Contains(const std::string& id) const { return index_.contains(id); }

  std::span<const float> Row(std::size_t r) const {
    return std::span(values_).subspan(r * dim_, dim_);
  }

  std::span<const float> Lookup(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(ErrorKind::kLookup, "no embedding for prompt '" + id + "'");
    return Row(it->second);
  }

  bool operator==(const EmbeddingMatrix& other) const {
    return dim_ == other.dim_ && ids_ == other.ids_ && values_ == other.values_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// "PNME" | u16 1 | u32 dim | u32 count | count*dim f32 | u32 table bytes |
// count x (u16 len, utf-8 id). The table length counts the bytes that follow it.
inline std::vector<std::uint8_t> EncodeEmbeddings(const EmbeddingMatrix& m) {
  ByteWriter w;
  w.Header(kEmbeddingFormat);
  w.U32(static_cast<std::uint32_t>(m.dim()));
  w.U32(static_cast<std::uint32_t>(m.rows()));
  for (float v : m.values()) w.F32(v);
  const std::size_t table_at = w.size();
  w.U32(0);
  for (const auto& id : m.ids()) {
    if (id.size() > UINT16_MAX) throw Error(ErrorKind::kDomain, "embedding id too long");
    w.U16(static_cast<std::uint16_t>(id.size()));
    w.Raw(id);
  }
  w.PatchU32(table_at, static_cast<std::uint32_t>(w.size() - table_at - 4));
  return w.bytes();
}

inline EmbeddingMatrix DecodeEmbeddings(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.Header(kEmbeddingFormat, "embedding dump");
  const std::size_t dim_at = r.offset();
  const std::uint32_t dim = r.U32();
  if (dim == 0) throw FormatError("embedding dim must be positive", dim_at);
  const std::uint32_t count = r.U32();
  const std::size_t payload_at = r.offset();
  if (r.remaining() / 4 / dim < count) {
    throw FormatError("truncated payload: " + std::to_string(count) + " rows of dim " +
                          std::to_string(dim) + " do not fit",
                      payload_at);
  }
  std::vector<float> values(static_cast<std::size_t>(count) * dim);
  for (auto& v : values) {
    const std::size_t at = r.offset();
    v = r.F32();
    if (!std::isfinite(v)) throw FormatError("non-finite embedding value", at);
  }
  const std::size_t table_at = r.offset();
  const std::uint32_t table_bytes = r.U32();
  if (table_bytes != r.remaining()) {
    throw FormatError("id table length " + std::to_string(table_bytes) + " does not match " +
                          std::to_string(r.remaining()) + " remaining bytes",
                      table_at);
  }
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.U16();
    ids.push_back(r.Raw(len, "id"));
  }
  r.ExpectEnd("embedding dump");
  try {
    return EmbeddingMatrix(dim, std::move(ids), std::move(values));
  } catch (const Error& e) {
    throw FormatError(e.what(), table_at);
  }
}

inline EmbeddingMatrix ReadEmbeddings(const std::filesystem::path& path) {
  const auto bytes = ReadFileBytes(path);
  return DecodeEmbeddings(bytes);
}

inline void WriteEmbeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodeEmbeddings(m));
}

// Rows for the given ids, in order, as a new matrix.
inline EmbeddingMatrix Select(const EmbeddingMatrix& m, const std::vector<std::string>& ids) {
  std::vector<float> values;
  values.reserve(ids.size() * m.dim());
  for (const auto& id : ids) {
    auto row = m.Lookup(id);
    values.insert(values.end(), row.begin(), row.end());
  }
  return EmbeddingMatrix(m.dim(), ids, std::move(values));
}

}  // namespace penme
