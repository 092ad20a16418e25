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

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "penme/error.hpp"

namespace penme {

// Artifacts share one framing: the four magic bytes "PNME" followed by a u16
// format code. Code 1 is the embedding dump; projector and codebook files use
// (kind << 8 | version).
inline constexpr char kMagic[4] = {'P', 'N', 'M', 'E'};
inline constexpr std::uint16_t kEmbeddingFormat = 1;
inline constexpr std::uint16_t kProjectorFormat = 0x0201;
inline constexpr std::uint16_t kCodebookFormat = 0x0301;

// Little-endian encoder into an owned byte buffer.
class ByteWriter {
 public:
  void U8(std::uint8_t v) { bytes_.push_back(v); }
  void U16(std::uint16_t v) { PutLe(v, 2); }
  void U32(std::uint32_t v) { PutLe(v, 4); }
  void U64(std::uint64_t v) { PutLe(v, 8); }
  void F32(float v) { U32(std::bit_cast<std::uint32_t>(v)); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void Raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  void Header(std::uint16_t format) {
    Raw(std::string_view(kMagic, 4));
    U16(format);
  }

  std::size_t size() const { return bytes_.size(); }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  // Overwrites a previously written u32 slot.
  void PatchU32(std::size_t offset, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_[offset + i] = static_cast<std::uint8_t>(v >> (8 * i));
  }

 private:
  void PutLe(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  std::vector<std::uint8_t> bytes_;
};

// Little-endian decoder over a borrowed byte span. Every short read raises a
// FormatError carrying the offset where the read started.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t U8() { return static_cast<std::uint8_t>(GetLe(1, "u8")); }
  std::uint16_t U16() { return static_cast<std::uint16_t>(GetLe(2, "u16")); }
  std::uint32_t U32() { return static_cast<std::uint32_t>(GetLe(4, "u32")); }
  std::uint64_t U64() { return GetLe(8, "u64"); }
  float F32() { return std::bit_cast<float>(U32()); }
  double F64() { return std::bit_cast<double>(U64()); }

  std::string Raw(std::size_t n, const char* what) {
    Require(n, what);
    std::string out(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return out;
  }

  void Header(std::uint16_t expected_format, const char* artifact) {
    const std::size_t start = pos_;
    if (Raw(4, "magic") != std::string_view(kMagic, 4)) {
      throw FormatError(std::string("bad magic, not a ") + artifact + " file", start);
    }
    const std::size_t version_at = pos_;
    const std::uint16_t format = U16();
    if (format != expected_format) {
      throw FormatError(std::string("unsupported format code ") + std::to_string(format) +
                            " for " + artifact,
                        version_at);
    }
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void ExpectEnd(const char* artifact) const {
    if (pos_ != bytes_.size()) {
      throw FormatError(std::string("trailing bytes after ") + artifact, pos_);
    }
  }

 private:
  void Require(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated payload reading ") + what, pos_);
    }
  }

  std::uint64_t GetLe(int width, const char* what) {
    Require(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kArgument, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void WriteFileBytes(const std::filesystem::path& path,
                           std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kRuntime, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kRuntime, "short write to " + path.string());
}

inline void WriteFileText(const std::filesystem::path& path, std::string_view text) {
  WriteFileBytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// 64-bit FNV-1a, used for stage content hashes.
inline std::uint64_t Fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string HexDigest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string HashFile(const std::filesystem::path& path) {
  return HexDigest(Fnv1a64(ReadFileBytes(path)));
}

}  // namespace penme
