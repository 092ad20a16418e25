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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "penme/penme.hpp"
#include "test_support.hpp"

namespace penme {
namespace {

using ::penme::testing::MatrixOf;
using ::penme::testing::TempDir;

EmbeddingMatrix RandomMatrix(std::uint64_t seed, std::size_t dim, std::size_t rows) {
  Rng rng(seed);
  std::vector<std::string> ids;
  std::vector<float> values;
  for (std::size_t r = 0; r < rows; ++r) {
    ids.push_back("row" + std::to_string(r) + std::string(rng.Below(5), 'z'));
    for (std::size_t k = 0; k < dim; ++k) values.push_back(static_cast<float>(rng.Normal() * 1e3));
  }
  return EmbeddingMatrix(dim, std::move(ids), std::move(values));
}

void PutU32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

TEST(Embeddings, FileSizeMatchesLayout) {
  TempDir dir;
  const auto m = MatrixOf({{"e1:x", {1, 2, 3, 4}}, {"e1:p0", {5, 6, 7, 8}}});
  WriteEmbeddings(m, dir / "m.emb");
  // magic + version + dim + count, payload, table length, (u16 + id) per row.
  const std::size_t expected = 4 + 2 + 4 + 4 + 2 * 4 * 4 + 4 + (2 + 4) + (2 + 5);
  EXPECT_EQ(std::filesystem::file_size(dir / "m.emb"), expected);
}

TEST(Embeddings, HeaderBytesAreLittleEndian) {
  const auto bytes = EncodeEmbeddings(MatrixOf({{"a", {1.0f, -2.0f, 0.5f}}}));
  ASSERT_GE(bytes.size(), 14u);
  EXPECT_EQ(std::memcmp(bytes.data(), "PNME", 4), 0);
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 3);  // dim
  EXPECT_EQ(bytes[10], 1);  // count
  float first = 0;
  std::memcpy(&first, bytes.data() + 14, 4);
  EXPECT_EQ(first, 1.0f);
}

TEST(Embeddings, RoundTripIsBitwise) {
  TempDir dir;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = RandomMatrix(seed, 1 + seed % 9, seed * 3);
    if (m.rows() == 0) continue;
    WriteEmbeddings(m, dir / "m.emb");
    const auto back = ReadEmbeddings(dir / "m.emb");
    EXPECT_EQ(back, m);
    EXPECT_EQ(std::memcmp(back.values().data(), m.values().data(), m.values().size() * 4), 0);
  }
  const auto special = MatrixOf({{"x", {-0.0f, std::numeric_limits<float>::denorm_min(), 3.4e38f}}});
  const auto back = DecodeEmbeddings(EncodeEmbeddings(special));
  EXPECT_TRUE(std::signbit(back.values()[0]));
  EXPECT_EQ(back.values()[1], std::numeric_limits<float>::denorm_min());
}

TEST(Embeddings, EmptyMatrixRoundTrips) {
  const EmbeddingMatrix m(4, {}, {});
  EXPECT_EQ(DecodeEmbeddings(EncodeEmbeddings(m)), m);
}

TEST(Embeddings, DimZeroIsFormatError) {
  auto bytes = EncodeEmbeddings(MatrixOf({{"a", {1, 2}}}));
  PutU32(bytes, 6, 0);
  try {
    DecodeEmbeddings(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 6u);
  }
}

TEST(Embeddings, BadMagicIsFormatError) {
  auto bytes = EncodeEmbeddings(MatrixOf({{"a", {1, 2}}}));
  bytes[0] = 'X';
  try {
    DecodeEmbeddings(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(Embeddings, WrongVersionIsFormatError) {
  auto bytes = EncodeEmbeddings(MatrixOf({{"a", {1, 2}}}));
  bytes[4] = 2;
  EXPECT_THROW(DecodeEmbeddings(bytes), FormatError);
}

TEST(Embeddings, TruncationIsFormatErrorWithOffset) {
  const auto full = EncodeEmbeddings(MatrixOf({{"a", {1, 2}}, {"b", {3, 4}}}));
  for (std::size_t cut = 0; cut < full.size(); ++cut) {
    std::vector<std::uint8_t> part(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(cut));
    try {
      DecodeEmbeddings(part);
      ADD_FAILURE() << "cut at " << cut << " decoded";
    } catch (const FormatError& e) {
      EXPECT_LE(e.offset(), cut);
    }
  }
  std::vector<std::uint8_t> payload_cut(full.begin(), full.begin() + 14 + 8);
  try {
    DecodeEmbeddings(payload_cut);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 14u);
  }
}

TEST(Embeddings, NonFiniteValueIsFormatErrorAtItsOffset) {
  auto bytes = EncodeEmbeddings(MatrixOf({{"a", {1, 2}}, {"b", {3, 4}}}));
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + 14 + 3 * 4, &nan, 4);
  try {
    DecodeEmbeddings(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 14u + 12u);
  }
  const float inf = std::numeric_limits<float>::infinity();
  std::memcpy(bytes.data() + 14, &inf, 4);
  EXPECT_THROW(DecodeEmbeddings(bytes), FormatError);
}

TEST(Embeddings, TrailingBytesAndDuplicateIdsAreRejected) {
  auto bytes = EncodeEmbeddings(MatrixOf({{"a", {1}}}));
  bytes.push_back(0);
  EXPECT_THROW(DecodeEmbeddings(bytes), FormatError);
  EXPECT_THROW(MatrixOf({{"a", {1}}, {"a", {2}}}), Error);
  auto dup = EncodeEmbeddings(MatrixOf({{"a", {1}}, {"b", {2}}}));
  dup.back() = 'a';
  EXPECT_THROW(DecodeEmbeddings(dup), FormatError);
}

TEST(Embeddings, LookupIsExactAndMissingIdIsLookupError) {
  const auto m = MatrixOf({{"a", {1, 2}}, {"b", {3, 4}}});
  EXPECT_TRUE(m.Contains("b"));
  EXPECT_EQ(m.Lookup("b")[1], 4.0f);
  try {
    m.Lookup("zz");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLookup);
  }
  const auto s = Select(m, {"b"});
  EXPECT_EQ(s.rows(), 1u);
  EXPECT_EQ(s.Row(0)[0], 3.0f);
}

TEST(Embeddings, ConstructorValidates) {
  EXPECT_THROW(EmbeddingMatrix(0, {}, {}), Error);
  EXPECT_THROW(EmbeddingMatrix(2, {"a"}, {1.0f}), Error);
  EXPECT_THROW(EmbeddingMatrix(1, {"a"}, {std::numeric_limits<float>::infinity()}), Error);
}

TEST(BinaryIo, ReaderReportsShortReads) {
  const std::vector<std::uint8_t> bytes{1, 2, 3};
  ByteReader r(bytes);
  EXPECT_EQ(r.U16(), 0x0201);
  try {
    r.U32();
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 2u);
  }
}

TEST(BinaryIo, HashIsContentSensitive) {
  const std::vector<std::uint8_t> a{1, 2, 3}, b{1, 2, 4};
  EXPECT_EQ(Fnv1a64(a), Fnv1a64(a));
  EXPECT_NE(Fnv1a64(a), Fnv1a64(b));
  // FNV-1a 64 of the empty input is its offset basis.
  EXPECT_EQ(Fnv1a64(std::vector<std::uint8_t>{}), 0xcbf29ce484222325ULL);
}

}  // namespace
}  // namespace penme
