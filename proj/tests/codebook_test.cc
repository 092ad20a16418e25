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

#include "oracles.hpp"
#include "penme/penme.hpp"
#include "test_support.hpp"

namespace penme {
namespace {

using ::penme::testing::FixedSplit;
using ::penme::testing::MakeRecord;
using ::penme::testing::RandomEmbeddings;
using ::penme::testing::TempDir;

double Threshold(ThresholdScheme s, std::vector<double> para, std::vector<double> neigh, double alpha) {
  return ComputeThreshold("e", std::span<const double>(para), std::span<const double>(neigh), {s, alpha});
}

TEST(ComputeThreshold, HandEvaluatedCases) {
  EXPECT_NEAR(Threshold(ThresholdScheme::kMaxParaphrasePlusAlpha, {0.2, 0.5, 0.3}, {}, 0.1), 0.6, 1e-15);
  EXPECT_NEAR(Threshold(ThresholdScheme::kMinNeighbourMinusAlpha, {}, {0.8, 0.9}, 0.1), 0.7, 1e-15);
  EXPECT_EQ(Threshold(ThresholdScheme::kMinNeighbourMinusAlpha, {}, {0.05}, 0.1), 0.0);
}

TEST(ComputeThreshold, MissingListIsConfigErrorNamingEdit) {
  for (auto scheme : {ThresholdScheme::kMaxParaphrasePlusAlpha, ThresholdScheme::kMinNeighbourMinusAlpha}) {
    try {
      ComputeThreshold("edit-42", {}, {}, {scheme, 0.1});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConfig);
      EXPECT_NE(std::string(e.what()).find("edit-42"), std::string::npos);
    }
  }
  EXPECT_THROW(Threshold(ThresholdScheme::kMaxParaphrasePlusAlpha, {0.1}, {}, -0.1), Error);
}

TEST(ComputeThreshold, SchemeNamesRoundTrip) {
  EXPECT_EQ(ParseScheme("max-para"), ThresholdScheme::kMaxParaphrasePlusAlpha);
  EXPECT_EQ(ParseScheme("min-neigh"), ThresholdScheme::kMinNeighbourMinusAlpha);
  EXPECT_EQ(std::string(SchemeName(ThresholdScheme::kMinNeighbourMinusAlpha)), "min-neigh");
  EXPECT_THROW(ParseScheme("median"), Error);
}

Codebook TwoKeys() {
  return Codebook({{"e1", {0, 0}, 1.0, "one"}, {"e2", {10, 0}, 1.0, "two"}}, {});
}

std::vector<double> V(std::initializer_list<double> v) { return v; }

TEST(Lookup, HandEvaluatedCases) {
  const auto cb = TwoKeys();
  const auto hit = cb.Lookup(V({0.5, 0}));
  EXPECT_TRUE(hit.hit);
  EXPECT_EQ(hit.edit_id, "e1");
  EXPECT_EQ(hit.distance, 0.5);
  EXPECT_EQ(cb.entries()[hit.entry].payload, "one");

  const auto miss = cb.Lookup(V({5, 0}));
  EXPECT_FALSE(miss.hit);
  EXPECT_EQ(miss.distance, 5.0);
  EXPECT_EQ(miss.edit_id, "e1");  // equidistant: smaller edit id

  const auto self = cb.Lookup(V({10, 0}));
  EXPECT_TRUE(self.hit);
  EXPECT_EQ(self.edit_id, "e2");
  EXPECT_EQ(self.distance, 0.0);
}

TEST(Lookup, DistanceEqualToThresholdMisses) {
  const auto cb = TwoKeys();
  EXPECT_FALSE(cb.Lookup(V({1, 0})).hit);
  EXPECT_TRUE(cb.Lookup(V({0.999999, 0})).hit);
  EXPECT_FALSE(cb.Lookup(V({9, 0})).hit);
}

TEST(Lookup, OnlyTheNearestKeyMayFire) {
  // e2's wide threshold admits the query but e1 is nearer and too strict.
  const Codebook cb({{"e1", {0, 0}, 0.1, "a"}, {"e2", {3, 0}, 10.0, "b"}}, {});
  const auto r = cb.Lookup(V({1, 0}));
  EXPECT_FALSE(r.hit);
  EXPECT_EQ(r.edit_id, "e1");
  const auto admitting = cb.Admitting(V({1, 0}));
  ASSERT_EQ(admitting.size(), 1u);
  EXPECT_EQ(admitting[0].edit_id, "e2");
}

TEST(Lookup, Errors) {
  try {
    Codebook().Lookup(V({0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kState);
  }
  EXPECT_THROW(TwoKeys().Lookup(V({0, 0, 0})), Error);
}

TEST(Lookup, MatchesLinearScan) {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.Below(60), dim = 1 + rng.Below(6);
    auto entries = oracle::RandomEntries(rng, n, dim, 2);
    const Codebook cb(entries, {});
    for (int q = 0; q < 20; ++q) {
      std::vector<double> query(dim);
      if (q % 4 == 0) {
        query = entries[rng.Below(n)].key;
      } else {
        for (auto& v : query) v = static_cast<double>(static_cast<int>(rng.Below(5)) - 2) * (q % 2 ? 1.0 : 0.5);
      }
      const auto want = oracle::Scan(entries, query);
      const auto got = cb.Lookup(query);
      ASSERT_EQ(got.hit, want.hit);
      ASSERT_EQ(got.edit_id, want.edit_id);
      ASSERT_EQ(got.distance, want.distance);
    }
  }
}

TEST(Codebook, ConstructorValidates) {
  EXPECT_THROW(Codebook({{"a", {0, 0}, 1, "x"}, {"a", {1, 1}, 1, "y"}}, {}), Error);
  EXPECT_THROW(Codebook({{"a", {0, 0}, -1, "x"}}, {}), Error);
  EXPECT_THROW(Codebook({{"a", {0, 0}, 1, ""}}, {}), Error);
  EXPECT_THROW(Codebook({{"a", {0, NAN}, 1, "x"}}, {}), Error);
  EXPECT_THROW(Codebook({{"a", {0, 0}, 1, "x"}, {"b", {1}, 1, "y"}}, {}), Error);
}

TEST(Codebook, WithReturnsNewValue) {
  const auto cb = TwoKeys();
  const auto more = cb.With({"e3", {20, 0}, 1.0, "three"});
  EXPECT_EQ(cb.size(), 2u);
  EXPECT_EQ(more.size(), 3u);
  EXPECT_TRUE(more.Lookup(V({20, 0.5})).hit);
  const auto replaced = more.With({"e1", {0, 0}, 0.1, "uno"});
  EXPECT_EQ(replaced.size(), 3u);
  EXPECT_FALSE(replaced.Lookup(V({0.5, 0})).hit);
  EXPECT_TRUE(more.Lookup(V({0.5, 0})).hit);
}

struct Built {
  std::vector<EditRecord> records;
  DatasetSplit split;
  EmbeddingMatrix emb;
  ProjectorParams params;
};

Built MakeBuilt(std::uint64_t seed, std::size_t edits = 3) {
  Built b;
  for (std::size_t i = 0; i < edits; ++i) b.records.push_back(MakeRecord("e" + std::to_string(i), 3, 4));
  b.split = FixedSplit(b.records);
  b.emb = RandomEmbeddings(b.records, 6, seed);
  b.params = InitProjector(DefaultShape(6), seed);
  return b;
}

TEST(BuildCodebook, OneEntryPerEditWithOracleKeys) {
  const auto b = MakeBuilt(1);
  const auto cb = BuildCodebook(b.records, b.split, b.emb, b.params, {});
  ASSERT_EQ(cb.size(), 3u);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& e = cb.entries()[i];
    ids.insert(e.edit_id);
    EXPECT_EQ(e.payload, b.records[i].target_output);
    const auto ref = oracle::Forward(b.params, oracle::Row(b.emb, EditPromptId(e.edit_id)), true);
    ASSERT_EQ(e.key.size(), ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(e.key[k], ref[k], 1e-9);
  }
  EXPECT_EQ(ids.size(), 3u);
}

TEST(BuildCodebook, SchemeOneAdmitsEveryTrainParaphrase) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto b = MakeBuilt(seed, 5);
    for (double alpha : {0.01, 0.1}) {
      const auto cb = BuildCodebook(b.records, b.split, b.emb, b.params, {ThresholdScheme::kMaxParaphrasePlusAlpha, alpha});
      for (std::size_t i = 0; i < b.records.size(); ++i) {
        const auto& e = cb.entries()[i];
        for (auto j : b.split.edits[i].train_paraphrases) {
          const auto p = ToStd(Project(b.params, b.emb.Lookup(ParaphraseId(e.edit_id, j))));
          EXPECT_LT(oracle::Dist(e.key, p), e.threshold);
        }
        // Every stored edit retrieves itself at distance 0.
        const auto self = cb.Lookup(e.key);
        EXPECT_TRUE(self.hit);
        EXPECT_EQ(self.edit_id, e.edit_id);
      }
    }
  }
}

TEST(BuildCodebook, AlphaZeroBoundaryParaphraseDoesNotFire) {
  const auto b = MakeBuilt(3);
  const auto cb = BuildCodebook(b.records, b.split, b.emb, b.params, {ThresholdScheme::kMaxParaphrasePlusAlpha, 0.0});
  for (std::size_t i = 0; i < b.records.size(); ++i) {
    const auto& e = cb.entries()[i];
    // The single train paraphrase is the farthest one: exactly on the threshold.
    const auto p = ToStd(Project(b.params, b.emb.Lookup(ParaphraseId(e.edit_id, 0))));
    EXPECT_EQ(Euclidean(std::span<const double>(e.key), std::span<const double>(p)), e.threshold);
    const auto r = Codebook({e}, {}).Lookup(p);
    EXPECT_FALSE(r.hit);
  }
}

TEST(BuildCodebook, LargerAlphaNeverTurnsHitIntoMiss) {
  const auto b = MakeBuilt(4, 6);
  Rng rng(4);
  std::vector<std::vector<double>> queries;
  for (const auto& id : b.emb.ids()) queries.push_back(ToStd(Project(b.params, b.emb.Lookup(id))));
  for (int q = 0; q < 50; ++q) {
    std::vector<double> v(b.params.out_dim());
    for (auto& x : v) x = rng.Normal() * 0.3;
    queries.push_back(v);
  }
  Codebook prev = BuildCodebook(b.records, b.split, b.emb, b.params, {ThresholdScheme::kMaxParaphrasePlusAlpha, 0.0});
  for (double alpha = 0.02; alpha <= 0.5; alpha += 0.02) {
    const auto next = BuildCodebook(b.records, b.split, b.emb, b.params, {ThresholdScheme::kMaxParaphrasePlusAlpha, alpha});
    for (const auto& q : queries) {
      if (prev.Lookup(q).hit) {
        EXPECT_TRUE(next.Lookup(q).hit);
      }
    }
    prev = next;
  }
}

TEST(BuildCodebook, SchemeTwoNeedsTrainNeighbours) {
  auto b = MakeBuilt(5);
  b.records.push_back(MakeRecord("lonely", 2, 1));
  b.split = FixedSplit(b.records);
  b.emb = RandomEmbeddings(b.records, 6, 5);
  try {
    BuildCodebook(b.records, b.split, b.emb, b.params, {ThresholdScheme::kMinNeighbourMinusAlpha, 0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("lonely"), std::string::npos);
  }
}

TEST(CodebookFile, RoundTripsAndRejectsCorruption) {
  TempDir dir;
  const auto b = MakeBuilt(6);
  const auto cb = BuildCodebook(b.records, b.split, b.emb, b.params, {ThresholdScheme::kMinNeighbourMinusAlpha, 0.05});
  WriteCodebook(cb, dir / "c.bin");
  const auto back = ReadCodebook(dir / "c.bin");
  EXPECT_EQ(back, cb);
  EXPECT_EQ(back.config().scheme, ThresholdScheme::kMinNeighbourMinusAlpha);

  auto bytes = EncodeCodebook(cb);
  EXPECT_THROW(DecodeProjector(bytes), FormatError);
  auto scheme = bytes;
  scheme[6] = 9;
  EXPECT_THROW(DecodeCodebook(scheme), FormatError);
  auto cut = bytes;
  cut.resize(bytes.size() - 3);
  EXPECT_THROW(DecodeCodebook(cut), FormatError);
}

}  // namespace
}  // namespace penme
