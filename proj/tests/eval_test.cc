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

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "penme/penme.hpp"
#include "test_support.hpp"

namespace penme {
namespace {

using ::penme::testing::FixedSplit;
using ::penme::testing::MakeRecord;
using ::penme::testing::MatrixOf;

TEST(Summarize, ReproducesReferenceScores) {
  struct Row {
    std::size_t loc, gen;
    double score;
  };
  for (const Row& r : {Row{869, 906, 0.925}, Row{787, 808, 0.865}, Row{847, 875, 0.907}}) {
    const auto rep = Summarize(oracle::MockBreakdown(1000, 1000, r.loc, 1000, r.gen, 1000));
    EXPECT_EQ(rep.edit_success, 1.0);
    EXPECT_DOUBLE_EQ(rep.locality, r.loc / 1000.0);
    EXPECT_DOUBLE_EQ(rep.generalization, r.gen / 1000.0);
    EXPECT_NEAR(rep.score, r.score, 1e-3);
  }
}

TEST(Summarize, RatesAreSuccessFractionsAndScoreIsTheirMean) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t e = 1 + rng.Below(50), n = 1 + rng.Below(50), p = 1 + rng.Below(50);
    const std::size_t eo = rng.Below(e + 1), no = rng.Below(n + 1), po = rng.Below(p + 1);
    const auto rep = Summarize(oracle::MockBreakdown(eo, e, no, n, po, p));
    EXPECT_EQ(rep.edit_success, static_cast<double>(eo) / e);
    EXPECT_EQ(rep.locality, static_cast<double>(no) / n);
    EXPECT_EQ(rep.generalization, static_cast<double>(po) / p);
    EXPECT_NEAR(rep.score, (rep.edit_success + rep.locality + rep.generalization) / 3.0, 1e-12);
    EXPECT_EQ(rep.edit_probes + rep.neighbour_probes + rep.paraphrase_probes, e + n + p);
  }
}

TEST(Summarize, MissingProbeKindIsAnError) {
  EXPECT_THROW(Summarize(oracle::MockBreakdown(1, 1, 0, 0, 1, 1)), Error);
  EXPECT_THROW(Summarize({}), Error);
}

TEST(ProbeSucceeds, Semantics) {
  EXPECT_TRUE(ProbeSucceeds(Role::kParaphrase, true, "a", "a"));
  EXPECT_FALSE(ProbeSucceeds(Role::kParaphrase, true, "b", "a"));
  EXPECT_FALSE(ProbeSucceeds(Role::kParaphrase, false, "a", "a"));
  EXPECT_TRUE(ProbeSucceeds(Role::kNeighbour, false, "a", "a"));
  EXPECT_FALSE(ProbeSucceeds(Role::kNeighbour, true, "b", "a"));
  EXPECT_TRUE(ProbeSucceeds(Role::kEdit, true, "a", "a"));
}

// Identity projector on 2-d inputs, so projected space == raw space.
ProjectorParams Identity2() {
  ProjectorParams p;
  p.w1 = Eigen::MatrixXd::Identity(2, 2);
  p.b1 = Eigen::VectorXd::Zero(2);
  p.w2 = Eigen::MatrixXd::Identity(2, 2);
  p.b2 = Eigen::VectorXd::Zero(2);
  p.activation = Activation::kIdentity;
  p.normalize_input = false;
  return p;
}

// Two edits at (0,0) and (10,0), radius 1. Edit e1 has test neighbours at
// distance 3, 3, 3, and 0.5 from its key; the last one overlaps.
struct HandInstance {
  std::vector<EditRecord> records{MakeRecord("e1", 2, 4), MakeRecord("e2", 2, 0)};
  DatasetSplit split;
  EmbeddingMatrix emb = MatrixOf({{"e1:x", {0, 0}},
                                  {"e1:p0", {0.9f, 0}},
                                  {"e1:p1", {0.2f, 0}},
                                  {"e1:n0", {3, 0}},
                                  {"e1:n1", {0, 3}},
                                  {"e1:n2", {-3, 0}},
                                  {"e1:n3", {0.5f, 0}},
                                  {"e2:x", {10, 0}},
                                  {"e2:p0", {10, 0.9f}},
                                  {"e2:p1", {9.5f, 0}}});
  Codebook cb{{{"e1", {0, 0}, 1.0, "a1"}, {"e2", {10, 0}, 1.0, "a2"}}, {}};
  HandInstance() {
    split.edits = {{"e1", {0}, {1}, {}, {0, 1, 2, 3}}, {"e2", {0}, {1}, {}, {}}};
  }
};

TEST(Evaluate, HandEnumeratedLocality) {
  HandInstance h;
  const auto rep = Evaluate(h.cb, h.records, h.split, h.emb, Identity2());
  EXPECT_EQ(rep.edit_success, 1.0);
  EXPECT_EQ(rep.generalization, 1.0);
  EXPECT_EQ(rep.locality, 0.75);
  EXPECT_NEAR(rep.score, (1.0 + 1.0 + 0.75) / 3.0, 1e-12);
  std::size_t failures = 0;
  for (const auto& p : rep.breakdown) {
    if (!p.success) {
      ++failures;
      EXPECT_EQ(p.probe_id, "e1:n3");
      EXPECT_EQ(p.matched_edit_id, "e1");
      EXPECT_NEAR(p.distance, 0.5, 1e-7);
    }
  }
  EXPECT_EQ(failures, 1u);
}

TEST(Evaluate, PerfectInstance) {
  HandInstance h;
  h.cb = Codebook({{"e1", {0, 0}, 0.45, "a1"}, {"e2", {10, 0}, 1.0, "a2"}}, {});
  const auto rep = Evaluate(h.cb, h.records, h.split, h.emb, Identity2());
  EXPECT_EQ(rep.edit_success, 1.0);
  EXPECT_EQ(rep.locality, 1.0);
  EXPECT_EQ(rep.generalization, 1.0);
  EXPECT_EQ(rep.score, 1.0);
}

TEST(Evaluate, WrongEditHitIsNotGeneralization) {
  HandInstance h;
  // e1's test paraphrase sits inside e2's scope.
  h.emb = MatrixOf({{"e1:x", {0, 0}}, {"e1:p0", {0.9f, 0}}, {"e1:p1", {9.8f, 0}}, {"e1:n0", {3, 0}},
                    {"e1:n1", {0, 3}}, {"e1:n2", {-3, 0}}, {"e1:n3", {0.5f, 0}}, {"e2:x", {10, 0}},
                    {"e2:p0", {10, 0.9f}}, {"e2:p1", {9.5f, 0}}});
  const auto rep = Evaluate(h.cb, h.records, h.split, h.emb, Identity2());
  EXPECT_EQ(rep.generalization, 0.5);
}

TEST(Evaluate, ProbesAreTestOnly) {
  const auto data = MakeSynthetic({.n_edits = 8, .dim = 12, .seed = 2});
  const auto split = SplitDataset(data.records, 2);
  const auto params = InitProjector(DefaultShape(12), 2);
  const auto cb = BuildCodebook(data.records, split, data.embeddings, params, {});
  const auto rep = Evaluate(cb, data.records, split, data.embeddings, params);
  std::set<std::string> train;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    for (auto j : split.edits[i].train_paraphrases) train.insert(ParaphraseId(data.records[i].id, j));
    for (auto j : split.edits[i].train_neighbours) train.insert(NeighbourId(data.records[i].id, j));
  }
  std::size_t expected = data.records.size();
  for (const auto& es : split.edits) expected += es.test_paraphrases.size() + es.test_neighbours.size();
  EXPECT_EQ(rep.breakdown.size(), expected);
  for (const auto& p : rep.breakdown) EXPECT_FALSE(train.count(p.probe_id)) << p.probe_id;
  EXPECT_EQ(rep.edit_success, 1.0);
}

TEST(Evaluate, MissingEmbeddingsAreListed) {
  HandInstance h;
  const auto partial = Select(h.emb, {"e1:x", "e1:p0", "e1:p1", "e1:n0", "e1:n1", "e2:x", "e2:p0"});
  try {
    Evaluate(h.cb, h.records, h.split, partial, Identity2());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLookup);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("e1:n2"), std::string::npos);
    EXPECT_NE(msg.find("e1:n3"), std::string::npos);
    EXPECT_NE(msg.find("e2:p1"), std::string::npos);
  }
}

TEST(Evaluate, CodebookWithoutTheEditIsLookupError) {
  HandInstance h;
  const Codebook only_e1({{"e1", {0, 0}, 1.0, "a1"}}, {});
  EXPECT_THROW(Evaluate(only_e1, h.records, h.split, h.emb, Identity2()), Error);
}

TEST(Evaluate, ReportJsonRoundTripsBreakdown) {
  HandInstance h;
  const auto rep = Evaluate(h.cb, h.records, h.split, h.emb, Identity2());
  const auto back = BreakdownFromJson(nlohmann::json::parse(ReportToJson(rep).dump()));
  EXPECT_EQ(back, rep.breakdown);
  EXPECT_THROW(BreakdownFromJson(nlohmann::json{{"breakdown", {{{"probe_id", "x"}}}}}), Error);
  EXPECT_THROW(ParseRole("other"), Error);
}

struct Fixture {
  std::vector<EditRecord> records;
  DatasetSplit split;
  EmbeddingMatrix emb;
  explicit Fixture(std::size_t n, std::uint64_t seed = 1) {
    auto data = MakeSynthetic({.n_edits = n, .dim = 16, .seed = seed});
    records = std::move(data.records);
    emb = std::move(data.embeddings);
    split = SplitDataset(records, seed);
  }
};

TEST(SweepAlpha, TradeOffIsMonotoneInAlpha) {
  Fixture f(12);
  std::vector<double> alphas;
  for (int k = 1; k <= 20; ++k) alphas.push_back(0.01 * k);
  TrainConfig tc;
  tc.max_epochs = 60;
  const auto grid = SweepAlpha(f.records, f.split, f.emb, {}, tc, ThresholdScheme::kMaxParaphrasePlusAlpha, alphas,
                               {0.5, 0.9});
  ASSERT_EQ(grid.size(), 40u);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (grid[k].pair_threshold != grid[k - 1].pair_threshold) continue;
    ASSERT_TRUE(grid[k].report && grid[k - 1].report);
    EXPECT_GE(grid[k].report->generalization, grid[k - 1].report->generalization);
    EXPECT_LE(grid[k].report->locality, grid[k - 1].report->locality);
  }
}

TEST(SweepAlpha, SingleCellEqualsDirectRun) {
  Fixture f(6);
  TrainConfig tc;
  tc.max_epochs = 20;
  PairConfig pc;
  pc.edit_pairing_threshold = 0.3;
  const ThresholdConfig th{ThresholdScheme::kMaxParaphrasePlusAlpha, 0.07};
  const auto grid = SweepAlpha(f.records, f.split, f.emb, pc, tc, th.scheme, {0.07}, {0.3});
  ASSERT_EQ(grid.size(), 1u);
  ASSERT_TRUE(grid[0].report);
  const auto direct = RunEditing(f.records, f.split, f.emb, pc, tc, th);
  EXPECT_EQ(grid[0].report->breakdown, direct.report.breakdown);
  EXPECT_EQ(grid[0].report->score, direct.report.score);
}

TEST(SweepAlpha, FailingCellIsRecordedAndGridContinues) {
  Fixture f(4);
  TrainConfig tc;
  tc.max_epochs = 5;
  const auto grid = SweepAlpha(f.records, f.split, f.emb, {}, tc, ThresholdScheme::kMaxParaphrasePlusAlpha, {0.1, 0.2},
                               {2.0, 0.5});
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_FALSE(grid[0].report);
  EXPECT_FALSE(grid[0].error.empty());
  EXPECT_FALSE(grid[1].report);
  EXPECT_TRUE(grid[2].report);
  EXPECT_TRUE(grid[3].report);
  const auto csv = SweepCsv(grid);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(ScalingRun, SingleFullSizeEqualsDirectRun) {
  Fixture f(10);
  TrainConfig tc;
  tc.max_epochs = 40;
  const auto rows = ScalingRun(f.records, f.split, f.emb, {10}, {}, tc, {});
  ASSERT_EQ(rows.size(), 1u);
  const auto direct = RunEditing(f.records, f.split, f.emb, {}, tc, {});
  EXPECT_EQ(rows[0].report.breakdown, direct.report.breakdown);
  EXPECT_EQ(rows[0].report.edit_success, 1.0);
}

TEST(ScalingRun, EditSuccessAtEverySizeAndArgumentChecks) {
  Fixture f(10);
  TrainConfig tc;
  tc.max_epochs = 20;
  const auto rows = ScalingRun(f.records, f.split, f.emb, {3, 6, 10}, {}, tc, {});
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) EXPECT_EQ(r.report.edit_success, 1.0);
  EXPECT_EQ(rows[1].edits, 6u);
  EXPECT_THROW(ScalingRun(f.records, f.split, f.emb, {11}, {}, tc, {}), Error);
  EXPECT_THROW(ScalingRun(f.records, f.split, f.emb, {0}, {}, tc, {}), Error);
  EXPECT_THROW(ScalingRun(f.records, f.split, f.emb, {5, 5}, {}, tc, {}), Error);
  const auto csv = ScalingCsv(rows);
  EXPECT_EQ(csv.rfind("n,edit_success,locality,generalization,score,seconds\n", 0), 0u);
}

TEST(RunEditing, DeterministicReports) {
  Fixture f(6);
  TrainConfig tc;
  tc.max_epochs = 15;
  const auto a = RunEditing(f.records, f.split, f.emb, {}, tc, {});
  const auto b = RunEditing(f.records, f.split, f.emb, {}, tc, {});
  EXPECT_EQ(a.report.breakdown, b.report.breakdown);
  EXPECT_EQ(a.training.params, b.training.params);
}

}  // namespace
}  // namespace penme
