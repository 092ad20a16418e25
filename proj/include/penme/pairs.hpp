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

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "penme/domain.hpp"
#include "penme/embeddings.hpp"
#include "penme/error.hpp"
#include "penme/vecmath.hpp"

namespace penme {

struct PairConfig {
  // Edits whose raw-embedding cosine exceeds this are pushed apart.
  double edit_pairing_threshold = 0.7;
  // Cross-edit neighbour negatives per edit, highest cosine first.
  std::uint32_t num_overall_negative = 5;
};

enum class PairLabel : std::uint8_t { kAttract = 0, kRepel = 1 };

struct TrainingPair {
  std::string a;
  std::string b;
  PairLabel label = PairLabel::kAttract;

  bool operator==(const TrainingPair&) const = default;
  auto operator<=>(const TrainingPair&) const = default;
};

inline void ValidatePairConfig(const PairConfig& cfg) {
  if (!(cfg.edit_pairing_threshold >= -1.0 && cfg.edit_pairing_threshold <= 1.0)) {
    throw Error(ErrorKind::kArgument, "edit pairing threshold must lie in [-1, 1]");
  }
}

// Contrastive pair set. Per edit, in this order: own train paraphrases
// (attract), own train neighbours (repel), other edits above the cosine
// threshold (repel), then the top `num_overall_negative` train neighbours of
// other edits by cosine to this edit (repel). Cosines use raw embeddings.
// Ranking ties break on (owning edit id, neighbour index). Repeated
// (a, b, label) triples are dropped after their first occurrence.
inline std::vector<TrainingPair> BuildPairs(const std::vector<EditRecord>& records,
                                            const DatasetSplit& split,
                                            const EmbeddingMatrix& embeddings,
                                            const PairConfig& cfg) {
  ValidatePairConfig(cfg);
  ValidateSplit(records, split);
  const std::size_t n = records.size();

  std::vector<std::string> edit_ids(n);
  std::vector<std::span<const float>> edit_vecs(n);
  for (std::size_t i = 0; i < n; ++i) {
    edit_ids[i] = EditPromptId(records[i].id);
    edit_vecs[i] = embeddings.Lookup(edit_ids[i]);
  }

  struct Candidate {
    std::size_t edit;
    std::size_t index;
    std::string id;
    std::span<const float> vec;
  };
  std::vector<Candidate> train_neighbours;
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j : split.edits[t].train_neighbours) {
      std::string id = NeighbourId(records[t].id, j);
      auto vec = embeddings.Lookup(id);
      train_neighbours.push_back({t, j, std::move(id), vec});
    }
  }

  std::vector<TrainingPair> pairs;
  std::set<std::tuple<std::string, std::string, PairLabel>> seen;
  auto emit = [&](const std::string& a, const std::string& b, PairLabel label) {
    if (seen.emplace(a, b, label).second) pairs.push_back({a, b, label});
  };

  struct Ranked {
    double cos;
    std::size_t candidate;
  };
  std::vector<Ranked> ranked;

  for (std::size_t i = 0; i < n; ++i) {
    const EditSplit& es = split.edits[i];
    for (std::size_t j : es.train_paraphrases) {
      const std::string id = ParaphraseId(records[i].id, j);
      embeddings.Lookup(id);
      emit(edit_ids[i], id, PairLabel::kAttract);
    }
    for (std::size_t j : es.train_neighbours) {
      emit(edit_ids[i], NeighbourId(records[i].id, j), PairLabel::kRepel);
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (t == i) continue;
      if (CosineSimilarity(edit_vecs[i], edit_vecs[t]) > cfg.edit_pairing_threshold) {
        emit(edit_ids[i], edit_ids[t], PairLabel::kRepel);
      }
    }
    if (cfg.num_overall_negative == 0) continue;
    ranked.clear();
    for (std::size_t c = 0; c < train_neighbours.size(); ++c) {
      if (train_neighbours[c].edit == i) continue;
      ranked.push_back({CosineSimilarity(edit_vecs[i], train_neighbours[c].vec), c});
    }
    const std::size_t k = std::min<std::size_t>(cfg.num_overall_negative, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(),
                      [&](const Ranked& x, const Ranked& y) {
                        if (x.cos != y.cos) return x.cos > y.cos;
                        const Candidate& cx = train_neighbours[x.candidate];
                        const Candidate& cy = train_neighbours[y.candidate];
                        const std::string& ex = records[cx.edit].id;
                        const std::string& ey = records[cy.edit].id;
                        if (ex != ey) return ex < ey;
                        return cx.index < cy.index;
                      });
    for (std::size_t r = 0; r < k; ++r) {
      emit(edit_ids[i], train_neighbours[ranked[r].candidate].id, PairLabel::kRepel);
    }
  }
  return pairs;
}

inline std::string SerializePairs(const std::vector<TrainingPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += nlohmann::json{{"a", p.a}, {"b", p.b}, {"label", static_cast<int>(p.label)}}.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<TrainingPair> LoadPairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kArgument, "cannot open pairs file " + path.string());
  std::vector<TrainingPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TrainingPair p;
    int label = -1;
    try {
      const auto j = nlohmann::json::parse(line);
      p.a = j.at("a").get<std::string>();
      p.b = j.at("b").get<std::string>();
      label = j.at("label").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    if (label != 0 && label != 1) throw ParseError("label must be 0 or 1", line_no);
    if (p.a == p.b) throw ParseError("pair joins '" + p.a + "' with itself", line_no);
    p.label = static_cast<PairLabel>(label);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace penme
