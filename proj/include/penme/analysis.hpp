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
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "penme/codebook.hpp"
#include "penme/domain.hpp"
#include "penme/embeddings.hpp"
#include "penme/error.hpp"
#include "penme/projector.hpp"
#include "penme/vecmath.hpp"

namespace penme {

// Prompt ids of one (edit, paraphrase, neighbour) comparison.
struct TripletIds {
  std::string edit;
  std::string paraphrase;
  std::string neighbour;
};

struct VectorTriplet {
  std::vector<double> edit;
  std::vector<double> paraphrase;
  std::vector<double> neighbour;
};

struct DominanceReport {
  double percentage = 0.0;  // share of triplets with the neighbour strictly closer, in [0, 100]
  std::size_t closer = 0;
  std::size_t count = 0;
};

inline DominanceReport Dominance(std::span<const VectorTriplet> triplets) {
  if (triplets.empty()) throw Error(ErrorKind::kArgument, "dominance: no triplets");
  DominanceReport r;
  r.count = triplets.size();
  for (const auto& t : triplets) {
    const double to_para = Euclidean(std::span<const double>(t.edit), std::span<const double>(t.paraphrase));
    const double to_neigh = Euclidean(std::span<const double>(t.edit), std::span<const double>(t.neighbour));
    if (to_para > to_neigh) ++r.closer;
  }
  r.percentage = 100.0 * static_cast<double>(r.closer) / static_cast<double>(r.count);
  return r;
}

// Every paraphrase crossed with every neighbour of the same edit.
inline std::vector<TripletIds> AllTriplets(const std::vector<EditRecord>& records) {
  std::vector<TripletIds> out;
  for (const auto& r : records) {
    for (std::size_t p = 0; p < r.paraphrases.size(); ++p) {
      for (std::size_t n = 0; n < r.neighbours.size(); ++n) {
        out.push_back({EditPromptId(r.id), ParaphraseId(r.id, p), NeighbourId(r.id, n)});
      }
    }
  }
  return out;
}

// Raw rows, or their projections when params are given.
inline std::vector<VectorTriplet> ResolveTriplets(const std::vector<TripletIds>& ids,
                                                  const EmbeddingMatrix& embeddings,
                                                  const ProjectorParams* params = nullptr) {
  auto fetch = [&](const std::string& id) {
    auto row = embeddings.Lookup(id);
    if (params) return ToStd(Project(*params, row));
    return std::vector<double>(row.begin(), row.end());
  };
  std::vector<VectorTriplet> out;
  out.reserve(ids.size());
  for (const auto& t : ids) out.push_back({fetch(t.edit), fetch(t.paraphrase), fetch(t.neighbour)});
  return out;
}

inline std::vector<TripletIds> LoadTriplets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kArgument, "cannot open triplets file " + path.string());
  std::vector<TripletIds> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("edit").get<std::string>(), j.at("paraphrase").get<std::string>(),
                     j.at("neighbour").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

inline std::string SerializeTriplets(const std::vector<TripletIds>& triplets) {
  std::string out;
  for (const auto& t : triplets) {
    out += nlohmann::json{{"edit", t.edit}, {"paraphrase", t.paraphrase}, {"neighbour", t.neighbour}}.dump();
    out += '\n';
  }
  return out;
}

// Avg/min/max of a sample; NaN fields when the sample is empty.
struct Summary {
  double avg = std::numeric_limits<double>::quiet_NaN();
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;
};

inline Summary SummarizeSample(std::span<const double> xs) {
  Summary s;
  if (xs.empty()) return s;
  double total = 0.0;
  s.min = xs[0];
  s.max = xs[0];
  for (double x : xs) {
    total += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.count = xs.size();
  s.avg = total / static_cast<double>(xs.size());
  // Rounding in the mean must not push it outside [min, max].
  s.avg = std::clamp(s.avg, s.min, s.max);
  return s;
}

struct SplitDistanceStats {
  Summary paraphrase;  // PD
  Summary neighbour;   // ND
  Summary closest_neighbour_minus_farthest_paraphrase;  // CPFN, per edit
};

// Distance families for train, test, and their union, plus per-edit
// (test mean - train mean) shifts for paraphrases (DTTP) and neighbours (DTTN).
struct DistanceStats {
  SplitDistanceStats train;
  SplitDistanceStats test;
  SplitDistanceStats all;
  Summary paraphrase_shift;
  Summary neighbour_shift;
  std::size_t skipped_edits = 0;  // edits missing a probe family somewhere
  bool projected = false;
};

inline DistanceStats ComputeDistanceStats(const std::vector<EditRecord>& records, const DatasetSplit& split,
                                          const EmbeddingMatrix& embeddings,
                                          const ProjectorParams* params = nullptr) {
  ValidateSplit(records, split);
  auto fetch = [&](const std::string& id) {
    auto row = embeddings.Lookup(id);
    if (params) return ToStd(Project(*params, row));
    return std::vector<double>(row.begin(), row.end());
  };
  struct Pools {
    std::vector<double> pd, nd, cpfn;
  };
  Pools train, test, all;
  std::vector<double> dttp, dttn;
  DistanceStats stats;
  stats.projected = params != nullptr;

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto add_cpfn = [](Pools& pool, const std::vector<double>& pd, const std::vector<double>& nd) {
    if (pd.empty() || nd.empty()) return false;
    pool.cpfn.push_back(*std::min_element(nd.begin(), nd.end()) - *std::max_element(pd.begin(), pd.end()));
    return true;
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    const EditRecord& r = records[i];
    const EditSplit& es = split.edits[i];
    const std::vector<double> x = fetch(EditPromptId(r.id));
    auto dist = [&](const std::string& id) {
      const auto v = fetch(id);
      return Euclidean(std::span<const double>(x), std::span<const double>(v));
    };
    std::vector<double> tr_p, te_p, tr_n, te_n;
    for (auto j : es.train_paraphrases) tr_p.push_back(dist(ParaphraseId(r.id, j)));
    for (auto j : es.test_paraphrases) te_p.push_back(dist(ParaphraseId(r.id, j)));
    for (auto j : es.train_neighbours) tr_n.push_back(dist(NeighbourId(r.id, j)));
    for (auto j : es.test_neighbours) te_n.push_back(dist(NeighbourId(r.id, j)));

    train.pd.insert(train.pd.end(), tr_p.begin(), tr_p.end());
    train.nd.insert(train.nd.end(), tr_n.begin(), tr_n.end());
    test.pd.insert(test.pd.end(), te_p.begin(), te_p.end());
    test.nd.insert(test.nd.end(), te_n.begin(), te_n.end());
    all.pd.insert(all.pd.end(), tr_p.begin(), tr_p.end());
    all.pd.insert(all.pd.end(), te_p.begin(), te_p.end());
    all.nd.insert(all.nd.end(), tr_n.begin(), tr_n.end());
    all.nd.insert(all.nd.end(), te_n.begin(), te_n.end());

    bool complete = add_cpfn(train, tr_p, tr_n);
    complete = add_cpfn(test, te_p, te_n) && complete;
    std::vector<double> all_p = tr_p, all_n = tr_n;
    all_p.insert(all_p.end(), te_p.begin(), te_p.end());
    all_n.insert(all_n.end(), te_n.begin(), te_n.end());
    add_cpfn(all, all_p, all_n);

    if (!tr_p.empty() && !te_p.empty()) {
      dttp.push_back(mean(te_p) - mean(tr_p));
    } else {
      complete = false;
    }
    if (!tr_n.empty() && !te_n.empty()) {
      dttn.push_back(mean(te_n) - mean(tr_n));
    } else {
      complete = false;
    }
    if (!complete) ++stats.skipped_edits;
  }

  auto fill = [](SplitDistanceStats& out, const Pools& pool) {
    out.paraphrase = SummarizeSample(std::span<const double>(pool.pd));
    out.neighbour = SummarizeSample(std::span<const double>(pool.nd));
    out.closest_neighbour_minus_farthest_paraphrase = SummarizeSample(std::span<const double>(pool.cpfn));
  };
  fill(stats.train, train);
  fill(stats.test, test);
  fill(stats.all, all);
  stats.paraphrase_shift = SummarizeSample(std::span<const double>(dttp));
  stats.neighbour_shift = SummarizeSample(std::span<const double>(dttn));
  return stats;
}

inline nlohmann::json DistanceStatsToJson(const DistanceStats& s) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  auto split = [&](const SplitDistanceStats& x) {
    return nlohmann::json{{"AvgPD", num(x.paraphrase.avg)},
                          {"MinPD", num(x.paraphrase.min)},
                          {"MaxPD", num(x.paraphrase.max)},
                          {"AvgND", num(x.neighbour.avg)},
                          {"MinND", num(x.neighbour.min)},
                          {"MaxND", num(x.neighbour.max)},
                          {"AvgCPFN", num(x.closest_neighbour_minus_farthest_paraphrase.avg)}};
  };
  return nlohmann::json{{"space", s.projected ? "projected" : "raw"},
                        {"train", split(s.train)},
                        {"test", split(s.test)},
                        {"all", split(s.all)},
                        {"AvgDTTP", num(s.paraphrase_shift.avg)},
                        {"MaxDTTP", num(s.paraphrase_shift.max)},
                        {"MinDTTP", num(s.paraphrase_shift.min)},
                        {"AvgDTTN", num(s.neighbour_shift.avg)},
                        {"MaxDTTN", num(s.neighbour_shift.max)},
                        {"MinDTTN", num(s.neighbour_shift.min)},
                        {"skipped_edits", s.skipped_edits}};
}

}  // namespace penme
