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

#include <chrono>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "penme/codebook.hpp"
#include "penme/domain.hpp"
#include "penme/embeddings.hpp"
#include "penme/error.hpp"
#include "penme/pairs.hpp"
#include "penme/projector.hpp"

namespace penme {

// One lookup made during evaluation.
struct ProbeOutcome {
  std::string probe_id;
  Role kind = Role::kEdit;
  std::string edit_id;          // ground-truth owner of the probe
  bool hit = false;
  std::string matched_edit_id;  // nearest key, fired or not
  double distance = 0.0;        // to the nearest key
  double threshold = 0.0;       // of the nearest key
  double truth_distance = 0.0;  // to the owner's key
  bool success = false;

  bool operator==(const ProbeOutcome&) const = default;
};

struct EvalReport {
  double edit_success = 0.0;
  double locality = 0.0;
  double generalization = 0.0;
  double score = 0.0;
  std::size_t edit_probes = 0;
  std::size_t paraphrase_probes = 0;
  std::size_t neighbour_probes = 0;
  std::vector<ProbeOutcome> breakdown;
};

// An edit prompt succeeds when it fires its own entry, a paraphrase when it
// fires its owner's entry, and a neighbour when it fires nothing.
inline bool ProbeSucceeds(Role kind, bool hit, const std::string& matched, const std::string& owner) {
  if (kind == Role::kNeighbour) return !hit;
  return hit && matched == owner;
}

// Rates and score from a breakdown; each rate is successes / probes of its kind.
inline EvalReport Summarize(std::vector<ProbeOutcome> breakdown) {
  EvalReport r;
  std::size_t ok[3] = {0, 0, 0};
  std::size_t total[3] = {0, 0, 0};
  for (const auto& p : breakdown) {
    const auto k = static_cast<std::size_t>(p.kind);
    ++total[k];
    if (p.success) ++ok[k];
  }
  const char* names[3] = {"edit", "paraphrase", "neighbour"};
  for (int k = 0; k < 3; ++k) {
    if (total[k] == 0) throw Error(ErrorKind::kArgument, std::string("no ") + names[k] + " probes to evaluate");
  }
  r.edit_probes = total[0];
  r.paraphrase_probes = total[1];
  r.neighbour_probes = total[2];
  r.edit_success = static_cast<double>(ok[0]) / static_cast<double>(total[0]);
  r.generalization = static_cast<double>(ok[1]) / static_cast<double>(total[1]);
  r.locality = static_cast<double>(ok[2]) / static_cast<double>(total[2]);
  r.score = (r.edit_success + r.locality + r.generalization) / 3.0;
  r.breakdown = std::move(breakdown);
  return r;
}

// Probes every edit prompt plus the test paraphrases and test neighbours.
inline EvalReport EvaluateProjected(const Codebook& codebook, const std::vector<EditRecord>& records,
                                    const DatasetSplit& split, ProjectionCache& cache,
                                    const EmbeddingMatrix& embeddings) {
  ValidateSplit(records, split);
  struct Probe {
    std::string id;
    Role kind;
    std::size_t owner;
  };
  std::vector<Probe> probes;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string& id = records[i].id;
    if (!codebook.Find(id)) throw Error(ErrorKind::kLookup, "codebook has no entry for edit '" + id + "'");
    probes.push_back({EditPromptId(id), Role::kEdit, i});
    for (std::size_t j : split.edits[i].test_paraphrases) probes.push_back({ParaphraseId(id, j), Role::kParaphrase, i});
    for (std::size_t j : split.edits[i].test_neighbours) probes.push_back({NeighbourId(id, j), Role::kNeighbour, i});
  }
  std::vector<std::string> missing;
  for (const auto& p : probes) {
    if (!embeddings.Contains(p.id)) missing.push_back(p.id);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t k = 0; k < missing.size() && k < 20; ++k) list += (k ? ", " : "") + missing[k];
    if (missing.size() > 20) list += ", ...";
    throw Error(ErrorKind::kLookup, std::to_string(missing.size()) + " probe(s) lack embeddings: " + list);
  }

  std::vector<ProbeOutcome> breakdown;
  breakdown.reserve(probes.size());
  for (const auto& p : probes) {
    const std::vector<double>& q = cache.Get(p.id);
    const LookupResult res = codebook.Lookup(q);
    const std::string& owner = records[p.owner].id;
    ProbeOutcome o;
    o.probe_id = p.id;
    o.kind = p.kind;
    o.edit_id = owner;
    o.hit = res.hit;
    o.matched_edit_id = res.edit_id;
    o.distance = res.distance;
    o.threshold = res.threshold;
    o.truth_distance = Euclidean(std::span<const double>(q), std::span<const double>(codebook.Find(owner)->key));
    o.success = ProbeSucceeds(p.kind, res.hit, res.edit_id, owner);
    breakdown.push_back(std::move(o));
  }
  return Summarize(std::move(breakdown));
}

inline EvalReport Evaluate(const Codebook& codebook, const std::vector<EditRecord>& records,
                           const DatasetSplit& split, const EmbeddingMatrix& embeddings,
                           const ProjectorParams& params) {
  ProjectionCache cache(params, embeddings);
  return EvaluateProjected(codebook, records, split, cache, embeddings);
}

inline nlohmann::json ReportToJson(const EvalReport& r, bool with_breakdown = true) {
  nlohmann::json j{{"edit_success", r.edit_success},
                   {"locality", r.locality},
                   {"generalization", r.generalization},
                   {"score", r.score},
                   {"counts", {{"edit", r.edit_probes}, {"paraphrase", r.paraphrase_probes}, {"neighbour", r.neighbour_probes}}}};
  if (with_breakdown) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : r.breakdown) {
      rows.push_back({{"probe_id", p.probe_id},
                      {"kind", RoleName(p.kind)},
                      {"edit_id", p.edit_id},
                      {"decision", p.hit ? "hit" : "miss"},
                      {"matched_edit_id", p.matched_edit_id},
                      {"distance", p.distance},
                      {"threshold", p.threshold},
                      {"truth_distance", p.truth_distance},
                      {"success", p.success}});
    }
    j["breakdown"] = std::move(rows);
  }
  return j;
}

inline Role ParseRole(const std::string& s) {
  if (s == "edit") return Role::kEdit;
  if (s == "paraphrase") return Role::kParaphrase;
  if (s == "neighbour") return Role::kNeighbour;
  throw Error(ErrorKind::kParse, "unknown probe kind '" + s + "'");
}

inline std::vector<ProbeOutcome> BreakdownFromJson(const nlohmann::json& j) {
  std::vector<ProbeOutcome> out;
  try {
    for (const auto& row : j.at("breakdown")) {
      ProbeOutcome p;
      p.probe_id = row.at("probe_id").get<std::string>();
      p.kind = ParseRole(row.at("kind").get<std::string>());
      p.edit_id = row.at("edit_id").get<std::string>();
      p.hit = row.at("decision").get<std::string>() == "hit";
      p.matched_edit_id = row.at("matched_edit_id").get<std::string>();
      p.distance = row.at("distance").get<double>();
      p.threshold = row.at("threshold").get<double>();
      p.truth_distance = row.at("truth_distance").get<double>();
      p.success = row.at("success").get<bool>();
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("report breakdown: ") + e.what());
  }
  return out;
}

// Everything one run of pairs -> projector -> codebook -> evaluation produces.
struct EditingRun {
  std::vector<TrainingPair> pairs;
  TrainResult training;
  Codebook codebook;
  EvalReport report;
};

inline EditingRun RunEditing(const std::vector<EditRecord>& records, const DatasetSplit& split,
                             const EmbeddingMatrix& embeddings, const PairConfig& pair_cfg,
                             const TrainConfig& train_cfg, const ThresholdConfig& threshold_cfg) {
  EditingRun run;
  run.pairs = BuildPairs(records, split, embeddings, pair_cfg);
  run.training = Train(run.pairs, embeddings, train_cfg);
  ProjectionCache cache(run.training.params, embeddings);
  run.codebook = CodebookFromGeometry(MeasureGeometry(records, split, cache), threshold_cfg);
  run.report = EvaluateProjected(run.codebook, records, split, cache, embeddings);
  return run;
}

struct SweepCell {
  double pair_threshold = 0.0;
  double alpha = 0.0;
  std::optional<EvalReport> report;
  std::string error;
};

// Retrains once per pairing threshold; alpha only re-derives thresholds from
// the fixed projection. A failing cell records its error and the grid goes on.
inline std::vector<SweepCell> SweepAlpha(const std::vector<EditRecord>& records, const DatasetSplit& split,
                                         const EmbeddingMatrix& embeddings, const PairConfig& pair_cfg,
                                         const TrainConfig& train_cfg, ThresholdScheme scheme,
                                         const std::vector<double>& alphas,
                                         const std::vector<double>& pair_thresholds) {
  std::vector<SweepCell> grid;
  for (double pt : pair_thresholds) {
    PairConfig pc = pair_cfg;
    pc.edit_pairing_threshold = pt;
    std::optional<TrainResult> trained;
    std::string train_error;
    try {
      trained = Train(BuildPairs(records, split, embeddings, pc), embeddings, train_cfg);
    } catch (const Error& e) {
      train_error = e.what();
    }
    std::optional<ProjectionCache> cache;
    std::optional<CodebookGeometry> geometry;
    if (trained) {
      cache.emplace(trained->params, embeddings);
      try {
        geometry = MeasureGeometry(records, split, *cache);
      } catch (const Error& e) {
        train_error = e.what();
      }
    }
    for (double alpha : alphas) {
      SweepCell cell{pt, alpha, std::nullopt, train_error};
      if (geometry) {
        try {
          const Codebook cb = CodebookFromGeometry(*geometry, {scheme, alpha});
          cell.report = EvaluateProjected(cb, records, split, *cache, embeddings);
        } catch (const Error& e) {
          cell.error = e.what();
        }
      }
      grid.push_back(std::move(cell));
    }
  }
  return grid;
}

inline std::string SweepCsv(const std::vector<SweepCell>& grid) {
  std::ostringstream out;
  out.precision(10);
  out << "pair_threshold,alpha,edit_success,locality,generalization,score,error\n";
  for (const auto& c : grid) {
    out << c.pair_threshold << ',' << c.alpha << ',';
    if (c.report) {
      out << c.report->edit_success << ',' << c.report->locality << ',' << c.report->generalization << ','
          << c.report->score << ",\n";
    } else {
      std::string msg = c.error;
      for (auto& ch : msg) {
        if (ch == '"') ch = '\'';
      }
      out << ",,,,\"" << msg << "\"\n";
    }
  }
  return out.str();
}

struct ScalingRow {
  std::size_t edits = 0;
  EvalReport report;
  double seconds = 0.0;
};

// Full rebuild on each deterministic prefix of the dataset.
inline std::vector<ScalingRow> ScalingRun(const std::vector<EditRecord>& records, const DatasetSplit& split,
                                          const EmbeddingMatrix& embeddings, const std::vector<std::size_t>& sizes,
                                          const PairConfig& pair_cfg, const TrainConfig& train_cfg,
                                          const ThresholdConfig& threshold_cfg) {
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] == 0 || sizes[k] > records.size()) {
      throw Error(ErrorKind::kArgument, "size " + std::to_string(sizes[k]) + " is outside 1.." +
                                            std::to_string(records.size()));
    }
    if (k > 0 && sizes[k] <= sizes[k - 1]) throw Error(ErrorKind::kArgument, "sizes must be strictly ascending");
  }
  std::vector<ScalingRow> rows;
  for (std::size_t n : sizes) {
    const auto start = std::chrono::steady_clock::now();
    auto [sub, sub_split] = Prefix(records, split, n);
    EditingRun run = RunEditing(sub, sub_split, embeddings, pair_cfg, train_cfg, threshold_cfg);
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    rows.push_back({n, std::move(run.report), took.count()});
  }
  return rows;
}

inline std::string ScalingCsv(const std::vector<ScalingRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "n,edit_success,locality,generalization,score,seconds\n";
  for (const auto& r : rows) {
    out << r.edits << ',' << r.report.edit_success << ',' << r.report.locality << ',' << r.report.generalization
        << ',' << r.report.score << ',' << r.seconds << '\n';
  }
  return out.str();
}

}  // namespace penme
