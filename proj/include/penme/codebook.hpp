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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "penme/binary_io.hpp"
#include "penme/domain.hpp"
#include "penme/embeddings.hpp"
#include "penme/error.hpp"
#include "penme/projector.hpp"
#include "penme/vecmath.hpp"

namespace penme {

enum class ThresholdScheme : std::uint8_t {
  kMaxParaphrasePlusAlpha = 1,
  kMinNeighbourMinusAlpha = 2,
};

inline const char* SchemeName(ThresholdScheme s) {
  return s == ThresholdScheme::kMaxParaphrasePlusAlpha ? "max-para" : "min-neigh";
}

inline ThresholdScheme ParseScheme(const std::string& name) {
  if (name == "max-para") return ThresholdScheme::kMaxParaphrasePlusAlpha;
  if (name == "min-neigh") return ThresholdScheme::kMinNeighbourMinusAlpha;
  throw Error(ErrorKind::kArgument, "unknown threshold scheme '" + name + "'");
}

struct ThresholdConfig {
  ThresholdScheme scheme = ThresholdScheme::kMaxParaphrasePlusAlpha;
  double alpha = 0.1;
};

// max(paraphrase distances) + alpha, or max(0, min(neighbour distances) - alpha).
inline double ComputeThreshold(const std::string& edit_id, std::span<const double> paraphrase_dists,
                               std::span<const double> neighbour_dists, const ThresholdConfig& cfg) {
  if (!(cfg.alpha >= 0.0)) throw Error(ErrorKind::kArgument, "alpha must be non-negative");
  if (cfg.scheme == ThresholdScheme::kMaxParaphrasePlusAlpha) {
    if (paraphrase_dists.empty()) {
      throw Error(ErrorKind::kConfig, "edit '" + edit_id + "' has no training paraphrase distances");
    }
    return *std::max_element(paraphrase_dists.begin(), paraphrase_dists.end()) + cfg.alpha;
  }
  if (neighbour_dists.empty()) {
    throw Error(ErrorKind::kConfig, "edit '" + edit_id + "' has no training neighbour distances");
  }
  return std::max(0.0, *std::min_element(neighbour_dists.begin(), neighbour_dists.end()) - cfg.alpha);
}

struct CodebookEntry {
  std::string edit_id;
  std::vector<double> key;
  double threshold = 0.0;
  std::string payload;

  bool operator==(const CodebookEntry&) const = default;
};

struct LookupResult {
  bool hit = false;
  std::size_t entry = 0;  // index of the nearest key
  std::string edit_id;     // nearest edit, whether or not it fired
  double distance = 0.0;
  double threshold = 0.0;
};

// Immutable key-value edit memory. Retrieval takes the nearest key and fires
// only when its distance is strictly below that key's own threshold; exact
// distance ties go to the smaller edit id.
class Codebook {
 public:
  Codebook() = default;

  Codebook(std::vector<CodebookEntry> entries, ThresholdConfig cfg) : entries_(std::move(entries)), cfg_(cfg) {
    if (!entries_.empty()) dim_ = entries_.front().key.size();
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.key.size() != dim_ || dim_ == 0) throw Error(ErrorKind::kDomain, "codebook keys have inconsistent dims");
      for (double v : e.key) {
        if (!std::isfinite(v)) throw Error(ErrorKind::kDomain, "non-finite key for '" + e.edit_id + "'");
      }
      if (!(e.threshold >= 0.0) || !std::isfinite(e.threshold)) {
        throw Error(ErrorKind::kDomain, "invalid threshold for '" + e.edit_id + "'");
      }
      if (e.payload.empty()) throw Error(ErrorKind::kDomain, "empty payload for '" + e.edit_id + "'");
      if (!seen.emplace(e.edit_id, i).second) {
        throw Error(ErrorKind::kValidation, "duplicate codebook edit id '" + e.edit_id + "'");
      }
    }
    index_ = std::move(seen);
  }

  const std::vector<CodebookEntry>& entries() const { return entries_; }
  const ThresholdConfig& config() const { return cfg_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return entries_.empty(); }

  const CodebookEntry* Find(const std::string& edit_id) const {
    auto it = index_.find(edit_id);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  LookupResult Lookup(std::span<const double> query) const {
    if (entries_.empty()) throw Error(ErrorKind::kState, "lookup on an empty codebook");
    if (query.size() != dim_) {
      throw Error(ErrorKind::kDomain, "query has dim " + std::to_string(query.size()) + ", codebook keys have " +
                                          std::to_string(dim_));
    }
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const double d = Euclidean(query, std::span<const double>(entries_[i].key));
      if (d < best_d || (d == best_d && entries_[i].edit_id < entries_[best].edit_id)) {
        best = i;
        best_d = d;
      }
    }
    const CodebookEntry& e = entries_[best];
    return {best_d < e.threshold, best, e.edit_id, best_d, e.threshold};
  }

  // Every entry whose own threshold admits the query, nearest first. Only the
  // first of these can fire; the rest show overlapping scopes.
  std::vector<LookupResult> Admitting(std::span<const double> query) const {
    std::vector<LookupResult> out;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const double d = Euclidean(query, std::span<const double>(entries_[i].key));
      if (d < entries_[i].threshold) out.push_back({true, i, entries_[i].edit_id, d, entries_[i].threshold});
    }
    std::sort(out.begin(), out.end(), [](const LookupResult& a, const LookupResult& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.edit_id < b.edit_id;
    });
    return out;
  }

  // New codebook with one more entry (or a replaced one with the same id).
  Codebook With(CodebookEntry entry) const {
    std::vector<CodebookEntry> next = entries_;
    auto it = index_.find(entry.edit_id);
    if (it != index_.end()) {
      next[it->second] = std::move(entry);
    } else {
      next.push_back(std::move(entry));
    }
    return Codebook(std::move(next), cfg_);
  }

  bool operator==(const Codebook& o) const {
    return entries_ == o.entries_ && cfg_.scheme == o.cfg_.scheme && cfg_.alpha == o.cfg_.alpha;
  }

 private:
  std::vector<CodebookEntry> entries_;
  ThresholdConfig cfg_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

inline std::vector<double> ToStd(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Projected vectors for prompt ids, computed on demand and memoized.
class ProjectionCache {
 public:
  ProjectionCache(const ProjectorParams& params, const EmbeddingMatrix& embeddings)
      : params_(params), embeddings_(embeddings) {}

  const std::vector<double>& Get(const std::string& prompt_id) {
    auto it = cache_.find(prompt_id);
    if (it != cache_.end()) return it->second;
    auto row = embeddings_.Lookup(prompt_id);
    return cache_.emplace(prompt_id, ToStd(Project(params_, row))).first->second;
  }

 private:
  const ProjectorParams& params_;
  const EmbeddingMatrix& embeddings_;
  std::unordered_map<std::string, std::vector<double>> cache_;
};

// Projected keys and train-probe distances per edit; thresholds for any
// ThresholdConfig can be derived from this without touching the projector.
struct CodebookGeometry {
  struct Edit {
    std::string edit_id;
    std::vector<double> key;
    std::vector<double> paraphrase_dists;
    std::vector<double> neighbour_dists;
    std::string payload;
  };
  std::vector<Edit> edits;
};

inline CodebookGeometry MeasureGeometry(const std::vector<EditRecord>& records, const DatasetSplit& split,
                                        ProjectionCache& cache) {
  ValidateSplit(records, split);
  CodebookGeometry g;
  g.edits.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const EditRecord& r = records[i];
    CodebookGeometry::Edit e;
    e.edit_id = r.id;
    e.key = cache.Get(EditPromptId(r.id));
    e.payload = r.target_output;
    for (std::size_t j : split.edits[i].train_paraphrases) {
      e.paraphrase_dists.push_back(Euclidean(std::span<const double>(e.key),
                                             std::span<const double>(cache.Get(ParaphraseId(r.id, j)))));
    }
    for (std::size_t j : split.edits[i].train_neighbours) {
      e.neighbour_dists.push_back(Euclidean(std::span<const double>(e.key),
                                            std::span<const double>(cache.Get(NeighbourId(r.id, j)))));
    }
    g.edits.push_back(std::move(e));
  }
  return g;
}

inline Codebook CodebookFromGeometry(const CodebookGeometry& g, const ThresholdConfig& cfg) {
  std::vector<CodebookEntry> entries;
  entries.reserve(g.edits.size());
  for (const auto& e : g.edits) {
    entries.push_back({e.edit_id, e.key, ComputeThreshold(e.edit_id, e.paraphrase_dists, e.neighbour_dists, cfg),
                       e.payload});
  }
  return Codebook(std::move(entries), cfg);
}

// One entry per edit: key = projection of the edit prompt, threshold from the
// projected distances to that edit's train paraphrases and neighbours.
inline Codebook BuildCodebook(const std::vector<EditRecord>& records, const DatasetSplit& split,
                              const EmbeddingMatrix& embeddings, const ProjectorParams& params,
                              const ThresholdConfig& cfg) {
  ProjectionCache cache(params, embeddings);
  return CodebookFromGeometry(MeasureGeometry(records, split, cache), cfg);
}

// "PNME" | u16 0x0301 | u8 scheme | f64 alpha | u32 dim | u32 count |
// count*dim f64 keys | count f64 thresholds | u32 table bytes |
// count x (u16 len, edit id) | count x (u32 len, payload)
inline std::vector<std::uint8_t> EncodeCodebook(const Codebook& cb) {
  ByteWriter w;
  w.Header(kCodebookFormat);
  w.U8(static_cast<std::uint8_t>(cb.config().scheme));
  w.F64(cb.config().alpha);
  w.U32(static_cast<std::uint32_t>(cb.dim()));
  w.U32(static_cast<std::uint32_t>(cb.size()));
  for (const auto& e : cb.entries())
    for (double v : e.key) w.F64(v);
  for (const auto& e : cb.entries()) w.F64(e.threshold);
  const std::size_t table_at = w.size();
  w.U32(0);
  for (const auto& e : cb.entries()) {
    w.U16(static_cast<std::uint16_t>(e.edit_id.size()));
    w.Raw(e.edit_id);
  }
  for (const auto& e : cb.entries()) {
    w.U32(static_cast<std::uint32_t>(e.payload.size()));
    w.Raw(e.payload);
  }
  w.PatchU32(table_at, static_cast<std::uint32_t>(w.size() - table_at - 4));
  return w.bytes();
}

inline Codebook DecodeCodebook(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.Header(kCodebookFormat, "codebook");
  const std::size_t scheme_at = r.offset();
  const std::uint8_t scheme = r.U8();
  if (scheme != 1 && scheme != 2) throw FormatError("unknown threshold scheme", scheme_at);
  ThresholdConfig cfg{static_cast<ThresholdScheme>(scheme), r.F64()};
  const std::size_t dim_at = r.offset();
  const std::uint32_t dim = r.U32();
  const std::uint32_t count = r.U32();
  if (dim == 0) throw FormatError("codebook dim must be positive", dim_at);
  if (r.remaining() / 8 / (static_cast<std::size_t>(dim) + 1) < count) {
    throw FormatError("truncated codebook payload", r.offset());
  }
  std::vector<CodebookEntry> entries(count);
  for (auto& e : entries) {
    e.key.resize(dim);
    for (auto& v : e.key) v = r.F64();
  }
  for (auto& e : entries) e.threshold = r.F64();
  const std::size_t table_at = r.offset();
  if (r.U32() != r.remaining()) throw FormatError("codebook table length mismatch", table_at);
  for (auto& e : entries) e.edit_id = r.Raw(r.U16(), "edit id");
  for (auto& e : entries) e.payload = r.Raw(r.U32(), "payload");
  r.ExpectEnd("codebook");
  try {
    return Codebook(std::move(entries), cfg);
  } catch (const Error& e) {
    throw FormatError(e.what(), table_at);
  }
}

inline Codebook ReadCodebook(const std::filesystem::path& path) { return DecodeCodebook(ReadFileBytes(path)); }

inline void WriteCodebook(const Codebook& cb, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodeCodebook(cb));
}

}  // namespace penme
