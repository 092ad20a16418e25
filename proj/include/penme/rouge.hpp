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
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "penme/domain.hpp"
#include "penme/error.hpp"
#include "penme/eval.hpp"
#include "penme/rng.hpp"

namespace penme {

namespace detail {

// Length in bytes of a Unicode whitespace sequence starting at i, or 0.
inline std::size_t WhitespaceAt(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
  auto byte = [&](std::size_t k) { return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0u; };
  if (c == 0xC2 && (byte(1) == 0x85 || byte(1) == 0xA0)) return 2;
  if (c == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) return 3;  // U+1680
  if (c == 0xE2 && byte(1) == 0x80) {
    const unsigned b = byte(2);
    if ((b >= 0x80 && b <= 0x8A) || b == 0xA8 || b == 0xA9 || b == 0xAF) return 3;
  }
  if (c == 0xE2 && byte(1) == 0x81 && byte(2) == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
  return 0;
}

}  // namespace detail

// Lowercase, split on Unicode whitespace, strip trailing ASCII punctuation,
// drop tokens left empty.
inline std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&]() {
    while (!current.empty() && std::ispunct(static_cast<unsigned char>(current.back()))) current.pop_back();
    if (!current.empty()) tokens.push_back(current);
    current.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    if (const std::size_t ws = detail::WhitespaceAt(text, i)) {
      flush();
      i += ws;
      continue;
    }
    current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
    ++i;
  }
  flush();
  return tokens;
}

enum class RougeVariant { kRouge1, kRouge2, kRougeL };

inline const char* RougeName(RougeVariant v) {
  switch (v) {
    case RougeVariant::kRouge1: return "rouge1";
    case RougeVariant::kRouge2: return "rouge2";
    case RougeVariant::kRougeL: return "rougeL";
  }
  return "?";
}

namespace detail {

inline double F1(double overlap, double cand_total, double ref_total) {
  if (overlap == 0.0) return 0.0;
  const double p = overlap / cand_total;
  const double r = overlap / ref_total;
  return 2.0 * p * r / (p + r);
}

inline std::map<std::vector<std::string>, int> NGramCounts(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<std::vector<std::string>, int> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

inline std::size_t LcsLength(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

// F1 of clipped n-gram overlap (ROUGE-1/2) or of the longest common
// subsequence (ROUGE-L). When neither side is long enough to hold an n-gram,
// the score is 1 for identical sequences and 0 otherwise.
inline double Rouge(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                    RougeVariant variant) {
  if (reference.empty()) throw Error(ErrorKind::kDomain, "rouge: empty reference");
  if (candidate.empty()) return 0.0;
  if (variant == RougeVariant::kRougeL) {
    const auto lcs = static_cast<double>(detail::LcsLength(candidate, reference));
    return detail::F1(lcs, static_cast<double>(candidate.size()), static_cast<double>(reference.size()));
  }
  const std::size_t n = variant == RougeVariant::kRouge1 ? 1 : 2;
  const auto cand = detail::NGramCounts(candidate, n);
  const auto ref = detail::NGramCounts(reference, n);
  if (cand.empty() || ref.empty()) return (cand.empty() && ref.empty() && candidate == reference) ? 1.0 : 0.0;
  double overlap = 0.0, cand_total = 0.0, ref_total = 0.0;
  for (const auto& [gram, c] : cand) {
    cand_total += c;
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  for (const auto& [gram, c] : ref) ref_total += c;
  return detail::F1(overlap, cand_total, ref_total);
}

inline double Rouge(std::string_view candidate, std::string_view reference, RougeVariant variant) {
  return Rouge(Tokenize(candidate), Tokenize(reference), variant);
}

struct Interval {
  double point = 0.0;
  double low = 0.0;
  double high = 0.0;
};

// Linear-interpolated quantile of sorted data.
inline double Quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Percentile bootstrap of the mean.
inline Interval BootstrapMean(const std::vector<double>& values, std::size_t resamples, double low_q, double high_q,
                              std::uint64_t seed) {
  if (values.empty()) throw Error(ErrorKind::kArgument, "bootstrap of an empty sample");
  if (resamples == 0) throw Error(ErrorKind::kArgument, "bootstrap needs at least one resample");
  if (!(0.0 <= low_q && low_q <= high_q && high_q <= 1.0)) throw Error(ErrorKind::kArgument, "bad CI quantiles");
  Interval out;
  double total = 0.0;
  for (double v : values) total += v;
  out.point = total / static_cast<double>(values.size());
  if (values.size() == 1) {
    out.low = out.high = out.point;
    return out;
  }
  Rng rng(seed);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) s += values[rng.Below(values.size())];
    m = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  out.low = Quantile(means, low_q);
  out.high = Quantile(means, high_q);
  return out;
}

enum class Scenario {
  kGeneralizationSuccess,
  kGeneralizationFailurePrediction,
  kGeneralizationFailureGroundTruth,
  kGeneralizationDistanceFailure,
  kLocalitySuccessPrediction,
  kLocalitySuccessGroundTruth,
  kLocalityFailurePrediction,
  kLocalityFailureGroundTruth,
};

inline constexpr Scenario kAllScenarios[] = {
    Scenario::kGeneralizationSuccess,        Scenario::kGeneralizationFailurePrediction,
    Scenario::kGeneralizationFailureGroundTruth, Scenario::kGeneralizationDistanceFailure,
    Scenario::kLocalitySuccessPrediction,    Scenario::kLocalitySuccessGroundTruth,
    Scenario::kLocalityFailurePrediction,    Scenario::kLocalityFailureGroundTruth,
};

inline const char* ScenarioName(Scenario s) {
  switch (s) {
    case Scenario::kGeneralizationSuccess: return "generalization_success";
    case Scenario::kGeneralizationFailurePrediction: return "generalization_failure_prediction";
    case Scenario::kGeneralizationFailureGroundTruth: return "generalization_failure_ground_truth";
    case Scenario::kGeneralizationDistanceFailure: return "generalization_distance_failure";
    case Scenario::kLocalitySuccessPrediction: return "locality_success_prediction";
    case Scenario::kLocalitySuccessGroundTruth: return "locality_success_ground_truth";
    case Scenario::kLocalityFailurePrediction: return "locality_failure_prediction";
    case Scenario::kLocalityFailureGroundTruth: return "locality_failure_ground_truth";
  }
  return "?";
}

// A probe compared against one edit prompt.
struct BucketItem {
  std::size_t probe = 0;      // index into the breakdown
  std::string reference_edit;
};

// Paraphrase probes: success (vs. owner); wrong-edit failures, once against the
// matched edit and once against the owner; failures where the owner was
// nearest but outside its threshold (vs. owner). Neighbour probes: successes
// and misfires, each against the nearest edit and against the owner.
inline std::map<Scenario, std::vector<BucketItem>> AssignScenarios(const std::vector<ProbeOutcome>& breakdown) {
  std::map<Scenario, std::vector<BucketItem>> buckets;
  for (Scenario s : kAllScenarios) buckets[s];
  for (std::size_t i = 0; i < breakdown.size(); ++i) {
    const ProbeOutcome& p = breakdown[i];
    if (p.kind == Role::kParaphrase) {
      if (p.success) {
        buckets[Scenario::kGeneralizationSuccess].push_back({i, p.edit_id});
      } else if (p.matched_edit_id != p.edit_id) {
        buckets[Scenario::kGeneralizationFailurePrediction].push_back({i, p.matched_edit_id});
        buckets[Scenario::kGeneralizationFailureGroundTruth].push_back({i, p.edit_id});
      } else {
        buckets[Scenario::kGeneralizationDistanceFailure].push_back({i, p.edit_id});
      }
    } else if (p.kind == Role::kNeighbour) {
      const Scenario pred = p.hit ? Scenario::kLocalityFailurePrediction : Scenario::kLocalitySuccessPrediction;
      const Scenario truth = p.hit ? Scenario::kLocalityFailureGroundTruth : Scenario::kLocalitySuccessGroundTruth;
      buckets[pred].push_back({i, p.matched_edit_id});
      buckets[truth].push_back({i, p.edit_id});
    }
  }
  return buckets;
}

struct BootstrapConfig {
  std::size_t resamples = 1000;
  double ci_low = 0.025;
  double ci_high = 0.975;
  std::uint64_t seed = 0;
};

struct ScenarioRow {
  Scenario scenario = Scenario::kGeneralizationSuccess;
  std::size_t count = 0;
  Interval scores[3];  // rouge1, rouge2, rougeL; meaningful only when count > 0
};

inline std::vector<ScenarioRow> ErrorReport(const std::vector<ProbeOutcome>& breakdown,
                                            const std::vector<EditRecord>& records, const BootstrapConfig& cfg) {
  const PromptIndex index(records);
  std::unordered_map<std::string, std::size_t> edit_pos;
  for (std::size_t i = 0; i < records.size(); ++i) edit_pos.emplace(records[i].id, i);
  auto probe_text = [&](const std::string& prompt_id) -> const std::string& {
    const PromptRole* role = index.Find(prompt_id);
    if (!role) throw Error(ErrorKind::kLookup, "breakdown probe '" + prompt_id + "' is not in the dataset");
    return PromptText(records, *role);
  };
  auto edit_text = [&](const std::string& edit_id) -> const std::string& {
    auto it = edit_pos.find(edit_id);
    if (it == edit_pos.end()) throw Error(ErrorKind::kLookup, "breakdown edit '" + edit_id + "' is not in the dataset");
    return records[it->second].edit_prompt;
  };

  std::vector<ScenarioRow> rows;
  const auto buckets = AssignScenarios(breakdown);
  const RougeVariant variants[3] = {RougeVariant::kRouge1, RougeVariant::kRouge2, RougeVariant::kRougeL};
  for (Scenario s : kAllScenarios) {
    const auto& items = buckets.at(s);
    ScenarioRow row;
    row.scenario = s;
    row.count = items.size();
    if (!items.empty()) {
      for (int v = 0; v < 3; ++v) {
        std::vector<double> scores;
        scores.reserve(items.size());
        for (const auto& item : items) {
          scores.push_back(Rouge(probe_text(breakdown[item.probe].probe_id), edit_text(item.reference_edit), variants[v]));
        }
        const std::uint64_t stream = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(s) * 3 + v + 1));
        row.scores[v] = BootstrapMean(scores, cfg.resamples, cfg.ci_low, cfg.ci_high, stream);
      }
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string ErrorReportCsv(const std::vector<ScenarioRow>& rows) {
  std::ostringstream out;
  out.precision(6);
  out << "scenario,count";
  for (const char* v : {"rouge1", "rouge2", "rougeL"}) out << ',' << v << ',' << v << "_ci_low," << v << "_ci_high";
  out << '\n';
  for (const auto& r : rows) {
    out << ScenarioName(r.scenario) << ',' << r.count;
    for (const auto& iv : r.scores) {
      if (r.count == 0) {
        out << ",,,";
      } else {
        out << ',' << iv.point << ',' << iv.low << ',' << iv.high;
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace penme
