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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "penme/domain.hpp"
#include "penme/embeddings.hpp"
#include "penme/error.hpp"
#include "penme/rng.hpp"

namespace penme {

// Synthetic edits whose embeddings mimic lexical dominance. Half of the space
// carries meaning and half carries surface form, mixed by a random rotation.
// Paraphrases move mostly along the surface half at distance
// `paraphrase_radius`; neighbours move mostly along the meaning half at
// distance far - bias * (far - near). With bias = 1 every neighbour is nearer
// than every paraphrase, with bias = 0 every neighbour is farther.
struct SynthConfig {
  std::size_t n_edits = 10;
  std::size_t dim = 16;
  double bias = 1.0;
  std::uint64_t seed = 0;
  std::size_t paraphrases_per_edit = 4;
  std::size_t neighbours_per_edit = 6;
  double center_norm = 8.0;
  double paraphrase_radius = 1.0;
  double neighbour_near = 0.5;
  double neighbour_far = 1.5;
  // Fraction of each displacement that leaks into the other half.
  double leak = 0.02;
  // Number of shared rewording templates; 0 uses all but one surface axis.
  std::size_t style_rank = 4;
};

struct SynthData {
  std::vector<EditRecord> records;
  EmbeddingMatrix embeddings;
};

inline double NeighbourRadius(const SynthConfig& cfg) {
  return cfg.neighbour_far - cfg.bias * (cfg.neighbour_far - cfg.neighbour_near);
}

inline SynthData MakeSynthetic(const SynthConfig& cfg) {
  if (cfg.n_edits < 2) throw Error(ErrorKind::kArgument, "synthetic data needs at least 2 edits");
  if (cfg.dim < 4) throw Error(ErrorKind::kArgument, "synthetic data needs dim >= 4");
  if (!(cfg.bias >= 0.0 && cfg.bias <= 1.0)) throw Error(ErrorKind::kArgument, "bias must lie in [0, 1]");
  if (cfg.paraphrases_per_edit < 1) throw Error(ErrorKind::kArgument, "need at least one paraphrase per edit");
  if (!(cfg.leak >= 0.0 && cfg.leak < 1.0)) throw Error(ErrorKind::kArgument, "leak must lie in [0, 1)");

  Rng rng(cfg.seed);
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  const Eigen::Index meaning = d / 2;
  const Eigen::Index surface = d - meaning;

  Eigen::MatrixXd gaussian(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) gaussian(r, c) = rng.Normal();
  const Eigen::MatrixXd rotation = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian).householderQ();

  auto unit_in = [&](Eigen::Index offset, Eigen::Index len) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    for (Eigen::Index k = 0; k < len; ++k) v(offset + k) = rng.Normal();
    return Eigen::VectorXd(v / v.norm());
  };
  // The surface half holds `rank` rewording-template axes followed by the
  // axes of lexical content. Centers carry no template component, so every
  // paraphrase move is orthogonal to its edit and all paraphrases share one
  // norm; unit normalization then rescales them uniformly.
  const Eigen::Index rank = std::clamp<Eigen::Index>(
      cfg.style_rank == 0 ? surface - 1 : static_cast<Eigen::Index>(cfg.style_rank), 1, surface - 1);
  const Eigen::Index content = surface - rank;
  auto template_axis = [&](std::size_t edit, std::size_t j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    v(meaning + static_cast<Eigen::Index>((edit + j) % static_cast<std::size_t>(rank))) = 1.0;
    return v;
  };
  const double keep = std::sqrt(1.0 - cfg.leak * cfg.leak);
  const double neighbour_radius = NeighbourRadius(cfg);

  SynthData out;
  std::vector<std::string> ids;
  std::vector<float> values;
  auto emit = [&](const std::string& id, const Eigen::VectorXd& v) {
    ids.push_back(id);
    const Eigen::VectorXd rotated = rotation * v;
    for (Eigen::Index k = 0; k < d; ++k) values.push_back(static_cast<float>(rotated(k)));
  };

  static const char* kRelations[] = {"capital", "twin city", "official language", "founder",
                                     "home country", "employer", "birthplace", "headquarters"};
  static const char* kParaphraseFrames[] = {"{s} has a {r} called", "What is the {r} of {s}? It is",
                                            "Speaking of {s}, its {r} is", "{s}'s {r} happens to be",
                                            "People say the {r} for {s} is", "In records, {s} lists its {r} as"};
  auto fill = [](std::string frame, const std::string& s, const std::string& r) {
    for (auto [key, val] : {std::pair<std::string, std::string>{"{s}", s}, {"{r}", r}}) {
      for (auto pos = frame.find(key); pos != std::string::npos; pos = frame.find(key)) frame.replace(pos, key.size(), val);
    }
    return frame;
  };

  for (std::size_t i = 0; i < cfg.n_edits; ++i) {
    EditRecord rec;
    rec.id = "e" + std::to_string(i);
    const std::string subject = "entity" + std::to_string(i);
    const std::string relation = kRelations[i % std::size(kRelations)];
    rec.edit_prompt = "The " + relation + " of " + subject + " is";
    rec.target_output = "answer" + std::to_string(i);

    const Eigen::VectorXd meaning_dir = unit_in(0, meaning);
    const Eigen::VectorXd center =
        cfg.center_norm * (meaning_dir + unit_in(meaning + rank, content)) / std::sqrt(2.0);
    emit(EditPromptId(rec.id), center);
    for (std::size_t j = 0; j < cfg.paraphrases_per_edit; ++j) {
      rec.paraphrases.push_back(fill(kParaphraseFrames[j % std::size(kParaphraseFrames)], subject, relation) +
                                (j >= std::size(kParaphraseFrames) ? " (" + std::to_string(j) + ")" : ""));
      Eigen::VectorXd drift = unit_in(0, meaning);
      drift -= drift.dot(meaning_dir) * meaning_dir;
      drift.normalize();
      const Eigen::VectorXd step = keep * template_axis(i, j) + cfg.leak * drift;
      emit(ParaphraseId(rec.id, j), center + cfg.paraphrase_radius * step);
    }
    for (std::size_t k = 0; k < cfg.neighbours_per_edit; ++k) {
      rec.neighbours.push_back("The " + relation + " of " + subject + "x" + std::to_string(k) + " is");
      const Eigen::VectorXd step = keep * unit_in(0, meaning) + cfg.leak * unit_in(meaning + rank, content);
      emit(NeighbourId(rec.id, k), center + neighbour_radius * step);
    }
    out.records.push_back(std::move(rec));
  }
  out.embeddings = EmbeddingMatrix(cfg.dim, std::move(ids), std::move(values));
  return out;
}

}  // namespace penme
