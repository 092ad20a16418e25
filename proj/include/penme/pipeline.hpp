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

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "penme/binary_io.hpp"
#include "penme/codebook.hpp"
#include "penme/domain.hpp"
#include "penme/embeddings.hpp"
#include "penme/error.hpp"
#include "penme/eval.hpp"
#include "penme/pairs.hpp"
#include "penme/projector.hpp"

namespace penme {

namespace fs = std::filesystem;

// Artifact names inside a pipeline directory.
inline constexpr const char* kDatasetFile = "dataset.jsonl";
inline constexpr const char* kEmbeddingsFile = "embeddings.emb";
inline constexpr const char* kSplitFile = "split.json";
inline constexpr const char* kPairsFile = "pairs.jsonl";
inline constexpr const char* kProjectorFile = "proj.bin";
inline constexpr const char* kTrainLogFile = "train_log.csv";
inline constexpr const char* kCodebookFile = "codebook.bin";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kManifestFile = "manifest.json";

struct PipelineConfig {
  fs::path dataset;
  fs::path embeddings;
  fs::path out_dir = "penme-out";
  std::uint64_t seed = 0;
  PairConfig pairs;
  TrainConfig train;
  ThresholdConfig threshold;
  bool quiet = false;
};

// Reads a declarative JSON config. Absent keys keep their defaults; the
// training seed follows the global seed unless "train.seed" is given.
inline PipelineConfig ConfigFromJson(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
    if (j.contains("embeddings")) c.embeddings = j.at("embeddings").get<std::string>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    c.seed = j.value("seed", c.seed);
    c.quiet = j.value("quiet", c.quiet);
    c.train.seed = c.seed;
    if (j.contains("pairs")) {
      const auto& p = j.at("pairs");
      c.pairs.edit_pairing_threshold = p.value("edit_threshold", c.pairs.edit_pairing_threshold);
      c.pairs.num_overall_negative = p.value("neg_budget", c.pairs.num_overall_negative);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.margin = t.value("margin", c.train.margin);
      c.train.learning_rate = t.value("lr", c.train.learning_rate);
      c.train.lr_decay = t.value("lr_decay", c.train.lr_decay);
      c.train.max_epochs = t.value("epochs", c.train.max_epochs);
      c.train.batch_size = t.value("batch", c.train.batch_size);
      c.train.patience = t.value("patience", c.train.patience);
      c.train.seed = t.value("seed", c.train.seed);
      c.train.beta1 = t.value("beta1", c.train.beta1);
      c.train.beta2 = t.value("beta2", c.train.beta2);
      c.train.epsilon = t.value("epsilon", c.train.epsilon);
      c.train.hidden = t.value("hidden", c.train.hidden);
      c.train.out_dim = t.value("out_dim", c.train.out_dim);
      c.train.normalize = t.value("normalize", c.train.normalize);
      if (t.contains("activation")) {
        const auto a = t.at("activation").get<std::string>();
        if (a == "relu") {
          c.train.activation = Activation::kRelu;
        } else if (a == "identity") {
          c.train.activation = Activation::kIdentity;
        } else {
          throw Error(ErrorKind::kArgument, "unknown activation '" + a + "'");
        }
      }
    }
    if (j.contains("codebook")) {
      const auto& b = j.at("codebook");
      if (b.contains("scheme")) c.threshold.scheme = ParseScheme(b.at("scheme").get<std::string>());
      c.threshold.alpha = b.value("alpha", c.threshold.alpha);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kArgument, std::string("config: ") + e.what());
  }
  return c;
}

inline PipelineConfig LoadConfig(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kArgument, "cannot open config " + path.string());
  try {
    return ConfigFromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kArgument, "config " + path.string() + ": " + e.what());
  }
}

// manifest.json maps each artifact file name to its content hash and records,
// per stage, the hashes of the inputs it consumed.
class Manifest {
 public:
  explicit Manifest(fs::path dir) : dir_(std::move(dir)) {
    const fs::path path = dir_ / kManifestFile;
    if (fs::exists(path)) {
      std::ifstream in(path);
      try {
        doc_ = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kParse, "manifest: " + std::string(e.what()));
      }
    }
    if (!doc_.is_object()) doc_ = nlohmann::json::object();
    if (!doc_.contains("artifacts")) doc_["artifacts"] = nlohmann::json::object();
    if (!doc_.contains("stages")) doc_["stages"] = nlohmann::json::object();
  }

  // Throws when a file this manifest knows about no longer matches its hash.
  static void Verify(const fs::path& file) {
    const fs::path dir = file.has_parent_path() ? file.parent_path() : fs::path(".");
    if (!fs::exists(dir / kManifestFile)) return;
    Manifest m(dir);
    const std::string name = file.filename().string();
    if (!m.doc_["artifacts"].contains(name)) return;
    const std::string expected = m.doc_["artifacts"][name].get<std::string>();
    const std::string actual = HashFile(file);
    if (expected != actual) {
      throw Error(ErrorKind::kState, "artifact " + file.string() + " has hash " + actual + " but the manifest records " +
                                         expected + "; it was modified or produced by a different run");
    }
  }

  void Record(const std::string& stage, const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
    nlohmann::json in = nlohmann::json::object(), out = nlohmann::json::object();
    for (const auto& p : inputs) in[p.filename().string()] = HashFile(p);
    for (const auto& p : outputs) {
      const std::string h = HashFile(p);
      out[p.filename().string()] = h;
      doc_["artifacts"][p.filename().string()] = h;
    }
    doc_["stages"][stage] = {{"inputs", in}, {"outputs", out}};
    WriteFileText(dir_ / kManifestFile, doc_.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  nlohmann::json doc_;
};

inline fs::path DirOf(const fs::path& file) {
  return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

// Hashes go to the manifest next to the stage's first output.
inline void RecordStage(const std::string& stage, const std::vector<fs::path>& inputs,
                        const std::vector<fs::path>& outputs) {
  Manifest(DirOf(outputs.front())).Record(stage, inputs, outputs);
}

inline void VerifyAll(const std::vector<fs::path>& files) {
  for (const auto& f : files) Manifest::Verify(f);
}

// Every embedding row must name a prompt of the dataset and every prompt must
// have a row.
inline std::vector<PromptRole> ResolveRoles(const std::vector<EditRecord>& records, const EmbeddingMatrix& embeddings) {
  const PromptIndex index(records);
  std::vector<PromptRole> roles;
  roles.reserve(embeddings.rows());
  for (const auto& id : embeddings.ids()) {
    const PromptRole* r = index.Find(id);
    if (!r) throw Error(ErrorKind::kValidation, "embedding row '" + id + "' does not name any dataset prompt");
    roles.push_back(*r);
  }
  if (roles.size() != index.size()) {
    for (std::size_t e = 0; e < records.size(); ++e) {
      std::vector<std::string> ids{EditPromptId(records[e].id)};
      for (std::size_t j = 0; j < records[e].paraphrases.size(); ++j) ids.push_back(ParaphraseId(records[e].id, j));
      for (std::size_t j = 0; j < records[e].neighbours.size(); ++j) ids.push_back(NeighbourId(records[e].id, j));
      for (const auto& id : ids) {
        if (!embeddings.Contains(id)) throw Error(ErrorKind::kValidation, "prompt '" + id + "' has no embedding row");
      }
    }
  }
  return roles;
}

using Logger = std::function<void(const std::string&)>;

inline Logger StderrLogger(bool quiet) {
  if (quiet) return [](const std::string&) {};
  return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

// A pipeline directory after ingest: dataset, embeddings, and split.
struct Workspace {
  std::vector<EditRecord> records;
  EmbeddingMatrix embeddings;
  DatasetSplit split;
};

inline Workspace LoadWorkspace(const fs::path& dir) {
  const fs::path ds = dir / kDatasetFile, emb = dir / kEmbeddingsFile, sp = dir / kSplitFile;
  VerifyAll({ds, emb, sp});
  Workspace ws;
  ws.records = LoadDataset(ds);
  ws.embeddings = ReadEmbeddings(emb);
  std::ifstream in(sp);
  if (!in) throw Error(ErrorKind::kArgument, "cannot open " + sp.string());
  try {
    ws.split = SplitFromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, "split: " + std::string(e.what()));
  }
  ValidateSplit(ws.records, ws.split);
  return ws;
}

// Runs `body`, prefixing any failure with the stage name.
template <typename F>
auto RunStage(const std::string& stage, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.kind(), "stage '" + stage + "' failed: " + e.what());
  }
}

inline Workspace StageIngest(const fs::path& dataset, const fs::path& embeddings, std::uint64_t seed,
                             const fs::path& out_dir, const Logger& log) {
  return RunStage("ingest", [&] {
    Workspace ws;
    ws.records = LoadDataset(dataset);
    ws.embeddings = ReadEmbeddings(embeddings);
    ResolveRoles(ws.records, ws.embeddings);
    const auto collisions = NeighbourCollisions(ws.records);
    if (!collisions.empty()) {
      log("warning: " + std::to_string(collisions.size()) +
          " neighbour prompt(s) appear under more than one edit; kept verbatim (first: \"" + collisions.front() + "\")");
    }
    ws.split = SplitDataset(ws.records, seed);
    fs::create_directories(out_dir);
    WriteFileText(out_dir / kDatasetFile, SerializeDataset(ws.records));
    WriteEmbeddings(ws.embeddings, out_dir / kEmbeddingsFile);
    WriteFileText(out_dir / kSplitFile, SplitToJson(ws.split).dump(1) + "\n");
    RecordStage("ingest", {dataset, embeddings}, {out_dir / kDatasetFile, out_dir / kEmbeddingsFile, out_dir / kSplitFile});
    log("ingest: " + std::to_string(ws.records.size()) + " edits, " + std::to_string(ws.embeddings.rows()) +
        " embedding rows of dim " + std::to_string(ws.embeddings.dim()));
    return ws;
  });
}

inline std::vector<TrainingPair> StageBuildPairs(const fs::path& in_dir, const PairConfig& cfg, const fs::path& out,
                                                 const Logger& log) {
  return RunStage("build-pairs", [&] {
    const Workspace ws = LoadWorkspace(in_dir);
    auto pairs = BuildPairs(ws.records, ws.split, ws.embeddings, cfg);
    WriteFileText(out, SerializePairs(pairs));
    RecordStage("build-pairs", {in_dir / kDatasetFile, in_dir / kEmbeddingsFile, in_dir / kSplitFile}, {out});
    log("build-pairs: " + std::to_string(pairs.size()) + " pairs");
    return pairs;
  });
}

inline TrainResult StageTrain(const fs::path& pairs_path, const fs::path& embeddings_path, const TrainConfig& cfg,
                              const fs::path& out, const Logger& log) {
  return RunStage("train", [&] {
    VerifyAll({pairs_path, embeddings_path});
    const auto pairs = LoadPairs(pairs_path);
    const auto embeddings = ReadEmbeddings(embeddings_path);
    TrainResult result = Train(pairs, embeddings, cfg);
    WriteProjector(result.params, out);
    const fs::path log_path = DirOf(out) / kTrainLogFile;
    WriteFileText(log_path, TrainLogCsv(result.log));
    RecordStage("train", {pairs_path, embeddings_path}, {out, log_path});
    log("train: " + std::to_string(result.log.size()) + " epochs, best epoch " + std::to_string(result.best_epoch) +
        (result.log.empty() ? "" : ", final loss " + std::to_string(result.log.back().mean_loss)));
    return result;
  });
}

inline Codebook StageBuildCodebook(const fs::path& in_dir, const fs::path& proj_path, const ThresholdConfig& cfg,
                                   const fs::path& out, const Logger& log) {
  return RunStage("build-codebook", [&] {
    const Workspace ws = LoadWorkspace(in_dir);
    VerifyAll({proj_path});
    const ProjectorParams params = ReadProjector(proj_path);
    Codebook cb = BuildCodebook(ws.records, ws.split, ws.embeddings, params, cfg);
    WriteCodebook(cb, out);
    RecordStage("build-codebook", {in_dir / kDatasetFile, in_dir / kSplitFile, proj_path}, {out});
    log("build-codebook: " + std::to_string(cb.size()) + " entries, scheme " + SchemeName(cfg.scheme) + ", alpha " +
        std::to_string(cfg.alpha));
    return cb;
  });
}

inline EvalReport StageEval(const fs::path& in_dir, const fs::path& proj_path, const fs::path& codebook_path,
                            const fs::path& out, const Logger& log) {
  return RunStage("eval", [&] {
    const Workspace ws = LoadWorkspace(in_dir);
    VerifyAll({proj_path, codebook_path});
    const ProjectorParams params = ReadProjector(proj_path);
    const Codebook cb = ReadCodebook(codebook_path);
    EvalReport report = Evaluate(cb, ws.records, ws.split, ws.embeddings, params);
    WriteFileText(out, ReportToJson(report).dump(1) + "\n");
    RecordStage("eval", {proj_path, codebook_path}, {out});
    log("eval: ES " + std::to_string(report.edit_success) + ", locality " + std::to_string(report.locality) +
        ", generalization " + std::to_string(report.generalization) + ", score " + std::to_string(report.score));
    return report;
  });
}

// ingest -> build-pairs -> train -> build-codebook -> eval, all artifacts in
// cfg.out_dir. Artifacts of completed stages stay on disk if a later stage fails.
inline EvalReport RunPipeline(const PipelineConfig& cfg) {
  const Logger log = StderrLogger(cfg.quiet);
  const fs::path dir = cfg.out_dir;
  StageIngest(cfg.dataset, cfg.embeddings, cfg.seed, dir, log);
  StageBuildPairs(dir, cfg.pairs, dir / kPairsFile, log);
  StageTrain(dir / kPairsFile, dir / kEmbeddingsFile, cfg.train, dir / kProjectorFile, log);
  StageBuildCodebook(dir, dir / kProjectorFile, cfg.threshold, dir / kCodebookFile, log);
  return StageEval(dir, dir / kProjectorFile, dir / kCodebookFile, dir / kReportFile, log);
}

}  // namespace penme
