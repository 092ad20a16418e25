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

// penme command-line front-end.

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "penme/penme.hpp"

namespace {

namespace fs = std::filesystem;
using penme::Error;
using penme::ErrorKind;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::optional<std::string> out_dir;
  bool quiet = false;
};

struct PairFlags {
  std::optional<double> edit_threshold;
  std::optional<std::uint32_t> neg_budget;

  void Add(CLI::App* app) {
    app->add_option("--edit-threshold", edit_threshold, "cosine above which two edits are pushed apart");
    app->add_option("--neg-budget", neg_budget, "cross-edit neighbour negatives per edit");
  }
  void Apply(penme::PairConfig& c) const {
    if (edit_threshold) c.edit_pairing_threshold = *edit_threshold;
    if (neg_budget) c.num_overall_negative = *neg_budget;
  }
};

struct TrainFlags {
  std::optional<double> margin, lr, lr_decay, beta1, beta2, epsilon;
  std::optional<std::uint32_t> epochs, batch, patience;
  std::optional<std::size_t> hidden, out_dim;
  std::optional<std::string> activation;
  bool no_normalize = false;

  void Add(CLI::App* app) {
    app->add_option("--margin", margin, "contrastive margin");
    app->add_option("--lr", lr, "initial Adam learning rate");
    app->add_option("--lr-decay", lr_decay, "inverse-time decay factor per epoch");
    app->add_option("--epochs", epochs, "maximum epochs");
    app->add_option("--batch", batch, "pairs per mini-batch");
    app->add_option("--patience", patience, "epochs without improvement before stopping");
    app->add_option("--beta1", beta1);
    app->add_option("--beta2", beta2);
    app->add_option("--epsilon", epsilon);
    app->add_option("--hidden", hidden, "hidden width (0: input dim)");
    app->add_option("--out-dim", out_dim, "key width (0: max(8, input dim / 4))");
    app->add_option("--activation", activation, "relu or identity")->check(CLI::IsMember({"relu", "identity"}));
    app->add_flag("--no-normalize", no_normalize, "feed raw embeddings instead of unit vectors");
  }
  void Apply(penme::TrainConfig& c) const {
    if (margin) c.margin = *margin;
    if (lr) c.learning_rate = *lr;
    if (lr_decay) c.lr_decay = *lr_decay;
    if (epochs) c.max_epochs = *epochs;
    if (batch) c.batch_size = *batch;
    if (patience) c.patience = *patience;
    if (beta1) c.beta1 = *beta1;
    if (beta2) c.beta2 = *beta2;
    if (epsilon) c.epsilon = *epsilon;
    if (hidden) c.hidden = *hidden;
    if (out_dim) c.out_dim = *out_dim;
    if (activation) c.activation = *activation == "identity" ? penme::Activation::kIdentity : penme::Activation::kRelu;
    if (no_normalize) c.normalize = false;
  }
};

struct CodebookFlags {
  std::optional<std::string> scheme;
  std::optional<double> alpha;

  void Add(CLI::App* app) {
    app->add_option("--scheme", scheme, "max-para or min-neigh")->check(CLI::IsMember({"max-para", "min-neigh"}));
    app->add_option("--alpha", alpha, "threshold offset");
  }
  void Apply(penme::ThresholdConfig& c) const {
    if (scheme) c.scheme = penme::ParseScheme(*scheme);
    if (alpha) c.alpha = *alpha;
  }
};

double ParseDouble(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(ErrorKind::kArgument, "not a number: '" + s + "'");
  return v;
}

std::vector<std::string> SplitOn(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// "a:b:step" (inclusive of b) or a comma list.
std::vector<double> ParseGrid(const std::string& text) {
  const auto parts = SplitOn(text, ':');
  if (parts.size() == 3) {
    const double lo = ParseDouble(parts[0]), hi = ParseDouble(parts[1]), step = ParseDouble(parts[2]);
    if (!(step > 0.0) || hi < lo) throw Error(ErrorKind::kArgument, "bad range '" + text + "'");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back(std::round((lo + static_cast<double>(k) * step) * 1e12) / 1e12);
    return out;
  }
  if (text.find(':') != std::string::npos) throw Error(ErrorKind::kArgument, "bad range '" + text + "'");
  std::vector<double> out;
  for (const auto& p : SplitOn(text, ',')) out.push_back(ParseDouble(p));
  if (out.empty()) throw Error(ErrorKind::kArgument, "empty grid");
  return out;
}

std::vector<std::size_t> ParseSizes(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& p : SplitOn(text, ',')) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
    if (ec != std::errc() || ptr != p.data() + p.size()) throw Error(ErrorKind::kArgument, "bad size '" + p + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorKind::kArgument, "no sizes given");
  return out;
}

// A query given as numbers, or nullopt when it names an embedding row.
std::optional<std::vector<float>> ParseRawVector(const std::string& s) {
  std::vector<float> out;
  for (const auto& p : SplitOn(s, ',')) {
    try {
      out.push_back(static_cast<float>(ParseDouble(p)));
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  if (out.empty()) return std::nullopt;
  return out;
}

nlohmann::json LookupJson(const penme::Codebook& cb, const penme::LookupResult& r) {
  nlohmann::json j{{"decision", r.hit ? "hit" : "miss"},
                   {"edit_id", r.edit_id},
                   {"distance", r.distance},
                   {"threshold", r.threshold}};
  if (r.hit) j["payload"] = cb.entries()[r.entry].payload;
  return j;
}

class Cli {
 public:
  int Main(int argc, char** argv);

 private:
  penme::PipelineConfig Config() const {
    penme::PipelineConfig cfg = g_.config.empty() ? penme::PipelineConfig{} : penme::LoadConfig(g_.config);
    if (g_.seed) {
      cfg.seed = *g_.seed;
      cfg.train.seed = *g_.seed;
    }
    if (g_.out_dir) cfg.out_dir = *g_.out_dir;
    if (g_.quiet) cfg.quiet = true;
    return cfg;
  }
  penme::Logger Log(const penme::PipelineConfig& cfg) const { return penme::StderrLogger(cfg.quiet); }

  static fs::path Or(const std::string& flag, const fs::path& fallback) { return flag.empty() ? fallback : fs::path(flag); }

  void Synth();
  void Ingest();
  void BuildPairs();
  void Train();
  void BuildCodebook();
  void Query();
  void Eval();
  void SweepAlpha();
  void Scaling();
  void AnalyzeDominance();
  void Stats();
  void RougeReport();
  void Run();

  Globals g_;
  PairFlags pair_;
  TrainFlags train_;
  CodebookFlags codebook_;

  std::string dataset_, embeddings_, in_, out_, pairs_, proj_, codebook_path_, embedding_, alphas_, pair_thresholds_,
      sizes_, triplets_, breakdown_;
  bool explain_ = false;
  std::size_t synth_edits_ = 10, synth_dim_ = 16, synth_paraphrases_ = 4, synth_neighbours_ = 6, resamples_ = 1000;
  double synth_bias_ = 1.0;
};

void Cli::Synth() {
  const auto cfg = Config();
  penme::SynthConfig sc;
  sc.n_edits = synth_edits_;
  sc.dim = synth_dim_;
  sc.bias = synth_bias_;
  sc.seed = cfg.seed;
  sc.paraphrases_per_edit = synth_paraphrases_;
  sc.neighbours_per_edit = synth_neighbours_;
  const auto data = penme::MakeSynthetic(sc);
  const fs::path dir = Or(out_, cfg.out_dir);
  fs::create_directories(dir);
  penme::WriteFileText(dir / "data.jsonl", penme::SerializeDataset(data.records));
  penme::WriteEmbeddings(data.embeddings, dir / "data.emb");
  penme::WriteFileText(dir / "triplets.jsonl", penme::SerializeTriplets(penme::AllTriplets(data.records)));
  Log(cfg)("synth: " + std::to_string(sc.n_edits) + " edits of dim " + std::to_string(sc.dim) + " in " + dir.string());
}

void Cli::Ingest() {
  const auto cfg = Config();
  penme::StageIngest(Or(dataset_, cfg.dataset), Or(embeddings_, cfg.embeddings), cfg.seed, Or(out_, cfg.out_dir),
                     Log(cfg));
}

void Cli::BuildPairs() {
  auto cfg = Config();
  pair_.Apply(cfg.pairs);
  const fs::path in = Or(in_, cfg.out_dir);
  penme::StageBuildPairs(in, cfg.pairs, Or(out_, in / penme::kPairsFile), Log(cfg));
}

void Cli::Train() {
  auto cfg = Config();
  train_.Apply(cfg.train);
  const fs::path pairs = Or(pairs_, cfg.out_dir / penme::kPairsFile);
  const fs::path dir = penme::DirOf(pairs);
  penme::StageTrain(pairs, Or(embeddings_, dir / penme::kEmbeddingsFile), cfg.train,
                    Or(out_, dir / penme::kProjectorFile), Log(cfg));
}

void Cli::BuildCodebook() {
  auto cfg = Config();
  codebook_.Apply(cfg.threshold);
  const fs::path proj = Or(proj_, cfg.out_dir / penme::kProjectorFile);
  const fs::path in = Or(in_, penme::DirOf(proj));
  penme::StageBuildCodebook(in, proj, cfg.threshold, Or(out_, penme::DirOf(proj) / penme::kCodebookFile), Log(cfg));
}

void Cli::Query() {
  const auto cfg = Config();
  const fs::path cb_path = Or(codebook_path_, cfg.out_dir / penme::kCodebookFile);
  const fs::path dir = penme::DirOf(cb_path);
  const fs::path proj_path = Or(proj_, dir / penme::kProjectorFile);
  penme::VerifyAll({cb_path, proj_path});
  const penme::Codebook cb = penme::ReadCodebook(cb_path);
  const penme::ProjectorParams params = penme::ReadProjector(proj_path);

  std::vector<float> raw;
  if (auto parsed = ParseRawVector(embedding_)) {
    raw = std::move(*parsed);
  } else {
    const fs::path emb_path = Or(embeddings_, dir / penme::kEmbeddingsFile);
    penme::VerifyAll({emb_path});
    const auto emb = penme::ReadEmbeddings(emb_path);
    const auto row = emb.Lookup(embedding_);
    raw.assign(row.begin(), row.end());
  }
  if (raw.size() != params.input_dim()) {
    throw Error(ErrorKind::kDomain, "query has " + std::to_string(raw.size()) + " values, the projector expects " +
                                        std::to_string(params.input_dim()));
  }
  const auto key = penme::ToStd(penme::Project(params, std::span<const float>(raw)));
  const auto result = cb.Lookup(key);
  nlohmann::json out = LookupJson(cb, result);
  if (explain_) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& a : cb.Admitting(key)) {
      list.push_back({{"edit_id", a.edit_id}, {"distance", a.distance}, {"threshold", a.threshold}});
    }
    out["admitting"] = list;
  }
  std::cout << out.dump() << '\n';
}

void Cli::Eval() {
  const auto cfg = Config();
  const fs::path cb_path = Or(codebook_path_, cfg.out_dir / penme::kCodebookFile);
  const fs::path dir = penme::DirOf(cb_path);
  const fs::path in = Or(in_, dir);
  penme::StageEval(in, Or(proj_, dir / penme::kProjectorFile), cb_path, Or(out_, dir / penme::kReportFile), Log(cfg));
}

void Cli::SweepAlpha() {
  auto cfg = Config();
  pair_.Apply(cfg.pairs);
  train_.Apply(cfg.train);
  codebook_.Apply(cfg.threshold);
  const fs::path in = Or(in_, cfg.out_dir);
  const auto ws = penme::LoadWorkspace(in);
  const auto alphas = ParseGrid(alphas_.empty() ? "0.01:0.2:0.01" : alphas_);
  const auto thresholds =
      pair_thresholds_.empty() ? std::vector<double>{cfg.pairs.edit_pairing_threshold} : ParseGrid(pair_thresholds_);
  const auto grid = penme::SweepAlpha(ws.records, ws.split, ws.embeddings, cfg.pairs, cfg.train,
                                      cfg.threshold.scheme, alphas, thresholds);
  const fs::path out = Or(out_, in / "grid.csv");
  penme::WriteFileText(out, penme::SweepCsv(grid));
  std::size_t failed = 0;
  for (const auto& c : grid) failed += c.report ? 0 : 1;
  Log(cfg)("sweep-alpha: " + std::to_string(grid.size()) + " cells, " + std::to_string(failed) + " failed, wrote " +
           out.string());
}

void Cli::Scaling() {
  auto cfg = Config();
  pair_.Apply(cfg.pairs);
  train_.Apply(cfg.train);
  codebook_.Apply(cfg.threshold);
  const fs::path in = Or(in_, cfg.out_dir);
  const auto ws = penme::LoadWorkspace(in);
  const auto rows = penme::ScalingRun(ws.records, ws.split, ws.embeddings, ParseSizes(sizes_), cfg.pairs, cfg.train,
                                      cfg.threshold);
  const fs::path out = Or(out_, in / "scaling.csv");
  penme::WriteFileText(out, penme::ScalingCsv(rows));
  Log(cfg)("scaling: " + std::to_string(rows.size()) + " sizes, wrote " + out.string());
}

void Cli::AnalyzeDominance() {
  const auto cfg = Config();
  const auto layers = SplitOn(embeddings_, ',');
  if (layers.empty()) throw Error(ErrorKind::kArgument, "--embeddings needs at least one dump");
  const auto triplets = penme::LoadTriplets(triplets_);
  std::optional<penme::ProjectorParams> params;
  if (!proj_.empty()) params = penme::ReadProjector(proj_);
  std::ostringstream csv;
  csv.precision(10);
  csv << "layer,path,percentage,closer,count\n";
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto emb = penme::ReadEmbeddings(layers[l]);
    const auto vecs = penme::ResolveTriplets(triplets, emb, params ? &*params : nullptr);
    const auto d = penme::Dominance(vecs);
    csv << l << ',' << layers[l] << ',' << d.percentage << ',' << d.closer << ',' << d.count << '\n';
  }
  const fs::path out = Or(out_, cfg.out_dir / "dominance.csv");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  penme::WriteFileText(out, csv.str());
  Log(cfg)("analyze-dominance: " + std::to_string(layers.size()) + " layer(s), wrote " + out.string());
}

void Cli::Stats() {
  const auto cfg = Config();
  const fs::path in = Or(in_, cfg.out_dir);
  const auto ws = penme::LoadWorkspace(in);
  nlohmann::json j;
  j["raw"] = penme::DistanceStatsToJson(penme::ComputeDistanceStats(ws.records, ws.split, ws.embeddings));
  if (!proj_.empty()) {
    penme::VerifyAll({proj_});
    const auto params = penme::ReadProjector(proj_);
    j["projected"] = penme::DistanceStatsToJson(penme::ComputeDistanceStats(ws.records, ws.split, ws.embeddings, &params));
  }
  const fs::path out = Or(out_, in / "stats.json");
  penme::WriteFileText(out, j.dump(1) + "\n");
  Log(cfg)("stats: wrote " + out.string());
}

void Cli::RougeReport() {
  const auto cfg = Config();
  const fs::path report = Or(breakdown_, cfg.out_dir / penme::kReportFile);
  const fs::path in = Or(in_, penme::DirOf(report));
  penme::VerifyAll({report, in / penme::kDatasetFile});
  std::ifstream rin(report);
  if (!rin) throw Error(ErrorKind::kArgument, "cannot open " + report.string());
  std::vector<penme::ProbeOutcome> breakdown;
  try {
    breakdown = penme::BreakdownFromJson(nlohmann::json::parse(rin));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, report.string() + ": " + e.what());
  }
  const auto records = penme::LoadDataset(in / penme::kDatasetFile);
  penme::BootstrapConfig bc;
  bc.resamples = resamples_;
  bc.seed = cfg.seed;
  const auto rows = penme::ErrorReport(breakdown, records, bc);
  const fs::path out = Or(out_, penme::DirOf(report) / "rouge.csv");
  penme::WriteFileText(out, penme::ErrorReportCsv(rows));
  Log(cfg)("rouge-report: wrote " + out.string());
}

void Cli::Run() {
  auto cfg = Config();
  if (!dataset_.empty()) cfg.dataset = dataset_;
  if (!embeddings_.empty()) cfg.embeddings = embeddings_;
  if (cfg.dataset.empty() || cfg.embeddings.empty()) {
    throw Error(ErrorKind::kArgument, "run needs --dataset and --embeddings (or the config keys)");
  }
  pair_.Apply(cfg.pairs);
  train_.Apply(cfg.train);
  codebook_.Apply(cfg.threshold);
  const auto report = penme::RunPipeline(cfg);
  std::cout << penme::ReportToJson(report, false).dump() << '\n';
}

int Cli::Main(int argc, char** argv) {
  CLI::App app{"PENME model-editing toolkit over pre-extracted representations"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", g_.seed, "seed for every stochastic stage");
  app.add_option("--config", g_.config, "JSON config file; flags win over its values")->check(CLI::ExistingFile);
  app.add_option("--out-dir", g_.out_dir, "artifact directory");
  app.add_flag("--quiet", g_.quiet, "no progress output");

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset, embedding dump, and triplets");
  synth->add_option("--edits", synth_edits_);
  synth->add_option("--dim", synth_dim_);
  synth->add_option("--bias", synth_bias_, "lexical-bias strength in [0, 1]");
  synth->add_option("--paraphrases", synth_paraphrases_);
  synth->add_option("--neighbours", synth_neighbours_);
  synth->add_option("--out", out_, "output directory");
  synth->callback([this] { Synth(); });

  auto* ingest = app.add_subcommand("ingest", "validate a dataset and embeddings and split them");
  ingest->add_option("--dataset", dataset_, "edit records, one JSON object per line");
  ingest->add_option("--embeddings", embeddings_, "PNME embedding dump");
  ingest->add_option("--out", out_, "output directory");
  ingest->callback([this] { Ingest(); });

  auto* pairs = app.add_subcommand("build-pairs", "construct contrastive training pairs");
  pairs->add_option("--in", in_, "ingested directory");
  pairs->add_option("--out", out_);
  pair_.Add(pairs);
  pairs->callback([this] { BuildPairs(); });

  auto* train = app.add_subcommand("train", "train the projection network");
  train->add_option("--pairs", pairs_);
  train->add_option("--embeddings", embeddings_);
  train->add_option("--out", out_);
  train_.Add(train);
  train->callback([this] { Train(); });

  auto* build = app.add_subcommand("build-codebook", "derive keys and thresholds");
  build->add_option("--proj", proj_);
  build->add_option("--in", in_);
  build->add_option("--out", out_);
  codebook_.Add(build);
  build->callback([this] { BuildCodebook(); });

  auto* query = app.add_subcommand("query", "look one embedding up in a codebook");
  query->add_option("--codebook", codebook_path_);
  query->add_option("--embedding", embedding_, "embedding row id or comma-separated values")->required();
  query->add_option("--proj", proj_);
  query->add_option("--embeddings", embeddings_, "dump to resolve row ids against");
  query->add_flag("--explain", explain_, "list every entry whose threshold admits the query");
  query->callback([this] { Query(); });

  auto* eval = app.add_subcommand("eval", "score a codebook on the test probes");
  eval->add_option("--codebook", codebook_path_);
  eval->add_option("--proj", proj_);
  eval->add_option("--in", in_);
  eval->add_option("--out", out_);
  eval->callback([this] { Eval(); });

  auto* sweep = app.add_subcommand("sweep-alpha", "grid over alpha and pairing threshold");
  sweep->add_option("--in", in_);
  sweep->add_option("--alphas", alphas_, "lo:hi:step or a comma list");
  sweep->add_option("--pair-thresholds", pair_thresholds_, "lo:hi:step or a comma list");
  sweep->add_option("--out", out_);
  pair_.Add(sweep);
  train_.Add(sweep);
  codebook_.Add(sweep);
  sweep->callback([this] { SweepAlpha(); });

  auto* scaling = app.add_subcommand("scaling", "rebuild on growing prefixes of the dataset");
  scaling->add_option("--in", in_);
  scaling->add_option("--sizes", sizes_, "comma list, strictly ascending")->required();
  scaling->add_option("--out", out_);
  pair_.Add(scaling);
  train_.Add(scaling);
  codebook_.Add(scaling);
  scaling->callback([this] { Scaling(); });

  auto* dom = app.add_subcommand("analyze-dominance", "share of triplets whose neighbour beats the paraphrase");
  dom->add_option("--embeddings", embeddings_, "comma-separated dumps, one per layer")->required();
  dom->add_option("--triplets", triplets_)->required();
  dom->add_option("--proj", proj_, "project every layer first");
  dom->add_option("--out", out_);
  dom->callback([this] { AnalyzeDominance(); });

  auto* stats = app.add_subcommand("stats", "paraphrase and neighbour distance statistics");
  stats->add_option("--in", in_);
  stats->add_option("--proj", proj_, "also report the projected space");
  stats->add_option("--out", out_);
  stats->callback([this] { Stats(); });

  auto* rouge = app.add_subcommand("rouge-report", "ROUGE by success and failure scenario");
  rouge->add_option("--breakdown", breakdown_, "report.json with a breakdown");
  rouge->add_option("--in", in_, "directory holding the dataset");
  rouge->add_option("--resamples", resamples_);
  rouge->add_option("--out", out_);
  rouge->callback([this] { RougeReport(); });

  auto* run = app.add_subcommand("run", "ingest, pairs, train, codebook, eval in one go");
  run->add_option("--dataset", dataset_);
  run->add_option("--embeddings", embeddings_);
  pair_.Add(run);
  train_.Add(run);
  codebook_.Add(run);
  run->callback([this] { Run(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "penme: " << e.what() << '\n';
    return penme::ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "penme: " << e.what() << '\n';
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return Cli().Main(argc, argv); }
