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
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "penme/binary_io.hpp"
#include "penme/embeddings.hpp"
#include "penme/error.hpp"
#include "penme/pairs.hpp"
#include "penme/rng.hpp"

namespace penme {

enum class Activation : std::uint8_t { kRelu = 0, kIdentity = 1 };

inline const char* ActivationName(Activation a) {
  return a == Activation::kRelu ? "relu" : "identity";
}

struct ProjectorShape {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t out_dim = 0;
};

// hidden = input_dim, out_dim = max(8, input_dim / 4).
inline ProjectorShape DefaultShape(std::size_t input_dim) {
  return {input_dim, input_dim, std::max<std::size_t>(8, input_dim / 4)};
}

// Two-layer map z = W2 act(W1 x + b1) + b2. When `normalize_input` is set,
// Project() scales x to unit L2 norm before the first layer.
struct ProjectorParams {
  Eigen::MatrixXd w1;  // hidden x input_dim
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // out_dim x hidden
  Eigen::VectorXd b2;
  Activation activation = Activation::kRelu;
  bool normalize_input = true;

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(w2.rows()); }

  bool operator==(const ProjectorParams& o) const {
    return activation == o.activation && normalize_input == o.normalize_input &&
           w1.rows() == o.w1.rows() && w1.cols() == o.w1.cols() && w2.rows() == o.w2.rows() &&
           w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
  }
};

// Same layout as ProjectorParams, holding d(loss)/d(param).
struct ProjectorGradient {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  static ProjectorGradient ZerosLike(const ProjectorParams& p) {
    return {Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols()), Eigen::VectorXd::Zero(p.b1.size()),
            Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols()), Eigen::VectorXd::Zero(p.b2.size())};
  }

  double MaxAbs() const {
    return std::max({w1.size() ? w1.cwiseAbs().maxCoeff() : 0.0, b1.size() ? b1.cwiseAbs().maxCoeff() : 0.0,
                     w2.size() ? w2.cwiseAbs().maxCoeff() : 0.0, b2.size() ? b2.cwiseAbs().maxCoeff() : 0.0});
  }
};

inline void ValidateParams(const ProjectorParams& p) {
  if (p.w1.rows() == 0 || p.w1.cols() == 0) throw Error(ErrorKind::kDomain, "projector has an empty first layer");
  if (p.b1.size() != p.w1.rows() || p.w2.cols() != p.w1.rows() || p.b2.size() != p.w2.rows()) {
    throw Error(ErrorKind::kDomain, "projector layer dimensions are inconsistent");
  }
  if (p.w2.rows() < 2) throw Error(ErrorKind::kDomain, "projector output dim must be at least 2");
  if (!p.w1.allFinite() || !p.b1.allFinite() || !p.w2.allFinite() || !p.b2.allFinite()) {
    throw Error(ErrorKind::kDomain, "projector parameters contain non-finite values");
  }
}

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and biases alike.
inline ProjectorParams InitProjector(const ProjectorShape& shape, std::uint64_t seed,
                                     Activation activation = Activation::kRelu,
                                     bool normalize_input = true) {
  if (shape.input_dim == 0 || shape.hidden == 0 || shape.out_dim < 2) {
    throw Error(ErrorKind::kArgument, "projector needs input_dim > 0, hidden > 0, out_dim >= 2");
  }
  Rng rng(seed);
  const auto in = static_cast<Eigen::Index>(shape.input_dim);
  const auto hid = static_cast<Eigen::Index>(shape.hidden);
  const auto out = static_cast<Eigen::Index>(shape.out_dim);
  ProjectorParams p;
  p.activation = activation;
  p.normalize_input = normalize_input;
  const double bound1 = std::sqrt(1.0 / static_cast<double>(shape.input_dim));
  const double bound2 = std::sqrt(1.0 / static_cast<double>(shape.hidden));
  p.w1.resize(hid, in);
  p.b1.resize(hid);
  p.w2.resize(out, hid);
  p.b2.resize(out);
  // Row-major fill order keeps the draw sequence independent of Eigen's storage.
  for (Eigen::Index r = 0; r < hid; ++r)
    for (Eigen::Index c = 0; c < in; ++c) p.w1(r, c) = rng.Uniform(-bound1, bound1);
  for (Eigen::Index r = 0; r < hid; ++r) p.b1(r) = rng.Uniform(-bound1, bound1);
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < hid; ++c) p.w2(r, c) = rng.Uniform(-bound2, bound2);
  for (Eigen::Index r = 0; r < out; ++r) p.b2(r) = rng.Uniform(-bound2, bound2);
  return p;
}

namespace detail {

inline Eigen::MatrixXd Activate(const Eigen::MatrixXd& pre, Activation a) {
  return a == Activation::kRelu ? Eigen::MatrixXd(pre.cwiseMax(0.0)) : pre;
}

inline Eigen::MatrixXd ActivationSlope(const Eigen::MatrixXd& pre, Activation a) {
  if (a == Activation::kIdentity) return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
  return (pre.array() > 0.0).cast<double>().matrix();
}

}  // namespace detail

// Forward pass on raw (already prepared) inputs, one column per sample.
inline Eigen::MatrixXd ForwardColumns(const ProjectorParams& p, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != p.input_dim()) {
    throw Error(ErrorKind::kDomain, "forward: input has dim " + std::to_string(inputs.rows()) +
                                        ", projector expects " + std::to_string(p.input_dim()));
  }
  Eigen::MatrixXd pre = p.w1 * inputs;
  pre.colwise() += p.b1;
  Eigen::MatrixXd out = p.w2 * detail::Activate(pre, p.activation);
  out.colwise() += p.b2;
  return out;
}

inline Eigen::VectorXd Forward(const ProjectorParams& p, std::span<const double> x) {
  Eigen::Map<const Eigen::VectorXd> col(x.data(), static_cast<Eigen::Index>(x.size()));
  return ForwardColumns(p, Eigen::MatrixXd(col)).col(0);
}

// Input as fed to the first layer: widened to double and optionally unit-normalized.
template <typename T>
Eigen::VectorXd PrepareInput(const ProjectorParams& p, std::span<const T> x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = static_cast<double>(x[i]);
  if (p.normalize_input) {
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
  }
  return v;
}

// Full embedding-to-key map: prepare, then forward.
template <typename T>
Eigen::VectorXd Project(const ProjectorParams& p, std::span<const T> x) {
  const Eigen::VectorXd v = PrepareInput(p, x);
  return ForwardColumns(p, v).col(0);
}

// (1-y) 1/2 |x1-x2|^2 + y 1/2 max(0, m - |x1-x2|)^2
inline double ContrastiveLoss(PairLabel y, std::span<const double> x1, std::span<const double> x2,
                              double margin) {
  if (x1.size() != x2.size()) throw Error(ErrorKind::kDomain, "contrastive_loss: dimension mismatch");
  if (!(margin > 0.0)) throw Error(ErrorKind::kDomain, "contrastive_loss: margin must be positive");
  double sq = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const double d = x1[i] - x2[i];
    sq += d * d;
  }
  if (y == PairLabel::kAttract) return 0.5 * sq;
  const double gap = std::max(0.0, margin - std::sqrt(sq));
  return 0.5 * gap * gap;
}

// Pair over columns of a prepared input matrix.
struct IndexedPair {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  PairLabel label = PairLabel::kAttract;
};

struct BatchEvaluation {
  double loss = 0.0;  // mean over the batch
  ProjectorGradient grad;
};

// Mean contrastive loss of a batch and its exact gradient. Each distinct input
// column is forwarded and back-propagated once. A repel pair at distance 0 has
// no defined gradient; it contributes zero.
inline BatchEvaluation EvaluateBatch(const ProjectorParams& p, const Eigen::MatrixXd& inputs,
                                     std::span<const IndexedPair> batch, double margin,
                                     bool want_gradient = true) {
  if (batch.empty()) throw Error(ErrorKind::kArgument, "loss_gradient: empty batch");
  if (!(margin > 0.0)) throw Error(ErrorKind::kDomain, "margin must be positive");

  std::unordered_map<std::uint32_t, Eigen::Index> local;
  std::vector<std::uint32_t> cols;
  auto slot = [&](std::uint32_t c) {
    auto [it, fresh] = local.emplace(c, static_cast<Eigen::Index>(cols.size()));
    if (fresh) cols.push_back(c);
    return it->second;
  };
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ends(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (batch[k].a >= inputs.cols() || batch[k].b >= inputs.cols()) {
      throw Error(ErrorKind::kDomain, "pair references a missing input column");
    }
    ends[k] = {slot(batch[k].a), slot(batch[k].b)};
  }

  Eigen::MatrixXd x(inputs.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) x.col(static_cast<Eigen::Index>(c)) = inputs.col(cols[c]);
  if (static_cast<std::size_t>(x.rows()) != p.input_dim()) {
    throw Error(ErrorKind::kDomain, "batch inputs do not match projector input dim");
  }

  Eigen::MatrixXd pre = p.w1 * x;
  pre.colwise() += p.b1;
  const Eigen::MatrixXd hidden = detail::Activate(pre, p.activation);
  Eigen::MatrixXd z = p.w2 * hidden;
  z.colwise() += p.b2;

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  double total = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto [ia, ib] = ends[k];
    const Eigen::VectorXd diff = z.col(ia) - z.col(ib);
    const double sq = diff.squaredNorm();
    Eigen::VectorXd g;
    if (batch[k].label == PairLabel::kAttract) {
      total += 0.5 * sq;
      g = diff;
    } else {
      const double dist = std::sqrt(sq);
      const double gap = margin - dist;
      if (gap <= 0.0) continue;
      total += 0.5 * gap * gap;
      if (dist == 0.0) continue;
      g = (-gap / dist) * diff;
    }
    if (want_gradient) {
      dz.col(ia) += inv_n * g;
      dz.col(ib) -= inv_n * g;
    }
  }

  BatchEvaluation result;
  result.loss = total * inv_n;
  if (!want_gradient) return result;
  result.grad.w2 = dz * hidden.transpose();
  result.grad.b2 = dz.rowwise().sum();
  const Eigen::MatrixXd dpre = (p.w2.transpose() * dz).cwiseProduct(detail::ActivationSlope(pre, p.activation));
  result.grad.w1 = dpre * x.transpose();
  result.grad.b1 = dpre.rowwise().sum();
  return result;
}

struct TrainConfig {
  double margin = 1.0;
  double learning_rate = 1e-2;
  double lr_decay = 0.01;
  std::uint32_t max_epochs = 200;
  std::uint32_t batch_size = 8192;
  std::uint32_t patience = 8;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t hidden = 0;   // 0: input_dim
  std::size_t out_dim = 0;  // 0: max(8, input_dim / 4)
  Activation activation = Activation::kRelu;
  bool normalize = true;
};

inline void ValidateTrainConfig(const TrainConfig& cfg) {
  if (!(cfg.margin > 0.0)) throw Error(ErrorKind::kArgument, "margin must be positive");
  if (!(cfg.learning_rate > 0.0)) throw Error(ErrorKind::kArgument, "learning rate must be positive");
  if (cfg.batch_size < 1) throw Error(ErrorKind::kArgument, "batch size must be at least 1");
  if (cfg.patience < 1) throw Error(ErrorKind::kArgument, "patience must be at least 1");
  if (cfg.out_dim == 1) throw Error(ErrorKind::kArgument, "projector output dim must be at least 2");
}

// Inverse-time decay: lr / (1 + decay * epoch), epoch counted from 0.
inline double DecayedRate(const TrainConfig& cfg, std::uint32_t epoch) {
  return cfg.learning_rate / (1.0 + cfg.lr_decay * static_cast<double>(epoch));
}

struct EpochLog {
  std::uint32_t epoch = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;
};

struct TrainResult {
  ProjectorParams params;
  std::vector<EpochLog> log;
  // Epoch whose parameters were returned; -1 when no epoch ran.
  int best_epoch = -1;
};

namespace detail {

struct AdamState {
  ProjectorGradient m;
  ProjectorGradient v;
  std::uint64_t step = 0;
};

template <typename P, typename G>
void AdamUpdate(P& param, G& m, G& v, const G& g, double lr, const TrainConfig& cfg, double c1,
                double c2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
}

inline void AdamStep(ProjectorParams& p, AdamState& s, const ProjectorGradient& g, double lr,
                     const TrainConfig& cfg) {
  ++s.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  AdamUpdate(p.w1, s.m.w1, s.v.w1, g.w1, lr, cfg, c1, c2);
  AdamUpdate(p.b1, s.m.b1, s.v.b1, g.b1, lr, cfg, c1, c2);
  AdamUpdate(p.w2, s.m.w2, s.v.w2, g.w2, lr, cfg, c1, c2);
  AdamUpdate(p.b2, s.m.b2, s.v.b2, g.b2, lr, cfg, c1, c2);
}

}  // namespace detail

// Pair ids resolved to columns of a prepared input matrix.
struct PreparedPairs {
  Eigen::MatrixXd inputs;
  std::vector<std::string> column_ids;
  std::vector<IndexedPair> pairs;
};

inline PreparedPairs PreparePairs(const std::vector<TrainingPair>& pairs,
                                  const EmbeddingMatrix& embeddings, bool normalize) {
  PreparedPairs out;
  std::unordered_map<std::string, std::uint32_t> column;
  auto col = [&](const std::string& id) {
    auto [it, fresh] = column.emplace(id, static_cast<std::uint32_t>(out.column_ids.size()));
    if (fresh) out.column_ids.push_back(id);
    return it->second;
  };
  out.pairs.reserve(pairs.size());
  for (const auto& p : pairs) out.pairs.push_back({col(p.a), col(p.b), p.label});

  ProjectorParams prep;
  prep.normalize_input = normalize;
  out.inputs.resize(static_cast<Eigen::Index>(embeddings.dim()),
                    static_cast<Eigen::Index>(out.column_ids.size()));
  for (std::size_t c = 0; c < out.column_ids.size(); ++c) {
    out.inputs.col(static_cast<Eigen::Index>(c)) = PrepareInput(prep, embeddings.Lookup(out.column_ids[c]));
  }
  return out;
}

// Mini-batch Adam over shuffled pairs with per-epoch inverse-time learning
// rate decay. After each epoch the mean loss over all pairs is measured with
// the current parameters; training stops once it has not improved for
// `patience` epochs, and the parameters with the lowest measured loss are
// returned.
inline TrainResult Train(const std::vector<TrainingPair>& pairs, const EmbeddingMatrix& embeddings,
                         const TrainConfig& cfg) {
  ValidateTrainConfig(cfg);
  if (pairs.empty()) throw Error(ErrorKind::kArgument, "train: no training pairs");

  PreparedPairs prepared = PreparePairs(pairs, embeddings, cfg.normalize);
  ProjectorShape shape = DefaultShape(embeddings.dim());
  if (cfg.hidden) shape.hidden = cfg.hidden;
  if (cfg.out_dim) shape.out_dim = cfg.out_dim;

  Rng rng(cfg.seed);
  TrainResult result;
  result.params = InitProjector(shape, rng.NextU64(), cfg.activation, cfg.normalize);
  if (cfg.max_epochs == 0) return result;

  ProjectorParams params = result.params;
  detail::AdamState adam{ProjectorGradient::ZerosLike(params), ProjectorGradient::ZerosLike(params), 0};
  std::vector<IndexedPair> order = prepared.pairs;
  std::vector<IndexedPair> batch;
  double best_loss = std::numeric_limits<double>::infinity();
  std::uint32_t stale = 0;

  for (std::uint32_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = DecayedRate(cfg, epoch);
    rng.Shuffle(order);
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                   order.begin() + static_cast<std::ptrdiff_t>(stop));
      BatchEvaluation eval = EvaluateBatch(params, prepared.inputs, batch, cfg.margin);
      if (!std::isfinite(eval.loss) || !std::isfinite(eval.grad.MaxAbs())) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << batch_no << "; offending pairs:";
        for (const auto& bp : batch) {
          const double l = EvaluateBatch(params, prepared.inputs, std::span(&bp, 1), cfg.margin, false).loss;
          if (!std::isfinite(l)) {
            msg << " (" << prepared.column_ids[bp.a] << ", " << prepared.column_ids[bp.b] << ")";
          }
        }
        throw Error(ErrorKind::kRuntime, msg.str());
      }
      detail::AdamStep(params, adam, eval.grad, lr, cfg);
    }

    const double monitored = EvaluateBatch(params, prepared.inputs, prepared.pairs, cfg.margin, false).loss;
    if (!std::isfinite(monitored)) {
      throw Error(ErrorKind::kRuntime, "non-finite epoch loss at epoch " + std::to_string(epoch));
    }
    result.log.push_back({epoch, lr, monitored});
    if (monitored < best_loss) {
      best_loss = monitored;
      result.params = params;
      result.best_epoch = static_cast<int>(epoch);
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

inline std::string TrainLogCsv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,lr,mean_loss\n";
  for (const auto& e : log) out << e.epoch << ',' << e.learning_rate << ',' << e.mean_loss << '\n';
  return out.str();
}

// "PNME" | u16 0x0201 | u8 activation | u8 normalize | u32 input | u32 hidden |
// u32 out | f64 W1 (row-major) | f64 b1 | f64 W2 (row-major) | f64 b2
inline std::vector<std::uint8_t> EncodeProjector(const ProjectorParams& p) {
  ValidateParams(p);
  ByteWriter w;
  w.Header(kProjectorFormat);
  w.U8(static_cast<std::uint8_t>(p.activation));
  w.U8(p.normalize_input ? 1 : 0);
  w.U32(static_cast<std::uint32_t>(p.input_dim()));
  w.U32(static_cast<std::uint32_t>(p.hidden()));
  w.U32(static_cast<std::uint32_t>(p.out_dim()));
  for (Eigen::Index r = 0; r < p.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < p.w1.cols(); ++c) w.F64(p.w1(r, c));
  for (Eigen::Index r = 0; r < p.b1.size(); ++r) w.F64(p.b1(r));
  for (Eigen::Index r = 0; r < p.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < p.w2.cols(); ++c) w.F64(p.w2(r, c));
  for (Eigen::Index r = 0; r < p.b2.size(); ++r) w.F64(p.b2(r));
  return w.bytes();
}

inline ProjectorParams DecodeProjector(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.Header(kProjectorFormat, "projector");
  ProjectorParams p;
  const std::size_t act_at = r.offset();
  const std::uint8_t act = r.U8();
  if (act > 1) throw FormatError("unknown activation tag " + std::to_string(act), act_at);
  p.activation = static_cast<Activation>(act);
  p.normalize_input = r.U8() != 0;
  const std::size_t dims_at = r.offset();
  const auto in = static_cast<Eigen::Index>(r.U32());
  const auto hid = static_cast<Eigen::Index>(r.U32());
  const auto out = static_cast<Eigen::Index>(r.U32());
  if (in == 0 || hid == 0 || out < 2) throw FormatError("invalid projector dims", dims_at);
  const std::size_t need = static_cast<std::size_t>(hid * in + hid + out * hid + out) * 8;
  if (r.remaining() != need) throw FormatError("projector payload size mismatch", r.offset());
  auto f = [&]() {
    const std::size_t at = r.offset();
    const double v = r.F64();
    if (!std::isfinite(v)) throw FormatError("non-finite projector parameter", at);
    return v;
  };
  p.w1.resize(hid, in);
  p.b1.resize(hid);
  p.w2.resize(out, hid);
  p.b2.resize(out);
  for (Eigen::Index i = 0; i < hid; ++i)
    for (Eigen::Index j = 0; j < in; ++j) p.w1(i, j) = f();
  for (Eigen::Index i = 0; i < hid; ++i) p.b1(i) = f();
  for (Eigen::Index i = 0; i < out; ++i)
    for (Eigen::Index j = 0; j < hid; ++j) p.w2(i, j) = f();
  for (Eigen::Index i = 0; i < out; ++i) p.b2(i) = f();
  r.ExpectEnd("projector");
  return p;
}

inline ProjectorParams ReadProjector(const std::filesystem::path& path) {
  return DecodeProjector(ReadFileBytes(path));
}

inline void WriteProjector(const ProjectorParams& p, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodeProjector(p));
}

}  // namespace penme
