// eend/trainer.cc
//
// Copyright 2026  eend-spk authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "eend/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "eend/audio.h"
#include "eend/simulate.h"
#include "json.hpp"

namespace eend {

void TrainConfig::Validate() const {
  EEND_CHECK(epochs >= 1, "epochs must be at least 1");
  EEND_CHECK(warmup_steps >= 1, "warmup_steps must be at least 1");
  EEND_CHECK(batch_size >= 1, "batch_size must be at least 1");
  EEND_CHECK(chunk_frames >= 16, "chunk_frames must be at least 16");
  EEND_CHECK(lr_scale > 0.0, "lr_scale must be positive");
  EEND_CHECK(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
             "Adam betas must be in [0, 1)");
  EEND_CHECK(adam_eps > 0.0, "adam_eps must be positive");
  if (window_size != 1.0 && window_size != 2.0 && window_size != 3.0) {
    throw Error("embedding window must be 1, 2 or 3 seconds");
  }
  encoder.Validate();
}

std::vector<std::string> TrainConfig::KnownKeys() {
  return {"variant", "epochs", "warmup_steps", "batch_size", "chunk_frames", "mode",
          "seed", "use_oracle_vad_on_embeddings", "lr_scale", "grad_clip",
          "adam_beta1", "adam_beta2", "adam_eps", "shuffle_eda", "n_blocks",
          "d_model", "n_heads", "ff_dim", "dropout", "window_size",
          "embedding_seed", "embeddings_dir"};
}

TrainConfig TrainConfig::FromKeyValue(const KeyValueConfig &kv) {
  kv.RejectUnknown(KnownKeys());
  TrainConfig c;
  std::string variant = VariantName(c.variant), mode = "train";
  kv.Get("variant", &variant);
  c.variant = ParseVariant(variant);
  kv.Get("epochs", &c.epochs);
  kv.Get("warmup_steps", &c.warmup_steps);
  kv.Get("batch_size", &c.batch_size);
  kv.Get("chunk_frames", &c.chunk_frames);
  kv.Get("mode", &mode);
  if (mode == "train") {
    c.mode = TrainMode::kTrain;
  } else if (mode == "adapt") {
    c.mode = TrainMode::kAdapt;
  } else {
    throw ParseError("mode must be 'train' or 'adapt', got '" + mode + "'");
  }
  kv.Get("seed", &c.seed);
  kv.Get("use_oracle_vad_on_embeddings", &c.use_oracle_vad_on_embeddings);
  kv.Get("lr_scale", &c.lr_scale);
  kv.Get("grad_clip", &c.grad_clip);
  kv.Get("adam_beta1", &c.adam_beta1);
  kv.Get("adam_beta2", &c.adam_beta2);
  kv.Get("adam_eps", &c.adam_eps);
  kv.Get("shuffle_eda", &c.shuffle_eda);
  kv.Get("n_blocks", &c.encoder.n_blocks);
  kv.Get("d_model", &c.encoder.d_model);
  kv.Get("n_heads", &c.encoder.n_heads);
  kv.Get("ff_dim", &c.encoder.ff_dim);
  kv.Get("dropout", &c.encoder.dropout);
  kv.Get("window_size", &c.window_size);
  kv.Get("embedding_seed", &c.embedding_seed);
  kv.Get("embeddings_dir", &c.embeddings_dir);
  c.Validate();
  return c;
}

TrainConfig TrainConfig::Load(const std::string &path) {
  return FromKeyValue(KeyValueConfig::Load(path));
}

ModelConfig TrainConfig::Model() const {
  ModelConfig m;
  m.variant = variant;
  m.encoder = encoder;
  return m;
}

double NoamLearningRate(int64_t step, int32_t d_model, int32_t warmup, double lr_scale) {
  EEND_CHECK(step >= 1, "learning-rate step counts from 1");
  EEND_CHECK(warmup >= 1 && d_model >= 1, "invalid schedule parameters");
  const double k = static_cast<double>(step);
  return lr_scale * std::pow(d_model, -0.5) *
         std::min(std::pow(k, -0.5), k * std::pow(warmup, -1.5));
}

namespace {

// Embedding streams may differ from the feature grid by up to one window;
// longer ones are truncated, shorter ones repeat their last row.
Matrix FitToFrames(const EmbeddingSequence &emb, int32_t frames, const std::string &id) {
  if (emb.NumFrames() == frames) return emb.data;
  if (emb.NumFrames() < 1 ||
      std::abs(emb.NumFrames() - frames) > std::lround(emb.window_size / emb.hop)) {
    throw Error(id + ": embeddings have " + std::to_string(emb.NumFrames()) +
                " frames, audio has " + std::to_string(frames));
  }
  Matrix out(frames, emb.Dim());
  const int32_t n = std::min(frames, emb.NumFrames());
  out.topRows(n) = emb.data.topRows(n);
  for (int32_t t = n; t < frames; ++t) out.row(t) = emb.data.row(n - 1);
  return out;
}

}  // namespace

Recording LoadRecording(const std::string &id, const AudioSignal &audio,
                        const SegmentList &reference, const TrainConfig &cfg,
                        const std::string &embedding_path) {
  audio.Validate();
  const int32_t frames = NumOutputFrames(static_cast<int64_t>(audio.samples.size()));
  if (frames < 1) throw Error(id + ": audio too short");
  Recording rec;
  rec.id = id;
  rec.reference = reference;
  rec.labels = SegmentsToLabels(reference, frames);
  rec.oracle_mask = OracleMask(reference, frames);
  if (UsesFeatures(cfg.variant)) rec.features = ComputeFeatures(audio).data;
  if (UsesEmbeddings(cfg.variant)) {
    EmbeddingSequence emb;
    if (!embedding_path.empty()) {
      emb = LoadEmbeddings(embedding_path);
      if (emb.window_size != cfg.window_size) {
        throw Error(embedding_path + ": window " + FormatDouble(emb.window_size) +
                    " s does not match the configured " + FormatDouble(cfg.window_size) + " s");
      }
    } else {
      emb = ExtractEmbeddings(audio, ToyEmbedder(cfg.embedding_seed), cfg.window_size);
    }
    emb.data = FitToFrames(emb, frames, id);
    if (cfg.use_oracle_vad_on_embeddings) emb = ApplySilenceMask(emb, rec.oracle_mask);
    rec.embeddings = std::move(emb.data);
  }
  return rec;
}

std::vector<Recording> LoadDataset(const std::string &dir, const TrainConfig &cfg) {
  namespace fs = std::filesystem;
  std::vector<Recording> out;
  for (const DatasetEntry &e : ReadManifest(dir)) {
    AudioSignal audio = ReadWave((fs::path(dir) / e.wav).string());
    SegmentList ref = ReadRttm((fs::path(dir) / e.rttm).string());
    std::string emb_path;
    if (UsesEmbeddings(cfg.variant) && !cfg.embeddings_dir.empty()) {
      emb_path = (fs::path(cfg.embeddings_dir) / (e.id + ".emb")).string();
    }
    out.push_back(LoadRecording(e.id, audio, ref, cfg, emb_path));
  }
  return out;
}

std::vector<Chunk> MakeChunks(const std::vector<Recording> &data, int32_t chunk_frames) {
  EEND_CHECK(chunk_frames >= 1, "chunk length must be positive");
  std::vector<Chunk> chunks;
  for (size_t r = 0; r < data.size(); ++r) {
    const int32_t frames = data[r].NumFrames();
    for (int32_t start = 0; start < frames; start += chunk_frames) {
      chunks.push_back({static_cast<int32_t>(r), start, std::min(chunk_frames, frames - start)});
    }
  }
  return chunks;
}

PosteriorMatrix Predict(const EendModel &model, const Recording &rec, int32_t num_speakers) {
  const Matrix *x = UsesFeatures(model.config().variant) ? &rec.features : nullptr;
  const Matrix *b = UsesEmbeddings(model.config().variant) ? &rec.embeddings : nullptr;
  if (num_speakers > 0) return model.Forward(x, b, num_speakers).posteriors;
  return model.ForwardVariable(x, b).posteriors;
}

DerBreakdown EvaluateFrameDer(const EendModel &model, const std::vector<Recording> &data,
                              const DecodeOptions &decode) {
  DerBreakdown total;
  for (const Recording &rec : data) {
    int32_t speakers = std::max(1, rec.labels.NumSpeakers());
    LabelMatrix hyp = BinarizePosteriors(Predict(model, rec, speakers), decode);
    total.Accumulate(FrameDer(rec.labels, hyp));
  }
  return total;
}

namespace {

struct Adam {
  std::vector<Matrix> m, v;
  int64_t t = 0;
};

void WriteLogLine(std::ofstream *log, const EpochRecord &r) {
  if (!log->is_open()) return;
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["step"] = r.step;
  j["loss"] = r.loss;
  j["L_d"] = r.diarization;
  j["L_alpha"] = r.attractor;
  j["lr"] = r.lr;
  j["val_der"] = r.val_der;
  *log << j.dump() << '\n';
  log->flush();
}

}  // namespace

TrainResult Train(const TrainConfig &cfg, EendModel *model,
                  const std::vector<Recording> &train,
                  const std::vector<Recording> &valid, const std::string &out_dir,
                  const TrainHooks &hooks) {
  cfg.Validate();
  if (train.empty()) throw Error("training set is empty");
  if (model->config().variant != cfg.variant) {
    throw Error("model variant " + VariantName(model->config().variant) +
                " does not match configured variant " + VariantName(cfg.variant));
  }
  const Variant variant = cfg.variant;
  const double alpha = AttractorWeight(cfg.mode);
  const int32_t d_model = model->config().encoder.d_model;
  ag::ParameterSet &params = model->mutable_params();

  TrainResult result;
  for (const Recording &rec : train) {
    if (rec.labels.NumSpeakers() < 1 || rec.labels.NumSpeakers() > kMaxPitSpeakers) {
      throw Error(rec.id + ": training needs between 1 and " +
                  std::to_string(kMaxPitSpeakers) + " speakers");
    }
    if (UsesFeatures(variant) && rec.features.rows() != rec.NumFrames()) {
      throw Error(rec.id + ": missing or misaligned features");
    }
    if (UsesEmbeddings(variant) && rec.embeddings.rows() != rec.NumFrames()) {
      throw Error(rec.id + ": missing or misaligned embeddings");
    }
  }

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(std::filesystem::path(out_dir) / "train.log");
    if (!log) throw Error("cannot write " + out_dir + "/train.log");
  }

  CheckpointInfo info;
  info.window_size = cfg.window_size;
  info.embedding_seed = cfg.embedding_seed;
  info.oracle_vad_on_embeddings = cfg.use_oracle_vad_on_embeddings;
  info.mode = cfg.mode == TrainMode::kAdapt ? "adapt" : "train";
  info.alpha = alpha;

  Adam adam;
  adam.m = params.ZerosLike();
  adam.v = params.ZerosLike();
  std::vector<Matrix> grads = params.ZerosLike();
  std::vector<Chunk> chunks = MakeChunks(train, cfg.chunk_frames);
  std::mt19937_64 graph_rng(MixSeed(cfg.seed, 7));
  const std::vector<Recording> &val_set = valid.empty() ? train : valid;

  for (int32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int32_t> order(chunks.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 order_rng(MixSeed(cfg.seed, 1000 + epoch));
    std::shuffle(order.begin(), order.end(), order_rng);

    double sum_loss = 0.0, sum_ld = 0.0, sum_la = 0.0;
    double lr = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double weight = 1.0 / static_cast<double>(end - begin);
      for (Matrix &g : grads) g.setZero();
      double batch_loss = 0.0;
      for (size_t i = begin; i < end; ++i) {
        const Chunk &c = chunks[order[i]];
        const Recording &rec = train[c.recording];
        const int32_t speakers = rec.labels.NumSpeakers();
        ag::Tape tape(&params, true);
        ag::Var x, b;
        if (UsesFeatures(variant)) {
          x = tape.Constant(rec.features.middleRows(c.start, c.length));
        }
        if (UsesEmbeddings(variant)) {
          Matrix emb = rec.embeddings.middleRows(c.start, c.length);
          for (int32_t t = 0; t < c.length; ++t) {
            if (rec.oracle_mask[c.start + t]) continue;
            ++result.silent_rows_seen;
            if (!emb.row(t).isZero(0.0)) ++result.silent_rows_nonzero;
          }
          if (cfg.use_oracle_vad_on_embeddings && result.silent_rows_nonzero > 0) {
            throw Error(rec.id + ": non-zero embedding at a silent frame with oracle VAD masking");
          }
          b = tape.Constant(std::move(emb));
        }
        EendModel::GraphOptions opts;
        opts.training = true;
        opts.shuffle = cfg.shuffle_eda;
        opts.rng = &graph_rng;
        EendModel::Graph g = model->Build(tape, x, b, speakers, speakers + 1, opts);
        Matrix labels = rec.labels.AsDouble().middleRows(c.start, c.length);
        ag::Var ld = PitLossVar(g.logits, labels);
        ag::Var la = AttractorLossVar(g.existence_logits, speakers);
        ag::Var total = ag::Scale(ag::AddScalars(ld, la, alpha), weight);
        tape.Backward(total);
        tape.AccumulateParamGrads(&grads);
        batch_loss += total.scalar();
        sum_ld += ld.scalar();
        sum_la += la.scalar();
      }
      sum_loss += batch_loss * static_cast<double>(end - begin);

      double sq = 0.0;
      for (const Matrix &g : grads) sq += g.squaredNorm();
      const double norm = std::sqrt(sq);
      ++adam.t;
      lr = NoamLearningRate(adam.t, d_model, cfg.warmup_steps, cfg.lr_scale);
      if (!std::isfinite(batch_loss) || !std::isfinite(norm)) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "training diverged: non-finite loss at step %lld (lr=%.6g, grad_norm=%.6g)",
                      static_cast<long long>(adam.t), lr, norm);
        throw TrainingDiverged(buf);
      }
      const double clip = (cfg.grad_clip > 0 && norm > cfg.grad_clip) ? cfg.grad_clip / norm : 1.0;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.t));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.t));
      for (int32_t p = 0; p < params.size(); ++p) {
        Matrix g = grads[p] * clip;
        adam.m[p] = cfg.adam_beta1 * adam.m[p] + (1.0 - cfg.adam_beta1) * g;
        adam.v[p] = cfg.adam_beta2 * adam.v[p] + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
        params[p].value.array() -=
            lr * (adam.m[p].array() / bc1) / ((adam.v[p].array() / bc2).sqrt() + cfg.adam_eps);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = adam.t;
    const double n = static_cast<double>(chunks.size());
    rec.loss = sum_loss / n;
    rec.diarization = sum_ld / n;
    rec.attractor = sum_la / n;
    rec.lr = lr;
    rec.val_der = EvaluateFrameDer(*model, val_set).der;
    result.history.push_back(rec);
    result.final_loss = rec.loss;
    WriteLogLine(&log, rec);

    info.epoch = epoch;
    info.step = adam.t;
    info.val_der = rec.val_der;
    if (result.best_val_der < 0 || rec.val_der < result.best_val_der) {
      result.best_val_der = rec.val_der;
      if (!out_dir.empty()) SaveCheckpoint(out_dir + "/best", *model, info);
    }
    if (hooks.on_epoch && !hooks.on_epoch(rec)) break;
  }
  if (!out_dir.empty()) SaveCheckpoint(out_dir + "/final", *model, info);
  return result;
}

VadMode ParseVadMode(const std::string &name) {
  if (name == "none") return VadMode::kNone;
  if (name == "oracle") return VadMode::kOracle;
  if (name == "energy") return VadMode::kEnergy;
  throw Error("unknown VAD mode '" + name + "' (expected none, oracle or energy)");
}

namespace {

std::optional<VadMask> InferenceMask(VadMode mode, const InferInput &input, int32_t frames,
                                     const EnergyVadOptions &energy) {
  if (mode == VadMode::kOracle) {
    SegmentList ref;
    for (const Segment &s : *input.reference) {
      if (s.recording_id == input.recording_id) ref.push_back(s);
    }
    if (ref.empty()) {
      throw Error("reference RTTM has no segments for recording " + input.recording_id);
    }
    return OracleMask(ref, frames);
  }
  if (mode == VadMode::kEnergy) {
    VadMask raw = EnergyVad(input.audio, energy), fixed;
    fixed.mask.assign(frames, 0);
    for (int32_t t = 0; t < std::min(frames, raw.size()); ++t) fixed.mask[t] = raw[t];
    return fixed;
  }
  return std::nullopt;
}

}  // namespace

SegmentList Infer(const Checkpoint &checkpoint, const EendModel &model,
                  const InferInput &input, const InferOptions &opts) {
  if (input.audio.samples.empty()) throw Error(input.recording_id + ": empty audio");
  input.audio.Validate();
  const int32_t frames = NumOutputFrames(static_cast<int64_t>(input.audio.samples.size()));
  if (frames < 1) throw Error(input.recording_id + ": audio too short");
  if ((opts.vad == VadMode::kOracle || opts.embedding_vad == VadMode::kOracle) &&
      input.reference == nullptr) {
    throw Error("oracle VAD needs a reference RTTM");
  }
  const Variant variant = model.config().variant;
  std::optional<VadMask> gate = InferenceMask(opts.vad, input, frames, opts.energy);

  Recording rec;
  rec.id = input.recording_id;
  rec.labels.data = BinaryMatrix::Zero(frames, 0);
  if (UsesFeatures(variant)) {
    rec.features = ComputeFeatures(input.audio).data;
    if (rec.features.cols() != model.config().feature_dim) {
      throw Error("feature dimension does not match the checkpoint");
    }
  }
  if (UsesEmbeddings(variant)) {
    EmbeddingSequence emb;
    if (input.embeddings) {
      emb = *input.embeddings;
      if (emb.Dim() != model.config().embedding_dim) {
        throw Error("embedding dimension " + std::to_string(emb.Dim()) +
                    " does not match the checkpoint (" +
                    std::to_string(model.config().embedding_dim) + ")");
      }
      if (emb.window_size != checkpoint.info.window_size) {
        throw Error("embedding window " + FormatDouble(emb.window_size) +
                    " s does not match the checkpoint window " +
                    FormatDouble(checkpoint.info.window_size) + " s");
      }
      emb.data = FitToFrames(emb, frames, input.recording_id);
    } else {
      emb = ExtractEmbeddings(input.audio, ToyEmbedder(checkpoint.info.embedding_seed,
                                                       model.config().embedding_dim),
                              checkpoint.info.window_size);
    }
    if (checkpoint.info.oracle_vad_on_embeddings) {
      std::optional<VadMask> m = InferenceMask(opts.embedding_vad, input, frames, opts.energy);
      if (m) emb = ApplySilenceMask(emb, *m);
    }
    rec.embeddings = std::move(emb.data);
  }

  PosteriorMatrix post = Predict(model, rec, opts.num_speakers);
  LabelMatrix hyp = BinarizePosteriors(post, opts.decode);
  if (gate) hyp = GateHypothesis(hyp, *gate);
  return LabelsToSegments(hyp, input.recording_id);
}

}  // namespace eend
