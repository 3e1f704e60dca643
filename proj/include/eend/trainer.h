// eend/trainer.h
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

#ifndef EEND_TRAINER_H_
#define EEND_TRAINER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eend/checkpoint.h"
#include "eend/config.h"
#include "eend/embeddings.h"
#include "eend/features.h"
#include "eend/losses.h"
#include "eend/metrics.h"
#include "eend/model.h"
#include "eend/segments.h"
#include "eend/vad.h"

namespace eend {

struct TrainConfig {
  Variant variant = Variant::kBaseline;
  int32_t epochs = 10;
  int32_t warmup_steps = 500;
  int32_t batch_size = 4;
  int32_t chunk_frames = 500;  // 50 s at 10 frames per second
  TrainMode mode = TrainMode::kTrain;
  uint64_t seed = 0;
  bool use_oracle_vad_on_embeddings = false;
  double lr_scale = 1.0;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables clipping
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  bool shuffle_eda = true;
  EncoderConfig encoder;
  double window_size = 1.0;  // embedding window, s
  uint64_t embedding_seed = 0;
  // Directory of <id>.emb files; empty computes toy embeddings on the fly.
  std::string embeddings_dir;

  void Validate() const;

  // Reads the keys listed in KnownKeys(); unknown keys are rejected.
  static TrainConfig FromKeyValue(const KeyValueConfig &kv);
  static TrainConfig Load(const std::string &path);
  static std::vector<std::string> KnownKeys();
  ModelConfig Model() const;
};

// lr_scale * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5), step >= 1.
double NoamLearningRate(int64_t step, int32_t d_model, int32_t warmup,
                        double lr_scale = 1.0);

// One recording in model-ready form, all streams on the 100 ms grid.
struct Recording {
  std::string id;
  Matrix features;    // T x 345, empty when the variant ignores features
  Matrix embeddings;  // T x E, empty when the variant ignores embeddings
  LabelMatrix labels;  // T x S
  VadMask oracle_mask;
  SegmentList reference;
  int32_t NumFrames() const { return labels.NumFrames(); }
};

// Loads every manifest entry of a dataset directory. Embeddings are read only
// for variants that use them; with use_oracle_vad_on_embeddings they are
// zeroed wherever the oracle mask is silent.
std::vector<Recording> LoadDataset(const std::string &dir, const TrainConfig &cfg);
Recording LoadRecording(const std::string &id, const AudioSignal &audio,
                        const SegmentList &reference, const TrainConfig &cfg,
                        const std::string &embedding_path = "");

struct Chunk {
  int32_t recording = 0;
  int32_t start = 0;
  int32_t length = 0;
};
std::vector<Chunk> MakeChunks(const std::vector<Recording> &data, int32_t chunk_frames);

struct EpochRecord {
  int32_t epoch = 0;
  int64_t step = 0;
  double loss = 0.0;
  double diarization = 0.0;
  double attractor = 0.0;
  double lr = 0.0;
  double val_der = -1.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double final_loss = 0.0;
  double best_val_der = -1.0;
  // Embedding rows fed to the model at oracle-silent frames, and how many of
  // them were not all-zero (always 0 when masking is enabled).
  int64_t silent_rows_seen = 0;
  int64_t silent_rows_nonzero = 0;
};

// Non-finite loss or gradient; what() names the step, lr and grad norm.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct TrainHooks {
  // Called after every epoch; returning false stops training.
  std::function<bool(const EpochRecord &)> on_epoch;
};

// Trains `model` in place. Writes <out_dir>/final, <out_dir>/best and the
// JSON-lines log <out_dir>/train.log when out_dir is non-empty. Without a
// validation set, the training recordings are scored instead.
TrainResult Train(const TrainConfig &cfg, EendModel *model,
                  const std::vector<Recording> &train,
                  const std::vector<Recording> &valid, const std::string &out_dir,
                  const TrainHooks &hooks = {});

// Model posteriors for one recording (fixed speaker count when
// num_speakers > 0, otherwise estimated from the attractor existence).
PosteriorMatrix Predict(const EendModel &model, const Recording &rec,
                        int32_t num_speakers);

// Frame DER (decoded with `decode`) summed over recordings.
DerBreakdown EvaluateFrameDer(const EendModel &model, const std::vector<Recording> &data,
                              const DecodeOptions &decode = {});

enum class VadMode { kNone, kOracle, kEnergy };
VadMode ParseVadMode(const std::string &name);

struct InferOptions {
  VadMode vad = VadMode::kNone;  // gating of the decoded labels only
  // Mask applied to computed embeddings before the model sees them. Only
  // used when the checkpoint was trained with masked embeddings.
  VadMode embedding_vad = VadMode::kNone;
  int32_t num_speakers = 2;  // 0 estimates the count
  DecodeOptions decode;
  EnergyVadOptions energy;
};

struct InferInput {
  std::string recording_id;
  AudioSignal audio;
  const SegmentList *reference = nullptr;  // required by VadMode::kOracle
  std::optional<EmbeddingSequence> embeddings;
};

// forward -> posteriors -> threshold + median filter -> optional VAD gating
// -> segments.
SegmentList Infer(const Checkpoint &checkpoint, const EendModel &model,
                  const InferInput &input, const InferOptions &opts);

}  // namespace eend

#endif  // EEND_TRAINER_H_
