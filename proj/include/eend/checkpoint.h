// eend/checkpoint.h
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

#ifndef EEND_CHECKPOINT_H_
#define EEND_CHECKPOINT_H_

#include <cstdint>
#include <optional>
#include <string>

#include "eend/autograd.h"
#include "eend/model.h"

namespace eend {

inline constexpr uint32_t kCheckpointVersion = 1;

// Everything besides the weights that a runner needs to reproduce the
// training-time input pipeline.
struct CheckpointInfo {
  double window_size = 1.0;      // embedding window, seconds
  uint64_t embedding_seed = 0;   // toy embedder projection seed
  bool oracle_vad_on_embeddings = false;
  std::string mode = "train";    // train | adapt
  double alpha = 1.0;
  int32_t epoch = 0;
  int64_t step = 0;
  double val_der = -1.0;         // negative when not measured
};

struct Checkpoint {
  ModelConfig config;
  CheckpointInfo info;
  ag::ParameterSet params;

  EendModel Model() const { return EendModel(config, params); }
};

// A checkpoint is a directory holding manifest.txt (key = value text) and
// weights.bin (tagged binary tensors with a trailing FNV-1a checksum).
void SaveCheckpoint(const std::string &dir, const EendModel &model,
                    const CheckpointInfo &info);

// Throws on a format version other than kCheckpointVersion, on any
// corruption of weights.bin, and when `expected` is set and differs from the
// stored variant.
Checkpoint LoadCheckpoint(const std::string &dir,
                          std::optional<Variant> expected = std::nullopt);

}  // namespace eend

#endif  // EEND_CHECKPOINT_H_
