// eend/embeddings.h
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

#ifndef EEND_EMBEDDINGS_H_
#define EEND_EMBEDDINGS_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eend/audio.h"
#include "eend/common.h"
#include "eend/features.h"

namespace eend {

// T x E speaker embeddings on the 100 ms grid, one per acoustic frame.
struct EmbeddingSequence {
  Matrix data;
  double window_size = 1.0;  // seconds
  double hop = kOutputFrameShift;

  int32_t NumFrames() const { return static_cast<int32_t>(data.rows()); }
  int32_t Dim() const { return static_cast<int32_t>(data.cols()); }
};

// Speech (1) / silence (0) per 100 ms frame.
struct VadMask {
  std::vector<uint8_t> mask;

  int32_t size() const { return static_cast<int32_t>(mask.size()); }
  uint8_t operator[](int32_t t) const { return mask[t]; }
};

// Maps a window of 8 kHz audio to a fixed-size embedding. Implementations
// must be deterministic and safe to call concurrently.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int32_t Dim() const = 0;
  virtual Vector Embed(std::span<const double> window) const = 0;
};

// Stand-in for a pretrained speaker extractor. Each window is summarized by
// per-band log-Mel means (with the across-band average removed, so overall
// loudness cancels) and per-band standard deviations; the 46 statistics go
// through a fixed Gaussian projection plus bias drawn from `seed` and the
// result is length-normalized. Windows shorter than one analysis frame and
// digital silence have all-zero statistics and therefore map to the
// normalized bias vector.
class ToyEmbedder : public EmbeddingProvider {
 public:
  explicit ToyEmbedder(uint64_t seed = 0, int32_t dim = kEmbeddingDim);

  int32_t Dim() const override { return dim_; }
  Vector Embed(std::span<const double> window) const override;

  // The statistics vector fed to the projection.
  static Vector WindowStatistics(std::span<const double> window);

 private:
  int32_t dim_;
  Matrix projection_;  // dim x 46
  Vector bias_;
};

// One embedding per 100 ms hop. The window for frame t is centered on t*hop
// and truncated to the signal. The row count equals NumOutputFrames() of the
// same audio. window_size must be 1, 2 or 3 seconds.
EmbeddingSequence ExtractEmbeddings(const AudioSignal &audio,
                                    const EmbeddingProvider &provider,
                                    double window_size,
                                    double hop = kOutputFrameShift);

// Rows where mask is 0 become exact zero vectors.
EmbeddingSequence ApplySilenceMask(const EmbeddingSequence &embeddings,
                                   const VadMask &mask);

// Truncates both sequences to the shorter length. Throws when the lengths
// differ by more than window_size / hop frames.
std::pair<FrameSequence, EmbeddingSequence> AlignLengths(
    const FrameSequence &features, const EmbeddingSequence &embeddings);

// Embedding file format (little endian, 24-byte header):
//   "EEMB" | u32 version=1 | u32 T | u32 E | u32 hop_ms | u32 window_ms |
//   f32[T*E] row-major
void SaveEmbeddings(const std::string &path, const EmbeddingSequence &seq);
EmbeddingSequence LoadEmbeddings(const std::string &path);

}  // namespace eend

#endif  // EEND_EMBEDDINGS_H_
