// eend/features.h
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

#ifndef EEND_FEATURES_H_
#define EEND_FEATURES_H_

#include <cstdint>
#include <string>

#include "eend/audio.h"
#include "eend/common.h"

namespace eend {

// T x F feature matrix. Frame t is stamped at t * frame_shift seconds.
struct FrameSequence {
  Matrix data;
  double frame_shift = 0.01;

  int32_t NumFrames() const { return static_cast<int32_t>(data.rows()); }
  int32_t Dim() const { return static_cast<int32_t>(data.cols()); }
};

struct FeatureOptions {
  int32_t context = kContext;          // frames spliced on each side
  int32_t subsampling = kSubsampling;
  // Subtract the per-utterance mean of each log-Mel bin before splicing.
  bool mean_normalize = false;
};

// 23 log-Mel bins, 25 ms Hann window, 10 ms shift, 256-point FFT over
// 0-4000 Hz. T = floor((n - 200) / 80) + 1; energies are floored at 1e-10
// before the log.
FrameSequence ComputeLogMel(const AudioSignal &audio);

// Concatenates frames t-left .. t+right, repeating the first/last frame at
// the edges.
FrameSequence SpliceContext(const FrameSequence &frames,
                            int32_t left = kContext, int32_t right = kContext);

// Keeps rows 0, factor, 2*factor, ...
FrameSequence Subsample(const FrameSequence &frames,
                        int32_t factor = kSubsampling);

// log-Mel -> splice -> subsample: the 345-dim, 100 ms encoder input.
FrameSequence ComputeFeatures(const AudioSignal &audio,
                              const FeatureOptions &opts = {});

// Feature dump format (little endian):
//   "EEFT" | u32 version=1 | u32 T | u32 F | f64 frame_shift | f32[T*F]
void WriteFeatures(const std::string &path, const FrameSequence &frames);
FrameSequence ReadFeatures(const std::string &path);

}  // namespace eend

#endif  // EEND_FEATURES_H_
