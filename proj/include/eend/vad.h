// eend/vad.h
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

#ifndef EEND_VAD_H_
#define EEND_VAD_H_

#include <cstdint>
#include <string>

#include "eend/audio.h"
#include "eend/embeddings.h"
#include "eend/segments.h"

namespace eend {

// Frame t is speech iff some reference speaker is active in it under the
// half-frame coverage rule of SegmentsToLabels().
VadMask OracleMask(const SegmentList &reference, int32_t num_frames,
                   double frame_shift = kOutputFrameShift);

struct EnergyVadOptions {
  double mean_scale = 0.5;
  double base_threshold = 5.0;  // added to mean_scale * mean log energy
  int32_t context = 2;          // frames on each side
  double vote = 0.6;            // required proportion of passing frames
};

// Kaldi-style energy VAD on 25 ms / 10 ms frames of 16-bit-scaled samples,
// reduced to the 100 ms grid (a 100 ms frame is speech when at least half of
// its 10 ms frames are). Returns NumOutputFrames() entries.
VadMask EnergyVad(const AudioSignal &audio, const EnergyVadOptions &opts = {});

// Zeroes every speaker column where mask is 0.
LabelMatrix GateHypothesis(const LabelMatrix &hypothesis, const VadMask &mask);

// Speech runs as segments with speaker label "speech".
SegmentList MaskToSegments(const VadMask &mask, const std::string &recording_id,
                           double frame_shift = kOutputFrameShift);

}  // namespace eend

#endif  // EEND_VAD_H_
