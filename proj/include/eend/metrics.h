// eend/metrics.h
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

#ifndef EEND_METRICS_H_
#define EEND_METRICS_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eend/model.h"
#include "eend/segments.h"

namespace eend {

struct DerBreakdown {
  double fa = 0.0;    // false alarm
  double miss = 0.0;  // missed speech
  double se = 0.0;    // speaker confusion
  double total_speech = 0.0;
  double der = 0.0;   // (fa + miss + se) / total_speech
  // (hypothesis speaker, reference speaker) pairs of the optimal mapping.
  std::vector<std::pair<std::string, std::string>> mapping;

  // Adds the components of `other` and recomputes der.
  void Accumulate(const DerBreakdown &other);
};

inline constexpr double kDefaultCollar = 0.25;
inline constexpr int32_t kMaxScoredSpeakers = 6;

// Time-based DER in seconds. A region of +/- collar around every reference
// segment boundary is not scored. Overlap is scored per simultaneous
// speaker: in each region miss = max(0, Nref - Nhyp), fa = max(0, Nhyp -
// Nref), se = min(Nref, Nhyp) - Ncorrect, where Ncorrect counts reference
// speakers matched by their mapped hypothesis speaker. The one-to-one
// speaker mapping maximizing the matched time is found by exhaustive search
// (at most 6 speakers on either side). Same-speaker segments are merged
// first. Segments of several recordings are scored per recording and
// summed.
DerBreakdown ScoreDer(const SegmentList &reference, const SegmentList &hypothesis,
                      double collar = kDefaultCollar);

struct CorpusScore {
  std::vector<std::pair<std::string, DerBreakdown>> recordings;  // sorted by id
  DerBreakdown total;
};

// Per-recording scores plus the corpus total (sum of components over sum of
// speech). Recordings present only in the hypothesis are ignored.
CorpusScore ScoreCorpus(const SegmentList &reference, const SegmentList &hypothesis,
                        double collar = kDefaultCollar);

// Frame-level DER without collar; components are frame counts. The speaker
// columns of hyp are mapped onto ref optimally. Both must have the same
// number of frames.
DerBreakdown FrameDer(const LabelMatrix &reference, const LabelMatrix &hypothesis);

struct DecodeOptions {
  double threshold = 0.5;
  int32_t median_window = 11;  // odd; 1 disables filtering
};

// p > threshold, then a per-speaker median filter (binary majority vote with
// zero padding at the edges).
LabelMatrix BinarizePosteriors(const PosteriorMatrix &posteriors,
                               const DecodeOptions &opts = {});

SegmentList PosteriorsToSegments(const PosteriorMatrix &posteriors,
                                 const std::string &recording_id,
                                 const DecodeOptions &opts = {},
                                 double frame_shift = kOutputFrameShift);

}  // namespace eend

#endif  // EEND_METRICS_H_
