// eend/segments.h
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

#ifndef EEND_SEGMENTS_H_
#define EEND_SEGMENTS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "eend/common.h"

namespace eend {

struct Segment {
  std::string recording_id;
  std::string speaker;
  double onset = 0.0;     // seconds
  double duration = 0.0;  // seconds, > 0

  double End() const { return onset + duration; }
};

using SegmentList = std::vector<Segment>;

using BinaryMatrix =
    Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// T x S speaker activity on a fixed frame grid. Column s belongs to
// speakers[s] (may be empty for hypotheses without names).
struct LabelMatrix {
  BinaryMatrix data;
  std::vector<std::string> speakers;

  int32_t NumFrames() const { return static_cast<int32_t>(data.rows()); }
  int32_t NumSpeakers() const { return static_cast<int32_t>(data.cols()); }
  Matrix AsDouble() const { return data.cast<double>(); }
};

// RTTM: "SPEAKER <rec> 1 <onset> <dur> <NA> <NA> <spk> <NA> <NA>".
// Whitespace-tolerant, strict on the field count; blank lines and lines
// starting with ';' or '#' are skipped.
SegmentList ParseRttm(std::istream &is, const std::string &name = "<rttm>");
SegmentList ReadRttm(const std::string &path);
// Onsets and durations printed with two decimals.
void WriteRttm(std::ostream &os, const SegmentList &segments);
void WriteRttm(const std::string &path, const SegmentList &segments);

// Sorted, de-duplicated speaker names.
std::vector<std::string> SpeakerNames(const SegmentList &segments);

// Sorts by (speaker, onset) and merges overlapping/touching segments of the
// same speaker. Throws on non-positive or non-finite durations.
SegmentList MergeSegments(const SegmentList &segments);

// Frame t spans [t * shift, (t + 1) * shift). A speaker is active in frame t
// when its segments cover at least half of that span.
LabelMatrix SegmentsToLabels(const SegmentList &segments,
                             const std::vector<std::string> &speakers,
                             int32_t num_frames,
                             double frame_shift = kOutputFrameShift);
LabelMatrix SegmentsToLabels(const SegmentList &segments, int32_t num_frames,
                             double frame_shift = kOutputFrameShift);

// Runs of active frames become segments. Column s is named speakers[s] when
// given, otherwise "spk<s>".
SegmentList LabelsToSegments(const LabelMatrix &labels,
                             const std::string &recording_id,
                             double frame_shift = kOutputFrameShift);

}  // namespace eend

#endif  // EEND_SEGMENTS_H_
