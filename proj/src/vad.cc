// eend/vad.cc
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

#include "eend/vad.h"

#include <algorithm>
#include <cmath>
#include <vector>

namespace eend {

VadMask OracleMask(const SegmentList &reference, int32_t num_frames,
                   double frame_shift) {
  LabelMatrix labels = SegmentsToLabels(reference, num_frames, frame_shift);
  VadMask out;
  out.mask.assign(num_frames, 0);
  for (int32_t t = 0; t < num_frames; ++t) {
    out.mask[t] = labels.NumSpeakers() > 0 && labels.data.row(t).maxCoeff() > 0;
  }
  return out;
}

VadMask EnergyVad(const AudioSignal &audio, const EnergyVadOptions &opts) {
  audio.Validate();
  EEND_CHECK(opts.context >= 0, "VAD context must be non-negative");
  EEND_CHECK(opts.vote > 0.0 && opts.vote <= 1.0, "VAD vote must be in (0, 1]");
  int64_t n = static_cast<int64_t>(audio.samples.size());
  VadMask out;
  if (n < kFrameLength) return out;
  int32_t num_frames = static_cast<int32_t>((n - kFrameLength) / kFrameShift + 1);

  std::vector<double> log_energy(num_frames);
  double sum = 0.0;
  for (int32_t t = 0; t < num_frames; ++t) {
    const double *x = audio.samples.data() + static_cast<int64_t>(t) * kFrameShift;
    double e = 0.0;
    for (int32_t i = 0; i < kFrameLength; ++i) {
      double v = x[i] * 32768.0;
      e += v * v;
    }
    log_energy[t] = std::log(std::max(e, 1e-10));
    sum += log_energy[t];
  }
  double threshold = opts.base_threshold + opts.mean_scale * sum / num_frames;

  std::vector<uint8_t> fine(num_frames);
  for (int32_t t = 0; t < num_frames; ++t) {
    int32_t passed = 0, total = 0;
    for (int32_t u = t - opts.context; u <= t + opts.context; ++u) {
      if (u < 0 || u >= num_frames) continue;
      ++total;
      if (log_energy[u] > threshold) ++passed;
    }
    fine[t] = passed >= total * opts.vote;
  }

  int32_t num_out = (num_frames + kSubsampling - 1) / kSubsampling;
  out.mask.resize(num_out);
  for (int32_t t = 0; t < num_out; ++t) {
    int32_t lo = t * kSubsampling, hi = std::min(num_frames, lo + kSubsampling);
    int32_t speech = 0;
    for (int32_t u = lo; u < hi; ++u) speech += fine[u];
    out.mask[t] = 2 * speech >= hi - lo;
  }
  return out;
}

LabelMatrix GateHypothesis(const LabelMatrix &hypothesis, const VadMask &mask) {
  if (mask.size() != hypothesis.NumFrames()) {
    throw Error("VAD mask length " + std::to_string(mask.size()) +
                " does not match hypothesis length " +
                std::to_string(hypothesis.NumFrames()));
  }
  LabelMatrix out = hypothesis;
  for (int32_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) out.data.row(t).setZero();
  }
  return out;
}

SegmentList MaskToSegments(const VadMask &mask, const std::string &recording_id,
                           double frame_shift) {
  LabelMatrix labels;
  labels.speakers = {"speech"};
  labels.data.resize(mask.size(), 1);
  for (int32_t t = 0; t < mask.size(); ++t) labels.data(t, 0) = mask[t];
  return LabelsToSegments(labels, recording_id, frame_shift);
}

}  // namespace eend
