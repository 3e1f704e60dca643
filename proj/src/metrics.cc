// eend/metrics.cc
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

#include "eend/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace eend {

void DerBreakdown::Accumulate(const DerBreakdown &other) {
  fa += other.fa;
  miss += other.miss;
  se += other.se;
  total_speech += other.total_speech;
  der = total_speech > 0 ? (fa + miss + se) / total_speech : 0.0;
  mapping.insert(mapping.end(), other.mapping.begin(), other.mapping.end());
}

namespace {

// Maximizes sum_h joint(h, map[h]) over one-to-one partial maps. Returns the
// matched total; map[h] = -1 for unmapped hypothesis speakers.
double BestMapping(const Matrix &joint, std::vector<int32_t> *map) {
  const int32_t nh = static_cast<int32_t>(joint.rows());
  const int32_t nr = static_cast<int32_t>(joint.cols());
  if (nh > kMaxScoredSpeakers || nr > kMaxScoredSpeakers) {
    throw Error("DER: at most " + std::to_string(kMaxScoredSpeakers) +
                " speakers per side are supported (got " + std::to_string(nr) +
                " reference, " + std::to_string(nh) + " hypothesis)");
  }
  const int32_t n = std::max(nh, nr);
  std::vector<int32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  map->assign(nh, -1);
  do {
    double total = 0.0;
    for (int32_t h = 0; h < nh; ++h) {
      if (perm[h] < nr) total += joint(h, perm[h]);
    }
    if (total > best) {
      best = total;
      for (int32_t h = 0; h < nh; ++h) (*map)[h] = perm[h] < nr ? perm[h] : -1;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::max(best, 0.0);
}

DerBreakdown ScoreRecording(const SegmentList &ref_raw, const SegmentList &hyp_raw,
                            double collar) {
  SegmentList ref = MergeSegments(ref_raw);
  SegmentList hyp = MergeSegments(hyp_raw);
  std::vector<std::string> ref_names = SpeakerNames(ref), hyp_names = SpeakerNames(hyp);
  auto index_of = [](const std::vector<std::string> &names, const std::string &s) {
    return static_cast<int32_t>(std::lower_bound(names.begin(), names.end(), s) -
                                names.begin());
  };

  // Unscored collar zones, merged.
  std::vector<std::pair<double, double>> zones;
  if (collar > 0) {
    for (const Segment &s : ref) {
      zones.emplace_back(s.onset - collar, s.onset + collar);
      zones.emplace_back(s.End() - collar, s.End() + collar);
    }
    std::sort(zones.begin(), zones.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto &z : zones) {
      if (!merged.empty() && z.first <= merged.back().second) {
        merged.back().second = std::max(merged.back().second, z.second);
      } else {
        merged.push_back(z);
      }
    }
    zones = std::move(merged);
  }

  std::vector<double> cuts;
  for (const SegmentList *list : {&ref, &hyp}) {
    for (const Segment &s : *list) {
      cuts.push_back(s.onset);
      cuts.push_back(s.End());
    }
  }
  for (const auto &z : zones) {
    cuts.push_back(z.first);
    cuts.push_back(z.second);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  DerBreakdown out;
  Matrix joint = Matrix::Zero(static_cast<Eigen::Index>(hyp_names.size()),
                              static_cast<Eigen::Index>(ref_names.size()));
  double matchable = 0.0;
  size_t zone = 0;
  std::vector<int32_t> active_ref, active_hyp;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1], mid = 0.5 * (lo + hi), dur = hi - lo;
    while (zone < zones.size() && zones[zone].second <= mid) ++zone;
    if (zone < zones.size() && zones[zone].first <= mid) continue;
    active_ref.clear();
    active_hyp.clear();
    for (const Segment &s : ref) {
      if (s.onset <= mid && mid < s.End()) active_ref.push_back(index_of(ref_names, s.speaker));
    }
    for (const Segment &s : hyp) {
      if (s.onset <= mid && mid < s.End()) active_hyp.push_back(index_of(hyp_names, s.speaker));
    }
    const double nr = static_cast<double>(active_ref.size());
    const double nh = static_cast<double>(active_hyp.size());
    out.total_speech += nr * dur;
    out.miss += std::max(0.0, nr - nh) * dur;
    out.fa += std::max(0.0, nh - nr) * dur;
    matchable += std::min(nr, nh) * dur;
    for (int32_t h : active_hyp) {
      for (int32_t r : active_ref) joint(h, r) += dur;
    }
  }

  std::vector<int32_t> map;
  double correct = BestMapping(joint, &map);
  out.se = std::max(0.0, matchable - correct);
  for (size_t h = 0; h < map.size(); ++h) {
    if (map[h] >= 0) out.mapping.emplace_back(hyp_names[h], ref_names[map[h]]);
  }
  if (out.total_speech <= 0.0) {
    throw Error("DER undefined: no scored reference speech");
  }
  out.der = (out.fa + out.miss + out.se) / out.total_speech;
  return out;
}

std::map<std::string, SegmentList> ByRecording(const SegmentList &segments) {
  std::map<std::string, SegmentList> out;
  for (const Segment &s : segments) out[s.recording_id].push_back(s);
  return out;
}

}  // namespace

DerBreakdown ScoreDer(const SegmentList &reference, const SegmentList &hypothesis,
                      double collar) {
  return ScoreCorpus(reference, hypothesis, collar).total;
}

CorpusScore ScoreCorpus(const SegmentList &reference, const SegmentList &hypothesis,
                        double collar) {
  EEND_CHECK(collar >= 0, "collar must be non-negative");
  if (reference.empty()) throw Error("DER undefined: empty reference");
  auto refs = ByRecording(reference);
  auto hyps = ByRecording(hypothesis);
  CorpusScore out;
  for (const auto &[id, ref] : refs) {
    auto it = hyps.find(id);
    DerBreakdown d = ScoreRecording(ref, it == hyps.end() ? SegmentList{} : it->second,
                                    collar);
    out.total.Accumulate(d);
    out.recordings.emplace_back(id, std::move(d));
  }
  if (refs.size() == 1) out.total.mapping = out.recordings.front().second.mapping;
  return out;
}

DerBreakdown FrameDer(const LabelMatrix &reference, const LabelMatrix &hypothesis) {
  if (reference.NumFrames() != hypothesis.NumFrames()) {
    throw Error("frame DER: reference has " + std::to_string(reference.NumFrames()) +
                " frames, hypothesis " + std::to_string(hypothesis.NumFrames()));
  }
  const int32_t frames = reference.NumFrames();
  Matrix ref = reference.AsDouble(), hyp = hypothesis.AsDouble();
  DerBreakdown out;
  double matchable = 0.0;
  for (int32_t t = 0; t < frames; ++t) {
    double nr = reference.NumSpeakers() ? ref.row(t).sum() : 0.0;
    double nh = hypothesis.NumSpeakers() ? hyp.row(t).sum() : 0.0;
    out.total_speech += nr;
    out.miss += std::max(0.0, nr - nh);
    out.fa += std::max(0.0, nh - nr);
    matchable += std::min(nr, nh);
  }
  Matrix joint = hyp.transpose() * ref;
  std::vector<int32_t> map;
  double correct = BestMapping(joint, &map);
  out.se = std::max(0.0, matchable - correct);
  for (size_t h = 0; h < map.size(); ++h) {
    if (map[h] < 0) continue;
    auto name = [](const LabelMatrix &m, int32_t s) {
      return s < static_cast<int32_t>(m.speakers.size()) ? m.speakers[s]
                                                          : "spk" + std::to_string(s);
    };
    out.mapping.emplace_back(name(hypothesis, static_cast<int32_t>(h)),
                             name(reference, map[h]));
  }
  double errors = out.fa + out.miss + out.se;
  out.der = out.total_speech > 0 ? errors / out.total_speech : (errors > 0 ? 1.0 : 0.0);
  return out;
}

LabelMatrix BinarizePosteriors(const PosteriorMatrix &posteriors,
                               const DecodeOptions &opts) {
  EEND_CHECK(opts.threshold > 0.0 && opts.threshold < 1.0,
             "decoding threshold must be in (0, 1)");
  EEND_CHECK(opts.median_window >= 1 && opts.median_window % 2 == 1,
             "median window must be a positive odd number");
  const int32_t frames = posteriors.NumFrames(), speakers = posteriors.NumSpeakers();
  BinaryMatrix raw(frames, speakers);
  for (int32_t t = 0; t < frames; ++t) {
    for (int32_t s = 0; s < speakers; ++s) raw(t, s) = posteriors.data(t, s) > opts.threshold;
  }
  LabelMatrix out;
  out.data = raw;
  const int32_t half = opts.median_window / 2;
  if (half > 0) {
    for (int32_t s = 0; s < speakers; ++s) {
      for (int32_t t = 0; t < frames; ++t) {
        int32_t ones = 0;
        for (int32_t u = t - half; u <= t + half; ++u) {
          if (u >= 0 && u < frames) ones += raw(u, s);
        }
        out.data(t, s) = ones > half;
      }
    }
  }
  for (int32_t s = 0; s < speakers; ++s) out.speakers.push_back("spk" + std::to_string(s));
  return out;
}

SegmentList PosteriorsToSegments(const PosteriorMatrix &posteriors,
                                 const std::string &recording_id,
                                 const DecodeOptions &opts, double frame_shift) {
  return LabelsToSegments(BinarizePosteriors(posteriors, opts), recording_id,
                          frame_shift);
}

}  // namespace eend
