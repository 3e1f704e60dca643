// eend/segments.cc
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

#include "eend/segments.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace eend {

SegmentList ParseRttm(std::istream &is, const std::string &name) {
  SegmentList out;
  std::string line;
  int32_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> fields;
    for (std::string f; ls >> f;) fields.push_back(f);
    if (fields.empty() || fields[0][0] == ';' || fields[0][0] == '#') continue;
    std::string where = name + ":" + std::to_string(line_no);
    if (fields.size() != 10) {
      throw ParseError(where + ": expected 10 fields, got " +
                       std::to_string(fields.size()));
    }
    if (fields[0] != "SPEAKER") {
      throw ParseError(where + ": unsupported record type " + fields[0]);
    }
    Segment seg;
    seg.recording_id = fields[1];
    seg.speaker = fields[7];
    try {
      size_t used = 0;
      seg.onset = std::stod(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("onset");
      seg.duration = std::stod(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument("duration");
    } catch (const std::exception &) {
      throw ParseError(where + ": bad onset/duration");
    }
    if (!std::isfinite(seg.onset) || !std::isfinite(seg.duration) ||
        seg.duration < 0) {
      throw ParseError(where + ": invalid onset/duration");
    }
    // Zero-length records appear in the wild and carry no speech.
    if (seg.duration == 0) continue;
    out.push_back(std::move(seg));
  }
  return out;
}

SegmentList ReadRttm(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  return ParseRttm(is, path);
}

void WriteRttm(std::ostream &os, const SegmentList &segments) {
  char buf[64];
  for (const Segment &s : segments) {
    os << "SPEAKER " << s.recording_id << " 1 ";
    std::snprintf(buf, sizeof(buf), "%.2f %.2f", s.onset, s.duration);
    os << buf << " <NA> <NA> " << s.speaker << " <NA> <NA>\n";
  }
}

void WriteRttm(const std::string &path, const SegmentList &segments) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  WriteRttm(os, segments);
}

std::vector<std::string> SpeakerNames(const SegmentList &segments) {
  std::set<std::string> names;
  for (const Segment &s : segments) names.insert(s.speaker);
  return {names.begin(), names.end()};
}

SegmentList MergeSegments(const SegmentList &segments) {
  for (const Segment &s : segments) {
    if (!std::isfinite(s.onset) || !std::isfinite(s.duration) ||
        s.duration <= 0) {
      throw Error("segment of speaker '" + s.speaker +
                  "' has a non-positive or non-finite duration");
    }
  }
  SegmentList sorted = segments;
  std::sort(sorted.begin(), sorted.end(), [](const Segment &a, const Segment &b) {
    if (a.recording_id != b.recording_id) return a.recording_id < b.recording_id;
    if (a.speaker != b.speaker) return a.speaker < b.speaker;
    return a.onset < b.onset;
  });
  SegmentList out;
  for (const Segment &s : sorted) {
    if (!out.empty() && out.back().speaker == s.speaker &&
        out.back().recording_id == s.recording_id && s.onset <= out.back().End()) {
      double end = std::max(out.back().End(), s.End());
      out.back().duration = end - out.back().onset;
    } else {
      out.push_back(s);
    }
  }
  return out;
}

LabelMatrix SegmentsToLabels(const SegmentList &segments,
                             const std::vector<std::string> &speakers,
                             int32_t num_frames, double frame_shift) {
  EEND_CHECK(num_frames >= 0, "negative frame count");
  EEND_CHECK(frame_shift > 0, "frame shift must be positive");
  std::map<std::string, int32_t> column;
  for (size_t i = 0; i < speakers.size(); ++i) {
    column[speakers[i]] = static_cast<int32_t>(i);
  }
  Matrix coverage = Matrix::Zero(num_frames, static_cast<Eigen::Index>(speakers.size()));
  for (const Segment &s : MergeSegments(segments)) {
    auto it = column.find(s.speaker);
    if (it == column.end()) continue;
    int32_t first = std::max<int32_t>(0, static_cast<int32_t>(std::floor(s.onset / frame_shift)));
    int32_t last = std::min<int32_t>(num_frames - 1,
                                     static_cast<int32_t>(std::floor(s.End() / frame_shift)));
    for (int32_t t = first; t <= last; ++t) {
      double lo = std::max(s.onset, t * frame_shift);
      double hi = std::min(s.End(), (t + 1) * frame_shift);
      if (hi > lo) coverage(t, it->second) += hi - lo;
    }
  }
  LabelMatrix out;
  out.speakers = speakers;
  out.data.resize(num_frames, static_cast<Eigen::Index>(speakers.size()));
  const double half = 0.5 * frame_shift - 1e-9;
  for (Eigen::Index i = 0; i < coverage.size(); ++i) {
    out.data.data()[i] = coverage.data()[i] >= half ? 1 : 0;
  }
  return out;
}

LabelMatrix SegmentsToLabels(const SegmentList &segments, int32_t num_frames,
                             double frame_shift) {
  return SegmentsToLabels(segments, SpeakerNames(segments), num_frames,
                          frame_shift);
}

SegmentList LabelsToSegments(const LabelMatrix &labels,
                             const std::string &recording_id,
                             double frame_shift) {
  SegmentList out;
  int32_t num_frames = labels.NumFrames();
  for (int32_t s = 0; s < labels.NumSpeakers(); ++s) {
    std::string name = s < static_cast<int32_t>(labels.speakers.size())
                           ? labels.speakers[s]
                           : "spk" + std::to_string(s);
    int32_t t = 0;
    while (t < num_frames) {
      if (!labels.data(t, s)) {
        ++t;
        continue;
      }
      int32_t start = t;
      while (t < num_frames && labels.data(t, s)) ++t;
      out.push_back({recording_id, name, start * frame_shift,
                     (t - start) * frame_shift});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Segment &a, const Segment &b) {
    return a.onset < b.onset;
  });
  return out;
}

}  // namespace eend
