// eend/tests/der-oracle.h
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

#ifndef EEND_TESTS_DER_ORACLE_H_
#define EEND_TESTS_DER_ORACLE_H_

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "eend/segments.h"

namespace eend::testing {

struct MsScore {
  double fa = 0, miss = 0, se = 0, speech = 0;
};

// Scores one recording on a 1 ms grid: every millisecond is classified by
// its center, collar zones around merged reference boundaries are dropped, and the
// speaker mapping is searched over all injective hyp -> ref assignments.
inline MsScore MillisecondDer(const SegmentList &ref, const SegmentList &hyp, double collar) {
  double end = 0.0;
  for (const SegmentList *l : {&ref, &hyp}) {
    for (const Segment &s : *l) end = std::max(end, s.End() + collar);
  }
  const int n = static_cast<int>(std::ceil(end * 1000.0)) + 2;
  auto rasterize = [n](const SegmentList &l, std::vector<std::string> *names) {
    std::map<std::string, int> idx;
    for (const Segment &s : l) idx.emplace(s.speaker, 0);
    int k = 0;
    for (auto &[name, i] : idx) {
      i = k++;
      names->push_back(name);
    }
    std::vector<std::vector<uint8_t>> act(idx.size(), std::vector<uint8_t>(n, 0));
    for (const Segment &s : l) {
      for (int i = 0; i < n; ++i) {
        double t = (i + 0.5) / 1000.0;
        if (t >= s.onset && t < s.End()) act[idx[s.speaker]][i] = 1;
      }
    }
    return act;
  };
  std::vector<std::string> rn, hn;
  auto r = rasterize(ref, &rn);
  auto h = rasterize(hyp, &hn);
  std::vector<uint8_t> scored(n, 1);
  for (const Segment &s : MergeSegments(ref)) {
    for (double b : {s.onset, s.End()}) {
      for (int i = 0; i < n; ++i) {
        double t = (i + 0.5) / 1000.0;
        if (std::abs(t - b) <= collar && collar > 0) scored[i] = 0;
      }
    }
  }
  MsScore out;
  double matchable = 0;
  for (int i = 0; i < n; ++i) {
    if (!scored[i]) continue;
    int nr = 0, nh = 0;
    for (auto &v : r) nr += v[i];
    for (auto &v : h) nh += v[i];
    out.speech += nr;
    out.miss += std::max(0, nr - nh);
    out.fa += std::max(0, nh - nr);
    matchable += std::min(nr, nh);
  }
  // Best injective mapping by trying every ordering of reference indices
  // padded with "unmatched" slots.
  const int nr = static_cast<int>(r.size()), nh = static_cast<int>(h.size());
  std::vector<int> slots(std::max(nr, nh));
  std::iota(slots.begin(), slots.end(), 0);
  double best = 0;
  do {
    double c = 0;
    for (int j = 0; j < nh; ++j) {
      int k = slots[j];
      if (k >= nr) continue;
      for (int i = 0; i < n; ++i) c += scored[i] && h[j][i] && r[k][i];
    }
    best = std::max(best, c);
  } while (std::next_permutation(slots.begin(), slots.end()));
  out.se = matchable - best;
  out.fa /= 1000;
  out.miss /= 1000;
  out.se /= 1000;
  out.speech /= 1000;
  return out;
}

}  // namespace eend::testing

#endif  // EEND_TESTS_DER_ORACLE_H_
