// eend/losses.h
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

#ifndef EEND_LOSSES_H_
#define EEND_LOSSES_H_

#include <cstdint>
#include <span>
#include <vector>

#include "eend/autograd.h"
#include "eend/common.h"
#include "eend/segments.h"

namespace eend {

// Largest speaker count handled by the exhaustive permutation search.
inline constexpr int32_t kMaxPitSpeakers = 6;

// Sum over s of -y log p - (1 - y) log(1 - p). Every p must lie strictly in
// (0, 1); clamp through the logit form instead of passing saturated values.
double Bce(std::span<const double> labels, std::span<const double> probs);

// Same quantity computed from logits: max(z, 0) - y z + log(1 + exp(-|z|)).
double BceWithLogits(double label, double logit);

// Existence targets: S ones followed by a single zero.
std::vector<double> AttractorLabels(int32_t num_speakers);

// H(l, p) / (1 + S) over S + 1 existence probabilities.
double AttractorExistenceLoss(std::span<const double> probs,
                              int32_t num_speakers);

struct PitResult {
  double loss = 0.0;
  // Output column s is matched with label column permutation[s].
  std::vector<int32_t> permutation;
};

// min over label-column permutations of sum_t H(y_t^perm, p_t), divided by
// T * S. Exhaustive over all S! permutations; ties go to the
// lexicographically first permutation.
PitResult PitLoss(const LabelMatrix &labels, const Matrix &posteriors);
PitResult PitLossFromLogits(const Matrix &labels, const Matrix &logits);

enum class TrainMode { kTrain, kAdapt };

// 1.0 for training from scratch, 0.1 for adaptation.
double AttractorWeight(TrainMode mode);

struct LossBundle {
  double diarization = 0.0;  // L_d
  double attractor = 0.0;    // L_alpha
  double alpha = 1.0;
  double total = 0.0;  // L_d + alpha * L_alpha
  std::vector<int32_t> permutation;
};

LossBundle TotalLoss(double diarization, double attractor, TrainMode mode,
                     std::vector<int32_t> permutation = {});

// Differentiable counterparts used in training. `labels` are T x S in {0, 1}.
ag::Var PitLossVar(ag::Var logits, const Matrix &labels,
                   std::vector<int32_t> *permutation = nullptr);
// `logits` are the S + 1 existence logits as an (S + 1) x 1 column.
ag::Var AttractorLossVar(ag::Var logits, int32_t num_speakers);

}  // namespace eend

#endif  // EEND_LOSSES_H_
