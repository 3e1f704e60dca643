// eend/losses.cc
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

#include "eend/losses.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace eend {

namespace {

// cost(s, k): sum over frames of H(y[., k], output column s).
template <typename ElementLoss>
PitResult SearchPermutations(const Matrix &labels, const Matrix &outputs,
                             ElementLoss element_loss) {
  const Eigen::Index frames = labels.rows(), speakers = labels.cols();
  if (outputs.rows() != frames || outputs.cols() != speakers) {
    throw Error("PIT: label shape " + std::to_string(frames) + "x" +
                std::to_string(speakers) + " differs from output shape " +
                std::to_string(outputs.rows()) + "x" + std::to_string(outputs.cols()));
  }
  if (speakers < 1) throw Error("PIT: need at least one speaker");
  if (speakers > kMaxPitSpeakers) {
    throw Error("PIT: " + std::to_string(speakers) +
                " speakers exceeds the exhaustive-search limit of " +
                std::to_string(kMaxPitSpeakers));
  }
  if (frames < 1) throw Error("PIT: empty sequence");
  Matrix cost = Matrix::Zero(speakers, speakers);
  for (Eigen::Index s = 0; s < speakers; ++s) {
    for (Eigen::Index k = 0; k < speakers; ++k) {
      double c = 0.0;
      for (Eigen::Index t = 0; t < frames; ++t) c += element_loss(labels(t, k), outputs(t, s));
      cost(s, k) = c;
    }
  }
  std::vector<int32_t> perm(speakers);
  std::iota(perm.begin(), perm.end(), 0);
  PitResult best;
  best.loss = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Eigen::Index s = 0; s < speakers; ++s) total += cost(s, perm[s]);
    if (total < best.loss) {
      best.loss = total;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.loss /= static_cast<double>(frames * speakers);
  return best;
}

double ProbBce(double y, double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error("BCE: probability " + std::to_string(p) + " outside (0, 1)");
  }
  return -y * std::log(p) - (1.0 - y) * std::log1p(-p);
}

}  // namespace

double Bce(std::span<const double> labels, std::span<const double> probs) {
  if (labels.size() != probs.size()) throw Error("BCE: length mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) sum += ProbBce(labels[i], probs[i]);
  return sum;
}

double BceWithLogits(double label, double logit) {
  return std::max(logit, 0.0) - label * logit + std::log1p(std::exp(-std::abs(logit)));
}

std::vector<double> AttractorLabels(int32_t num_speakers) {
  EEND_CHECK(num_speakers >= 0, "negative speaker count");
  std::vector<double> l(num_speakers + 1, 1.0);
  l.back() = 0.0;
  return l;
}

double AttractorExistenceLoss(std::span<const double> probs,
                              int32_t num_speakers) {
  if (static_cast<int64_t>(probs.size()) != num_speakers + 1) {
    throw Error("attractor loss: expected " + std::to_string(num_speakers + 1) +
                " probabilities, got " + std::to_string(probs.size()));
  }
  std::vector<double> labels = AttractorLabels(num_speakers);
  return Bce(labels, probs) / (1.0 + num_speakers);
}

PitResult PitLoss(const LabelMatrix &labels, const Matrix &posteriors) {
  return SearchPermutations(labels.AsDouble(), posteriors, ProbBce);
}

PitResult PitLossFromLogits(const Matrix &labels, const Matrix &logits) {
  return SearchPermutations(labels, logits, BceWithLogits);
}

double AttractorWeight(TrainMode mode) {
  return mode == TrainMode::kTrain ? 1.0 : 0.1;
}

LossBundle TotalLoss(double diarization, double attractor, TrainMode mode,
                     std::vector<int32_t> permutation) {
  LossBundle b;
  b.diarization = diarization;
  b.attractor = attractor;
  b.alpha = AttractorWeight(mode);
  b.total = diarization + b.alpha * attractor;
  b.permutation = std::move(permutation);
  return b;
}

ag::Var PitLossVar(ag::Var logits, const Matrix &labels,
                   std::vector<int32_t> *permutation) {
  PitResult pit = PitLossFromLogits(labels, logits.value());
  if (permutation != nullptr) *permutation = pit.permutation;
  // Column s is the target of output column s.
  Matrix target(labels.rows(), labels.cols());
  for (Eigen::Index s = 0; s < labels.cols(); ++s) {
    target.col(s) = labels.col(pit.permutation[s]);
  }
  const double norm = 1.0 / static_cast<double>(labels.size());
  Matrix v(1, 1);
  v(0, 0) = pit.loss;
  int32_t il = logits.id();
  return logits.tape()->Push(
      std::move(v), {logits}, [il, target, norm](ag::Tape &tape, int32_t self) {
        if (!tape.RequiresGrad(il)) return;
        double g = tape.GradOf(self)(0, 0);
        Matrix d = tape.Value(il).unaryExpr([](double z) { return eend::Sigmoid(z); }) - target;
        tape.AddGradExpr(il, d * (g * norm));
      });
}

ag::Var AttractorLossVar(ag::Var logits, int32_t num_speakers) {
  if (logits.cols() != 1 || logits.rows() != num_speakers + 1) {
    throw Error("attractor loss: expected " + std::to_string(num_speakers + 1) +
                " x 1 logits");
  }
  std::vector<double> labels = AttractorLabels(num_speakers);
  const double norm = 1.0 / (1.0 + num_speakers);
  double loss = 0.0;
  for (int32_t s = 0; s <= num_speakers; ++s) {
    loss += BceWithLogits(labels[s], logits.value()(s, 0));
  }
  Matrix v(1, 1);
  v(0, 0) = loss * norm;
  int32_t il = logits.id();
  return logits.tape()->Push(
      std::move(v), {logits}, [il, labels, norm](ag::Tape &tape, int32_t self) {
        if (!tape.RequiresGrad(il)) return;
        double g = tape.GradOf(self)(0, 0);
        const Matrix &z = tape.Value(il);
        Matrix d(z.rows(), 1);
        for (Eigen::Index s = 0; s < z.rows(); ++s) {
          d(s, 0) = (eend::Sigmoid(z(s, 0)) - labels[s]) * g * norm;
        }
        tape.AddGrad(il, d);
      });
}

}  // namespace eend
