// eend/embeddings.cc
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

#include "eend/embeddings.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "eend/binary-io.h"

namespace eend {

namespace {

constexpr int32_t kNumStats = 2 * kNumMelBins;

bool IsSupportedWindow(double window_size) {
  for (double w : {1.0, 2.0, 3.0}) {
    if (std::abs(window_size - w) < 1e-9) return true;
  }
  return false;
}

}  // namespace

ToyEmbedder::ToyEmbedder(uint64_t seed, int32_t dim)
    : dim_(dim), projection_(dim, kNumStats), bias_(dim) {
  EEND_CHECK(dim > 0, "embedding dimension must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kNumStats));
  for (Eigen::Index i = 0; i < projection_.size(); ++i) {
    projection_.data()[i] = normal(rng) * scale;
  }
  for (int32_t i = 0; i < dim; ++i) bias_[i] = 0.05 * normal(rng);
}

Vector ToyEmbedder::WindowStatistics(std::span<const double> window) {
  Vector stats = Vector::Zero(kNumStats);
  if (window.size() < static_cast<size_t>(kFrameLength)) return stats;
  if (std::all_of(window.begin(), window.end(), [](double x) { return x == 0.0; })) {
    return stats;
  }
  AudioSignal audio;
  audio.samples.assign(window.begin(), window.end());
  Matrix logmel = ComputeLogMel(audio).data;
  RowVector mean = logmel.colwise().mean();
  RowVector var = (logmel.rowwise() - mean).array().square().colwise().mean();
  double level = mean.mean();
  for (int32_t b = 0; b < kNumMelBins; ++b) {
    stats[b] = mean[b] - level;
    stats[kNumMelBins + b] = std::sqrt(var[b]);
  }
  return stats;
}

Vector ToyEmbedder::Embed(std::span<const double> window) const {
  Vector y = projection_ * WindowStatistics(window) + bias_;
  return y / y.norm();
}

EmbeddingSequence ExtractEmbeddings(const AudioSignal &audio,
                                    const EmbeddingProvider &provider,
                                    double window_size, double hop) {
  audio.Validate();
  if (!IsSupportedWindow(window_size)) {
    throw Error("embedding window must be 1, 2 or 3 seconds, got " +
                std::to_string(window_size));
  }
  if (std::abs(hop - kOutputFrameShift) > 1e-9) {
    throw Error("embedding hop must be 0.1 s to match the acoustic frames");
  }
  const int64_t n = static_cast<int64_t>(audio.samples.size());
  const int64_t hop_samples = std::llround(hop * audio.sample_rate);
  if (n < hop_samples) throw Error("audio shorter than one embedding hop");
  const int32_t num_frames = NumOutputFrames(n);
  const int64_t half = std::llround(0.5 * window_size * audio.sample_rate);

  EmbeddingSequence out;
  out.window_size = window_size;
  out.hop = hop;
  out.data.resize(num_frames, provider.Dim());
  std::span<const double> all(audio.samples);
  for (int32_t t = 0; t < num_frames; ++t) {
    int64_t center = t * hop_samples;
    int64_t begin = std::max<int64_t>(0, center - half);
    int64_t end = std::min<int64_t>(n, center + half);
    Vector e = provider.Embed(all.subspan(begin, end - begin));
    if (e.size() != provider.Dim()) throw Error("provider returned wrong dimension");
    out.data.row(t) = e.transpose();
  }
  return out;
}

EmbeddingSequence ApplySilenceMask(const EmbeddingSequence &embeddings,
                                   const VadMask &mask) {
  if (mask.size() != embeddings.NumFrames()) {
    throw Error("VAD mask length " + std::to_string(mask.size()) +
                " does not match " + std::to_string(embeddings.NumFrames()) +
                " embedding rows");
  }
  EmbeddingSequence out = embeddings;
  for (int32_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) out.data.row(t).setZero();
  }
  return out;
}

std::pair<FrameSequence, EmbeddingSequence> AlignLengths(
    const FrameSequence &features, const EmbeddingSequence &embeddings) {
  int32_t tx = features.NumFrames(), tb = embeddings.NumFrames();
  int32_t tolerance =
      static_cast<int32_t>(std::llround(embeddings.window_size / embeddings.hop));
  if (std::abs(tx - tb) > tolerance) {
    throw Error("feature/embedding length mismatch (" + std::to_string(tx) +
                " vs " + std::to_string(tb) +
                " frames): check frame shift and embedding hop settings");
  }
  int32_t t = std::min(tx, tb);
  FrameSequence x = features;
  EmbeddingSequence b = embeddings;
  x.data.conservativeResize(t, Eigen::NoChange);
  b.data.conservativeResize(t, Eigen::NoChange);
  return {std::move(x), std::move(b)};
}

void SaveEmbeddings(const std::string &path, const EmbeddingSequence &seq) {
  ByteWriter w;
  w.Tag("EEMB");
  w.U32(1);
  w.U32(static_cast<uint32_t>(seq.NumFrames()));
  w.U32(static_cast<uint32_t>(seq.Dim()));
  w.U32(static_cast<uint32_t>(std::lround(seq.hop * 1000)));
  w.U32(static_cast<uint32_t>(std::lround(seq.window_size * 1000)));
  for (Eigen::Index i = 0; i < seq.data.size(); ++i) {
    w.F32(static_cast<float>(seq.data.data()[i]));
  }
  w.Save(path);
}

EmbeddingSequence LoadEmbeddings(const std::string &path) {
  std::vector<char> bytes = ReadFileBytes(path);
  ByteReader r(bytes, path);
  if (r.Tag() != "EEMB") throw ParseError(path + ": bad magic");
  uint32_t version = r.U32();
  if (version != 1) {
    throw ParseError(path + ": unsupported version " + std::to_string(version));
  }
  uint32_t rows = r.U32(), dim = r.U32();
  uint32_t hop_ms = r.U32(), window_ms = r.U32();
  if (dim == 0 || hop_ms == 0) throw ParseError(path + ": invalid header");
  uint64_t expected = static_cast<uint64_t>(rows) * dim * sizeof(float);
  if (r.Remaining() != expected) {
    throw ParseError(path + ": payload of " + std::to_string(r.Remaining()) +
                     " bytes does not match header (" + std::to_string(rows) +
                     " x " + std::to_string(dim) + ")");
  }
  EmbeddingSequence out;
  out.hop = hop_ms / 1000.0;
  out.window_size = window_ms / 1000.0;
  out.data.resize(rows, dim);
  for (Eigen::Index i = 0; i < out.data.size(); ++i) out.data.data()[i] = r.F32();
  return out;
}

}  // namespace eend
