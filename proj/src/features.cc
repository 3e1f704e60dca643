// eend/features.cc
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

#include "eend/features.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

#include "eend/binary-io.h"

namespace eend {

namespace {

constexpr int32_t kFftSize = 256;
constexpr int32_t kNumBins = kFftSize / 2 + 1;
constexpr double kLogFloor = 1e-10;
constexpr double kLowFreq = 0.0;
constexpr double kHighFreq = 4000.0;

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

// Immutable analysis tables plus an FFTW plan built once. The plan is only
// used through fftw_execute_dft_r2c with caller-owned buffers, which FFTW
// documents as thread safe.
class MelAnalyzer {
 public:
  static const MelAnalyzer &Get() {
    static MelAnalyzer instance;
    return instance;
  }

  // Writes kNumMelBins log energies for one 200-sample frame.
  void Frame(const double *samples, double *out) const {
    std::vector<double> buf(kFftSize, 0.0);
    for (int32_t i = 0; i < kFrameLength; ++i) buf[i] = samples[i] * window_[i];
    std::vector<fftw_complex> spec(kNumBins);
    fftw_execute_dft_r2c(plan_, buf.data(), spec.data());
    double power[kNumBins];
    for (int32_t k = 0; k < kNumBins; ++k) {
      power[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    }
    for (int32_t m = 0; m < kNumMelBins; ++m) {
      double e = 0.0;
      for (int32_t k = 0; k < kNumBins; ++k) e += weights_(m, k) * power[k];
      out[m] = std::log(std::max(e, kLogFloor));
    }
  }

 private:
  MelAnalyzer() : weights_(kNumMelBins, kNumBins) {
    for (int32_t i = 0; i < kFrameLength; ++i) {
      window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / kFrameLength);
    }
    double mel_lo = HzToMel(kLowFreq), mel_hi = HzToMel(kHighFreq);
    double step = (mel_hi - mel_lo) / (kNumMelBins + 1);
    weights_.setZero();
    for (int32_t m = 0; m < kNumMelBins; ++m) {
      double left = mel_lo + m * step, center = left + step,
             right = center + step;
      for (int32_t k = 0; k < kNumBins; ++k) {
        double mel = HzToMel(static_cast<double>(k) * kSampleRate / kFftSize);
        if (mel > left && mel < right) {
          weights_(m, k) = mel <= center ? (mel - left) / (center - left)
                                         : (right - mel) / (right - center);
        }
      }
    }
    std::vector<double> in(kFftSize);
    std::vector<fftw_complex> out(kNumBins);
    plan_ = fftw_plan_dft_r2c_1d(kFftSize, in.data(), out.data(),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan_ == nullptr) throw Error("FFTW planning failed");
  }

  double window_[kFrameLength];
  Matrix weights_;
  fftw_plan plan_;
};

}  // namespace

int32_t NumOutputFrames(int64_t num_samples) {
  if (num_samples < kFrameLength) return 0;
  int64_t t = (num_samples - kFrameLength) / kFrameShift + 1;
  return static_cast<int32_t>((t + kSubsampling - 1) / kSubsampling);
}

FrameSequence ComputeLogMel(const AudioSignal &audio) {
  audio.Validate();
  int64_t n = static_cast<int64_t>(audio.samples.size());
  if (n < kFrameLength) {
    throw Error("audio too short: " + std::to_string(n) +
                " samples, need at least " + std::to_string(kFrameLength));
  }
  int32_t num_frames =
      static_cast<int32_t>((n - kFrameLength) / kFrameShift + 1);
  const MelAnalyzer &analyzer = MelAnalyzer::Get();
  FrameSequence out;
  out.frame_shift = static_cast<double>(kFrameShift) / kSampleRate;
  out.data.resize(num_frames, kNumMelBins);
  for (int32_t t = 0; t < num_frames; ++t) {
    analyzer.Frame(audio.samples.data() + static_cast<int64_t>(t) * kFrameShift,
                   out.data.row(t).data());
  }
  return out;
}

FrameSequence SpliceContext(const FrameSequence &frames, int32_t left,
                            int32_t right) {
  EEND_CHECK(left >= 0 && right >= 0, "negative splice context");
  int32_t num_frames = frames.NumFrames(), dim = frames.Dim();
  EEND_CHECK(num_frames > 0, "cannot splice an empty sequence");
  int32_t width = left + right + 1;
  FrameSequence out;
  out.frame_shift = frames.frame_shift;
  out.data.resize(num_frames, static_cast<Eigen::Index>(dim) * width);
  for (int32_t t = 0; t < num_frames; ++t) {
    for (int32_t j = 0; j < width; ++j) {
      int32_t src = std::clamp(t - left + j, 0, num_frames - 1);
      out.data.block(t, static_cast<Eigen::Index>(j) * dim, 1, dim) =
          frames.data.row(src);
    }
  }
  return out;
}

FrameSequence Subsample(const FrameSequence &frames, int32_t factor) {
  if (factor < 1) throw Error("subsampling factor must be >= 1");
  int32_t num_frames = frames.NumFrames();
  int32_t num_out = (num_frames + factor - 1) / factor;
  FrameSequence out;
  out.frame_shift = frames.frame_shift * factor;
  out.data.resize(num_out, frames.Dim());
  for (int32_t t = 0; t < num_out; ++t) out.data.row(t) = frames.data.row(t * factor);
  return out;
}

FrameSequence ComputeFeatures(const AudioSignal &audio,
                              const FeatureOptions &opts) {
  FrameSequence logmel = ComputeLogMel(audio);
  if (opts.mean_normalize) {
    RowVector mean = logmel.data.colwise().mean();
    logmel.data.rowwise() -= mean;
  }
  return Subsample(SpliceContext(logmel, opts.context, opts.context),
                   opts.subsampling);
}

void WriteFeatures(const std::string &path, const FrameSequence &frames) {
  ByteWriter w;
  w.Tag("EEFT");
  w.U32(1);
  w.U32(static_cast<uint32_t>(frames.NumFrames()));
  w.U32(static_cast<uint32_t>(frames.Dim()));
  w.F64(frames.frame_shift);
  for (Eigen::Index i = 0; i < frames.data.size(); ++i) {
    w.F32(static_cast<float>(frames.data.data()[i]));
  }
  w.Save(path);
}

FrameSequence ReadFeatures(const std::string &path) {
  std::vector<char> bytes = ReadFileBytes(path);
  ByteReader r(bytes, path);
  if (r.Tag() != "EEFT") throw ParseError(path + ": bad magic");
  uint32_t version = r.U32();
  if (version != 1) {
    throw ParseError(path + ": unsupported version " + std::to_string(version));
  }
  uint32_t rows = r.U32(), cols = r.U32();
  FrameSequence out;
  out.frame_shift = r.F64();
  uint64_t expected = static_cast<uint64_t>(rows) * cols * sizeof(float);
  if (r.Remaining() != expected) {
    throw ParseError(path + ": payload size does not match header");
  }
  out.data.resize(rows, cols);
  for (Eigen::Index i = 0; i < out.data.size(); ++i) out.data.data()[i] = r.F32();
  return out;
}

}  // namespace eend
