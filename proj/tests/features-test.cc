// eend/tests/features-test.cc
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
#include "eend/binary-io.h"

#include <cmath>
#include <complex>

#include "doctest.h"
#include "test-util.h"

using namespace eend;
using eend::testing::Noise;
using eend::testing::Tone;

namespace {

// Direct DFT log-Mel of one frame, written against the definitions
// (periodic Hann, 256-point zero padded DFT, HTK triangular filters).
std::vector<double> NaiveLogMel(const std::vector<double> &x, size_t offset) {
  const int n_fft = 256;
  std::vector<double> power(n_fft / 2 + 1, 0.0);
  for (int k = 0; k <= n_fft / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < 200; ++i) {
      double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / 200.0);
      acc += x[offset + i] * w * std::polar(1.0, -2.0 * M_PI * k * i / n_fft);
    }
    power[k] = std::norm(acc);
  }
  auto mel = [](double f) { return 1127.0 * std::log(1.0 + f / 700.0); };
  double top = mel(4000.0), step = top / 24.0;
  std::vector<double> out(23);
  for (int m = 0; m < 23; ++m) {
    double e = 0.0;
    for (int k = 0; k <= n_fft / 2; ++k) {
      double v = mel(k * 8000.0 / n_fft);
      double lo = m * step, c = lo + step, hi = c + step;
      double w = 0.0;
      if (v > lo && v <= c) w = (v - lo) / step;
      if (v > c && v < hi) w = (hi - v) / step;
      e += w * power[k];
    }
    out[m] = std::log(std::max(e, 1e-10));
  }
  return out;
}

}  // namespace

TEST_CASE("logmel frame count for one second") {
  FrameSequence f = ComputeLogMel(Noise(1.0, 0.3, 1));
  CHECK(f.NumFrames() == (8000 - 200) / 80 + 1);
  CHECK(f.NumFrames() == 98);
  CHECK(f.Dim() == 23);
  CHECK(f.frame_shift == doctest::Approx(0.01));
}

TEST_CASE("logmel of silence is the constant floor") {
  AudioSignal a;
  a.samples.assign(4000, 0.0);
  FrameSequence f = ComputeLogMel(a);
  for (Eigen::Index i = 0; i < f.data.size(); ++i) {
    CHECK(f.data.data()[i] == std::log(1e-10));
  }
}

TEST_CASE("logmel rejects short audio and wrong rate") {
  AudioSignal a;
  a.samples.assign(160, 0.1);
  CHECK_THROWS_AS(ComputeLogMel(a), Error);
  AudioSignal b = Noise(1.0, 0.1, 2);
  b.sample_rate = 16000;
  CHECK_THROWS_AS(ComputeLogMel(b), Error);
  AudioSignal c = Noise(1.0, 0.1, 2);
  c.samples[10] = NAN;
  CHECK_THROWS_AS(ComputeLogMel(c), Error);
}

TEST_CASE("logmel matches a direct DFT evaluation") {
  AudioSignal a = Noise(0.2, 0.5, 3);
  for (size_t i = 0; i < a.samples.size(); ++i) {
    a.samples[i] += 0.3 * std::sin(2.0 * M_PI * 440.0 * i / 8000.0);
  }
  FrameSequence f = ComputeLogMel(a);
  for (int t : {0, 3, f.NumFrames() - 1}) {
    std::vector<double> ref = NaiveLogMel(a.samples, static_cast<size_t>(t) * 80);
    for (int m = 0; m < 23; ++m) CHECK(f.data(t, m) == doctest::Approx(ref[m]).epsilon(1e-9));
  }
}

TEST_CASE("tone energy lands in the matching mel band") {
  FrameSequence f = ComputeLogMel(Tone(0.5, 1000.0, 0.5));
  Eigen::Index best;
  f.data.row(10).maxCoeff(&best);
  auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  double step = mel(4000.0) / 24.0;
  // Band m peaks at (m + 1) * step; 1 kHz sits between two centers.
  double pos = mel(1000.0) / step - 1.0;
  CHECK(std::abs(static_cast<double>(best) - pos) <= 1.0);
}

TEST_CASE("splice context shapes and edges") {
  FrameSequence in;
  in.data = Matrix(100, 23);
  for (int t = 0; t < 100; ++t) in.data.row(t).setConstant(t);
  FrameSequence out = SpliceContext(in);
  CHECK(out.NumFrames() == 100);
  CHECK(out.Dim() == 345);
  // Row 0: the first 8 blocks repeat frame 0, then frames 1..7.
  for (int j = 0; j < 15; ++j) {
    CHECK(out.data(0, j * 23) == std::max(0, j - 7));
    CHECK(out.data(99, j * 23) == std::min(99, 92 + j));
    CHECK(out.data(50, j * 23 + 5) == 43 + j);
  }
}

TEST_CASE("splice of a constant sequence and of a single frame") {
  FrameSequence in;
  in.data = Matrix::Constant(20, 23, 1.5);
  FrameSequence out = SpliceContext(in);
  CHECK((out.data.array() == 1.5).all());

  FrameSequence one;
  one.data = Matrix::Random(1, 23);
  FrameSequence s = SpliceContext(one);
  REQUIRE(s.NumFrames() == 1);
  for (int j = 0; j < 15; ++j) CHECK(s.data.block(0, j * 23, 1, 23) == one.data);
}

TEST_CASE("subsample keeps every factor-th row") {
  FrameSequence in;
  in.data = Matrix(98, 2);
  for (int t = 0; t < 98; ++t) in.data.row(t).setConstant(t);
  FrameSequence out = Subsample(in, 10);
  CHECK(out.NumFrames() == 10);
  CHECK(out.frame_shift == doctest::Approx(0.1));
  for (int t = 0; t < 10; ++t) CHECK(out.data(t, 0) == 10 * t);

  FrameSequence same = Subsample(in, 1);
  CHECK(same.data == in.data);

  FrameSequence five;
  five.data = Matrix::Random(5, 3);
  FrameSequence first = Subsample(five, 10);
  REQUIRE(first.NumFrames() == 1);
  CHECK(first.data.row(0) == five.data.row(0));

  CHECK_THROWS_AS(Subsample(in, 0), Error);
}

TEST_CASE("full pipeline gives 345 dims at 100 ms") {
  AudioSignal a = Noise(3.0, 0.2, 5);
  FrameSequence x = ComputeFeatures(a);
  CHECK(x.Dim() == 345);
  CHECK(x.frame_shift == doctest::Approx(0.1));
  CHECK(x.NumFrames() == NumOutputFrames(static_cast<int64_t>(a.samples.size())));
  CHECK(x.NumFrames() == 30);
  FrameSequence again = ComputeFeatures(a);
  CHECK(x.data == again.data);
  CHECK(x.data.allFinite());
}

TEST_CASE("mean normalization is optional") {
  AudioSignal a = Noise(2.0, 0.2, 6);
  FeatureOptions opts;
  opts.mean_normalize = true;
  FrameSequence x = ComputeFeatures(a, opts);
  FrameSequence raw = ComputeFeatures(a);
  CHECK(x.data != raw.data);
  FrameSequence logmel = ComputeLogMel(a);
  CHECK(logmel.data.colwise().mean().norm() > 1.0);
}

TEST_CASE("feature file round trip") {
  eend::testing::TempDir dir("feat");
  FrameSequence x = ComputeFeatures(Noise(1.5, 0.2, 7));
  WriteFeatures(dir / "x.feat", x);
  FrameSequence y = ReadFeatures(dir / "x.feat");
  CHECK(y.frame_shift == x.frame_shift);
  CHECK(y.data == x.data.cast<float>().cast<double>());

  std::vector<char> bytes = ReadFileBytes(dir / "x.feat");
  CHECK(std::string(bytes.data(), 4) == "EEFT");
  bytes.resize(bytes.size() - 4);
  ByteWriter w;
  w.Str(std::string(bytes.begin(), bytes.end()));
  w.Save(dir / "bad.feat");
  CHECK_THROWS_AS(ReadFeatures(dir / "bad.feat"), ParseError);
}
