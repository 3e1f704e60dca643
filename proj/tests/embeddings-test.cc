// eend/tests/embeddings-test.cc
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

#include <cstring>

#include "doctest.h"
#include "eend/binary-io.h"
#include "eend/simulate.h"
#include "test-util.h"

using namespace eend;
using eend::testing::Noise;

namespace {

class ConstantProvider : public EmbeddingProvider {
 public:
  int32_t Dim() const override { return 4; }
  Vector Embed(std::span<const double>) const override {
    return Vector::LinSpaced(4, 1.0, 4.0);
  }
};

// Records the window bounds it was called with (as sample offsets).
class SpanProvider : public EmbeddingProvider {
 public:
  explicit SpanProvider(const double *base) : base_(base) {}
  int32_t Dim() const override { return 2; }
  Vector Embed(std::span<const double> w) const override {
    Vector v(2);
    v << static_cast<double>(w.data() - base_), static_cast<double>(w.size());
    return v;
  }

 private:
  const double *base_;
};

double Cosine(const Vector &a, const Vector &b) { return a.dot(b) / (a.norm() * b.norm()); }

}  // namespace

TEST_CASE("ten seconds at a 1 s window give 100 rows of 512") {
  AudioSignal a = Noise(10.0, 0.2, 1);
  EmbeddingSequence e = ExtractEmbeddings(a, ToyEmbedder(0), 1.0);
  CHECK(e.NumFrames() == 100);
  CHECK(e.Dim() == 512);
  CHECK(e.window_size == 1.0);
  CHECK(e.hop == doctest::Approx(0.1));
  for (int t = 0; t < e.NumFrames(); ++t) CHECK(e.data.row(t).norm() == doctest::Approx(1.0));
}

TEST_CASE("constant provider gives identical rows") {
  EmbeddingSequence e = ExtractEmbeddings(Noise(3.0, 0.2, 2), ConstantProvider(), 2.0);
  for (int t = 1; t < e.NumFrames(); ++t) CHECK(e.data.row(t) == e.data.row(0));
}

TEST_CASE("windows are centered on frame times and clamped to the signal") {
  AudioSignal a = Noise(2.0, 0.2, 3);
  SpanProvider p(a.samples.data());
  EmbeddingSequence e = ExtractEmbeddings(a, p, 3.0);
  CHECK(e.NumFrames() == NumOutputFrames(16000));
  for (int t = 0; t < e.NumFrames(); ++t) {
    const int begin = std::max(0, t * 800 - 12000), end = std::min(16000, t * 800 + 12000);
    CHECK(e.data(t, 0) == begin);
    CHECK(e.data(t, 1) == end - begin);
  }
  EmbeddingSequence one = ExtractEmbeddings(a, p, 1.0);
  CHECK(one.data(0, 0) == 0);
  CHECK(one.data(0, 1) == 4000);
  CHECK(one.data(10, 0) == 4000);
  CHECK(one.data(10, 1) == 8000);
  CHECK(one.data(19, 0) == 15200 - 4000);
  CHECK(one.data(19, 1) == 16000 - 11200);
}

TEST_CASE("extraction argument checks") {
  AudioSignal a = Noise(2.0, 0.2, 4);
  CHECK_THROWS_AS(ExtractEmbeddings(a, ToyEmbedder(0), 1.5), Error);
  CHECK_THROWS_AS(ExtractEmbeddings(a, ToyEmbedder(0), 1.0, 0.2), Error);
  AudioSignal tiny = Noise(0.05, 0.2, 4);
  CHECK_THROWS_AS(ExtractEmbeddings(tiny, ToyEmbedder(0), 1.0), Error);
}

TEST_CASE("silence mask zeroes exactly the masked rows") {
  EmbeddingSequence e;
  e.data = Matrix::Random(3, 5);
  VadMask m{{1, 0, 1}};
  EmbeddingSequence out = ApplySilenceMask(e, m);
  CHECK(out.data.row(0) == e.data.row(0));
  CHECK(out.data.row(2) == e.data.row(2));
  CHECK(out.data.row(1).norm() == 0.0);
  CHECK(ApplySilenceMask(out, m).data == out.data);

  CHECK(ApplySilenceMask(e, VadMask{{1, 1, 1}}).data == e.data);
  CHECK(ApplySilenceMask(e, VadMask{{0, 0, 0}}).data.isZero(0.0));
  CHECK_THROWS_AS(ApplySilenceMask(e, VadMask{{1, 1}}), Error);
}

TEST_CASE("align lengths truncates within tolerance") {
  FrameSequence x;
  x.data = Matrix::Random(100, 3);
  EmbeddingSequence b;
  b.window_size = 1.0;
  b.data = Matrix::Random(100, 2);
  auto [x1, b1] = AlignLengths(x, b);
  CHECK(x1.NumFrames() == 100);
  CHECK(b1.data == b.data);

  b.data = Matrix::Random(102, 2);
  auto [x2, b2] = AlignLengths(x, b);
  CHECK(x2.NumFrames() == 100);
  CHECK(b2.NumFrames() == 100);
  CHECK(b2.data == b.data.topRows(100));
  auto [x3, b3] = AlignLengths(x2, b2);
  CHECK(x3.data == x2.data);
  CHECK(b3.data == b2.data);

  b.data = Matrix::Random(50, 2);
  CHECK_THROWS_AS(AlignLengths(x, b), Error);
}

TEST_CASE("toy embedder is deterministic and defined on silence") {
  ToyEmbedder toy(11);
  AudioSignal a = Noise(1.0, 0.3, 5);
  CHECK(toy.Embed(a.samples) == toy.Embed(a.samples));
  std::vector<double> zeros(8000, 0.0);
  Vector z = toy.Embed(zeros);
  CHECK(z.allFinite());
  CHECK(z.norm() == doctest::Approx(1.0));
  CHECK(z == ToyEmbedder(11).Embed(std::vector<double>(4000, 0.0)));
  CHECK(ToyEmbedder(12).Embed(zeros) != z);
}

TEST_CASE("toy embeddings separate synthetic speakers") {
  ToyEmbedder toy(0);
  const int n_speakers = 4, n_utts = 6;
  std::vector<std::vector<Vector>> emb(n_speakers);
  for (int s = 0; s < n_speakers; ++s) {
    SynthSpeaker spk(MixSeed(99, s));
    for (int u = 0; u < n_utts; ++u) emb[s].push_back(toy.Embed(spk.Generate(1.5, u)));
  }
  double within = 0.0, cross = 0.0;
  int nw = 0, nc = 0;
  for (int s = 0; s < n_speakers; ++s) {
    for (int r = 0; r < n_speakers; ++r) {
      for (int i = 0; i < n_utts; ++i) {
        for (int j = 0; j < n_utts; ++j) {
          if (s == r && i >= j) continue;
          double c = Cosine(emb[s][i], emb[r][j]);
          if (s == r) {
            within += c;
            ++nw;
          } else {
            cross += c;
            ++nc;
          }
        }
      }
    }
  }
  CHECK(within / nw > cross / nc);

  // Each utterance is closer to its own speaker's centroid.
  std::vector<Vector> centroid(n_speakers, Vector::Zero(512));
  for (int s = 0; s < n_speakers; ++s) {
    for (const Vector &v : emb[s]) centroid[s] += v / n_utts;
  }
  int correct = 0;
  for (int s = 0; s < n_speakers; ++s) {
    for (const Vector &v : emb[s]) {
      int best = 0;
      for (int r = 1; r < n_speakers; ++r) {
        if (Cosine(v, centroid[r]) > Cosine(v, centroid[best])) best = r;
      }
      correct += best == s;
    }
  }
  CHECK(correct == n_speakers * n_utts);
}

TEST_CASE("embedding file layout and round trip") {
  eend::testing::TempDir dir("emb");
  EmbeddingSequence e;
  e.window_size = 2.0;
  e.data = Matrix::Random(7, 512).cast<float>().cast<double>();
  SaveEmbeddings(dir / "a.emb", e);
  std::vector<char> bytes = ReadFileBytes(dir / "a.emb");
  REQUIRE(bytes.size() == 24 + 7 * 512 * 4);
  CHECK(std::string(bytes.data(), 4) == "EEMB");
  uint32_t header[5];
  std::memcpy(header, bytes.data() + 4, sizeof(header));
  CHECK(header[0] == 1);
  CHECK(header[1] == 7);
  CHECK(header[2] == 512);
  CHECK(header[3] == 100);
  CHECK(header[4] == 2000);
  float first;
  std::memcpy(&first, bytes.data() + 24, 4);
  CHECK(first == static_cast<float>(e.data(0, 0)));

  EmbeddingSequence back = LoadEmbeddings(dir / "a.emb");
  CHECK(back.data == e.data);
  CHECK(back.window_size == 2.0);
  CHECK(back.hop == doctest::Approx(0.1));

  ByteWriter truncated;
  truncated.Str(std::string(bytes.begin(), bytes.end() - 10));
  truncated.Save(dir / "t.emb");
  CHECK_THROWS_AS(LoadEmbeddings(dir / "t.emb"), ParseError);

  // Header says E=512 but the payload holds E=256.
  ByteWriter half;
  half.Str(std::string(bytes.begin(), bytes.begin() + 24 + 7 * 256 * 4));
  half.Save(dir / "h.emb");
  CHECK_THROWS_AS(LoadEmbeddings(dir / "h.emb"), ParseError);

  ByteWriter magic;
  magic.Str("XXXX" + std::string(bytes.begin() + 4, bytes.end()));
  magic.Save(dir / "m.emb");
  CHECK_THROWS_AS(LoadEmbeddings(dir / "m.emb"), ParseError);
}
