// eend/tests/model-test.cc
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

#include "eend/model.h"

#include "doctest.h"
#include "eend/losses.h"
#include "test-util.h"

using namespace eend;
using eend::testing::RandomMatrix;

namespace {

ModelConfig Small(Variant v, int blocks = 2) {
  ModelConfig c;
  c.variant = v;
  c.encoder.n_blocks = blocks;
  c.encoder.d_model = 16;
  c.encoder.n_heads = 4;
  c.encoder.ff_dim = 32;
  c.encoder.dropout = 0.0;
  return c;
}

ModelConfig Paper(Variant v, int blocks) {
  ModelConfig c;
  c.variant = v;
  c.encoder.n_blocks = blocks;
  return c;
}

}  // namespace

TEST_CASE("variant names") {
  for (Variant v : {Variant::kBaseline, Variant::kEmbToEda, Variant::kEmbToEncoder,
                    Variant::kConcat}) {
    CHECK(ParseVariant(VariantName(v)) == v);
  }
  CHECK(VariantName(Variant::kConcat) == "C");
  CHECK_THROWS_AS(ParseVariant("D"), Error);
  CHECK(UsesFeatures(Variant::kBaseline));
  CHECK_FALSE(UsesEmbeddings(Variant::kBaseline));
  CHECK_FALSE(UsesFeatures(Variant::kEmbToEncoder));
  CHECK(UsesEmbeddings(Variant::kEmbToEda));
}

TEST_CASE("encoder input widths") {
  CHECK(Paper(Variant::kBaseline, 4).InputDim() == 345);
  CHECK(Paper(Variant::kEmbToEda, 4).InputDim() == 345);
  CHECK(Paper(Variant::kEmbToEncoder, 3).InputDim() == 512);
  CHECK(Paper(Variant::kConcat, 3).InputDim() == 857);
}

TEST_CASE("parameter counts at D=256") {
  // Analytic count: input projection, blocks, final norm, two LSTMs, counter.
  auto count = [](int in, int blocks, int d = 256, int ff = 2048) {
    int64_t block = 2 * d + 4 * (d * d + d) + 2 * d + (d * ff + ff) + (ff * d + d);
    int64_t lstm = 2 * (d * 4 * d + d * 4 * d + 4 * d);
    return int64_t{in} * d + d + blocks * block + 2 * d + lstm + d + 1;
  };
  EendModel baseline(Paper(Variant::kBaseline, 4), 1);
  CHECK(baseline.NumParameters() == count(345, 4));
  CHECK(baseline.NumParameters() == 6400257);
  EendModel a4(Paper(Variant::kEmbToEda, 4), 1);
  const int64_t d = 256, ff = 2048;
  const int64_t block = 2 * d + 4 * (d * d + d) + 2 * d + (d * ff + ff) + (ff * d + d);
  CHECK(a4.NumParameters() == count(345, 4) + 512 * d + d + block + 2 * d);
  CHECK(a4.NumParameters() == 7847169);
  EendModel a3(Paper(Variant::kEmbToEda, 3), 1);
  CHECK(a3.NumParameters() == 6532097);
  EendModel b3(Paper(Variant::kEmbToEncoder, 3), 1);
  CHECK(b3.NumParameters() == count(512, 3));
  EendModel c3(Paper(Variant::kConcat, 3), 1);
  CHECK(c3.NumParameters() == count(857, 3));
  CHECK(std::abs(b3.NumParameters() / 5.1e6 - 1.0) < 0.02);
  CHECK(std::abs(c3.NumParameters() / 5.2e6 - 1.0) < 0.02);
  CHECK(std::abs(a4.NumParameters() / 7.8e6 - 1.0) < 0.02);
}

TEST_CASE("encoder shapes and eval determinism") {
  std::mt19937_64 rng(1);
  EendModel m(Small(Variant::kConcat), 3);
  Matrix x = RandomMatrix(7, 857, &rng);
  Matrix e = m.Encode(x);
  CHECK(e.rows() == 7);
  CHECK(e.cols() == 16);
  CHECK(m.Encode(x) == e);
  CHECK_THROWS_AS(m.Encode(RandomMatrix(7, 345, &rng)), Error);

  EendModel a(Small(Variant::kEmbToEda), 3);
  Matrix zeros = Matrix::Zero(5, 512);
  Matrix ez = a.EncodeEmbeddings(zeros);
  CHECK(ez.rows() == 5);
  CHECK(ez.cols() == 16);
  CHECK(ez.allFinite());
  CHECK_THROWS_AS(m.EncodeEmbeddings(zeros), Error);
}

TEST_CASE("method A adds exactly one embedding block") {
  EendModel base(Small(Variant::kBaseline), 1);
  EendModel a(Small(Variant::kEmbToEda), 1);
  int64_t extra = 0;
  for (int32_t i = 0; i < a.params().size(); ++i) {
    const std::string &name = a.params()[i].name;
    if (name.rfind("emb.", 0) == 0) extra += a.params()[i].value.size();
  }
  CHECK(a.NumParameters() - base.NumParameters() == extra);
  const int d = 16, ff = 32;
  int64_t block = 2 * d + 4 * (d * d + d) + 2 * d + (d * ff + ff) + (ff * d + d);
  CHECK(extra == 512 * d + d + block + 2 * d);
}

TEST_CASE("attractors are deterministic and decoded from zero inputs") {
  std::mt19937_64 rng(2);
  EendModel m(Small(Variant::kBaseline), 4);
  Matrix seq = RandomMatrix(9, 16, &rng);
  AttractorSet a = m.GenerateAttractors(seq, 3);
  CHECK(a.size() == 3);
  CHECK(a.attractors.cols() == 16);
  AttractorSet b = m.GenerateAttractors(seq, 3);
  CHECK(a.attractors == b.attractors);
  for (double p : a.existence_probs) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  // The first attractors do not depend on how many are requested.
  AttractorSet more = m.GenerateAttractors(seq, 5);
  CHECK(more.attractors.topRows(3) == a.attractors);
  // The decoder input weights never influence the output.
  EendModel copy(Small(Variant::kBaseline), m.params());
  int32_t w = copy.mutable_params().Find("eda.dec.w_ih");
  REQUIRE(w >= 0);
  copy.mutable_params()[w].value.setRandom();
  CHECK(copy.GenerateAttractors(seq, 3).attractors == a.attractors);
  CHECK_THROWS_AS(m.GenerateAttractors(Matrix(0, 16), 2), Error);
  CHECK_THROWS_AS(m.GenerateAttractors(seq, 0), Error);
  // Shuffled order changes the summary state in general but is seeded.
  AttractorSet s1 = m.GenerateAttractors(seq, 2, true, 9);
  AttractorSet s2 = m.GenerateAttractors(seq, 2, true, 9);
  CHECK(s1.attractors == s2.attractors);
}

TEST_CASE("posterior computation") {
  Matrix e(2, 2);
  e << 1, 0, 0, 1;
  AttractorSet a;
  a.attractors = Matrix(3, 2);
  a.attractors << 0, 5, 100, 0, 7, 7;
  a.existence_probs = {0.9, 0.9, 0.1};
  PosteriorMatrix p = ComputePosteriors(e, a, 2);
  CHECK(p.NumFrames() == 2);
  CHECK(p.NumSpeakers() == 2);
  CHECK(p.data(0, 0) == 0.5);
  CHECK(p.data(0, 1) == doctest::Approx(1.0));
  CHECK(p.data(1, 0) == doctest::Approx(Sigmoid(5.0)));
  CHECK_THROWS_AS(ComputePosteriors(Matrix::Ones(2, 3), a, 2), Error);
  CHECK_THROWS_AS(ComputePosteriors(e, a, 4), Error);
}

TEST_CASE("every variant maps T frames to T x S posteriors") {
  std::mt19937_64 rng(3);
  for (Variant v : {Variant::kBaseline, Variant::kEmbToEda, Variant::kEmbToEncoder,
                    Variant::kConcat}) {
    EendModel m(Small(v), 5);
    for (int t : {1, 4, 13}) {
      Matrix x = RandomMatrix(t, 345, &rng), b = RandomMatrix(t, 512, &rng);
      EendModel::Output out = m.Forward(&x, &b, 2);
      CHECK(out.posteriors.NumFrames() == t);
      CHECK(out.posteriors.NumSpeakers() == 2);
      CHECK((out.posteriors.data.array() > 0.0).all());
      CHECK((out.posteriors.data.array() < 1.0).all());
      EendModel::Output again = m.Forward(&x, &b, 2);
      CHECK(again.posteriors.data == out.posteriors.data);
      EendModel::Output var = m.ForwardVariable(&x, &b, 3);
      CHECK(var.posteriors.NumSpeakers() >= 1);
      CHECK(var.posteriors.NumSpeakers() <= 3);
    }
    if (UsesEmbeddings(v)) {
      Matrix x = RandomMatrix(3, 345, &rng);
      CHECK_THROWS_AS(m.Forward(&x, nullptr, 2), Error);
    }
  }
}

TEST_CASE("variant B ignores the acoustic features") {
  std::mt19937_64 rng(4);
  EendModel m(Small(Variant::kEmbToEncoder), 6);
  Matrix x = RandomMatrix(6, 345, &rng), b = RandomMatrix(6, 512, &rng);
  Matrix x2 = x + RandomMatrix(6, 345, &rng);
  CHECK(m.Forward(&x, &b).posteriors.data == m.Forward(&x2, &b).posteriors.data);
  CHECK(m.Forward(nullptr, &b).posteriors.data == m.Forward(&x, &b).posteriors.data);
}

TEST_CASE("variant A attractors carry no gradient to the features") {
  std::mt19937_64 rng(5);
  EendModel m(Small(Variant::kEmbToEda), 7);
  ag::Tape tape(&m.params());
  ag::Var x = tape.Input(RandomMatrix(6, 345, &rng));
  ag::Var b = tape.Input(RandomMatrix(6, 512, &rng));
  EendModel::Graph g = m.Build(tape, x, b, 2, 3, {});
  ag::Var l = ag::Sum(ag::Mul(g.attractors, tape.Constant(RandomMatrix(3, 16, &rng))));
  tape.Backward(l);
  CHECK(tape.Grad(x).isZero(0.0));
  CHECK_FALSE(tape.Grad(b).isZero(0.0));

  // The posteriors still depend on the features.
  ag::Tape tape2(&m.params());
  ag::Var x2 = tape2.Input(RandomMatrix(6, 345, &rng));
  ag::Var b2 = tape2.Input(RandomMatrix(6, 512, &rng));
  EendModel::Graph g2 = m.Build(tape2, x2, b2, 2, 3, {});
  tape2.Backward(ag::Sum(g2.logits));
  CHECK_FALSE(tape2.Grad(x2).isZero(0.0));
}

TEST_CASE("adopting parameters checks names and shapes") {
  EendModel m(Small(Variant::kConcat), 8);
  EendModel same(Small(Variant::kConcat), m.params());
  CHECK(same.NumParameters() == m.NumParameters());
  CHECK_THROWS_AS(EendModel(Small(Variant::kEmbToEncoder), m.params()), Error);
  CHECK_THROWS_AS(EendModel(Small(Variant::kConcat, 3), m.params()), Error);
}

TEST_CASE("encoder config validation") {
  EncoderConfig c;
  c.n_heads = 3;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = EncoderConfig{};
  c.n_blocks = 0;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = EncoderConfig{};
  CHECK_NOTHROW(c.Validate());
  CHECK(c.d_model == 256);
  CHECK(c.n_heads == 4);
}
