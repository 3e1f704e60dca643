// eend/tests/trainer-test.cc
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

#include "eend/trainer.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "eend/audio.h"
#include "eend/checkpoint.h"
#include "eend/config.h"
#include "eend/simulate.h"
#include "json.hpp"
#include "test-util.h"

using namespace eend;
using eend::testing::TempDir;

namespace {

TrainConfig TinyConfig(Variant v) {
  TrainConfig c;
  c.variant = v;
  c.epochs = 3;
  c.warmup_steps = 10;
  c.batch_size = 2;
  c.chunk_frames = 40;
  c.encoder.n_blocks = 1;
  c.encoder.d_model = 16;
  c.encoder.n_heads = 2;
  c.encoder.ff_dim = 32;
  c.encoder.dropout = 0.0;
  c.seed = 3;
  return c;
}

DatasetSpec TinyDataset(int count, uint64_t seed) {
  DatasetSpec d;
  d.count = count;
  d.seed = seed;
  d.pool_size = 4;
  d.mixture.max_duration = 8.0;
  d.mixture.max_utterance = 2.5;
  return d;
}

std::string Slurp(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

double TotalTime(const SegmentList &s) {
  double t = 0;
  for (const Segment &x : s) t += x.duration;
  return t;
}

}  // namespace

TEST_CASE("noam schedule") {
  const double d = 256, w = 500;
  CHECK(NoamLearningRate(1, 256, 500) == doctest::Approx(std::pow(d, -0.5) * std::pow(w, -1.5)));
  CHECK(NoamLearningRate(100, 256, 500) ==
        doctest::Approx(std::pow(d, -0.5) * 100 * std::pow(w, -1.5)));
  CHECK(NoamLearningRate(500, 256, 500) == doctest::Approx(std::pow(d, -0.5) / std::sqrt(w)));
  CHECK(NoamLearningRate(2000, 256, 500, 2.0) ==
        doctest::Approx(2.0 * std::pow(d, -0.5) / std::sqrt(2000.0)));
  double peak = NoamLearningRate(500, 256, 500);
  for (int64_t k : {1, 50, 499, 501, 5000}) CHECK(NoamLearningRate(k, 256, 500) <= peak);
  CHECK_THROWS_AS(NoamLearningRate(0, 256, 500), Error);
}

TEST_CASE("config file parsing") {
  std::istringstream is(
      "# tiny\nvariant = C\nepochs = 7\nmode = adapt\nd_model = 32\n"
      "use_oracle_vad_on_embeddings = true\nwindow_size = 2\n");
  TrainConfig c = TrainConfig::FromKeyValue(KeyValueConfig::Parse(is));
  CHECK(c.variant == Variant::kConcat);
  CHECK(c.epochs == 7);
  CHECK(c.mode == TrainMode::kAdapt);
  CHECK(c.encoder.d_model == 32);
  CHECK(c.use_oracle_vad_on_embeddings);
  CHECK(c.window_size == 2.0);
  CHECK(c.Model().InputDim() == kSplicedDim + kEmbeddingDim);

  std::istringstream unknown("epochs = 2\nlearning_rate = 3\n");
  CHECK_THROWS_AS(TrainConfig::FromKeyValue(KeyValueConfig::Parse(unknown)), ParseError);
  std::istringstream bad_mode("mode = finetune\n");
  CHECK_THROWS_AS(TrainConfig::FromKeyValue(KeyValueConfig::Parse(bad_mode)), ParseError);
  std::istringstream bad_value("epochs = many\n");
  CHECK_THROWS_AS(TrainConfig::FromKeyValue(KeyValueConfig::Parse(bad_value)), ParseError);
  std::istringstream dup("epochs = 1\nepochs = 2\n");
  CHECK_THROWS_AS(KeyValueConfig::Parse(dup), ParseError);
  std::istringstream bad_window("window_size = 4\n");
  CHECK_THROWS_AS(TrainConfig::FromKeyValue(KeyValueConfig::Parse(bad_window)), Error);
}

TEST_CASE("checkpoint round trip and integrity") {
  TempDir dir("ckpt");
  TrainConfig cfg = TinyConfig(Variant::kConcat);
  EendModel model(cfg.Model(), 5);
  CheckpointInfo info;
  info.window_size = 2.0;
  info.mode = "adapt";
  info.alpha = 0.1;
  info.epoch = 4;
  info.step = 123;
  info.val_der = 0.25;
  SaveCheckpoint(dir / "a", model, info);
  Checkpoint ck = LoadCheckpoint(dir / "a", Variant::kConcat);
  CHECK(ck.config.variant == Variant::kConcat);
  CHECK(ck.config.encoder.d_model == 16);
  CHECK(ck.info.window_size == 2.0);
  CHECK(ck.info.alpha == 0.1);
  CHECK(ck.info.step == 123);
  CHECK(ck.params.NumScalars() == model.NumParameters());

  Matrix feats = Matrix::Random(12, kSplicedDim), emb = Matrix::Random(12, kEmbeddingDim);
  Matrix a = model.Forward(&feats, &emb).posteriors.data;
  Matrix b = ck.Model().Forward(&feats, &emb).posteriors.data;
  CHECK(a == b);

  SaveCheckpoint(dir / "b", ck.Model(), ck.info);
  CHECK(Slurp(dir / "a/manifest.txt") == Slurp(dir / "b/manifest.txt"));
  CHECK(Slurp(dir / "a/weights.bin") == Slurp(dir / "b/weights.bin"));

  CHECK_THROWS_AS(LoadCheckpoint(dir / "a", Variant::kEmbToEncoder), Error);
  CHECK_THROWS_AS(LoadCheckpoint(dir / "missing"), Error);

  std::string weights = Slurp(dir / "b/weights.bin");
  weights[weights.size() / 2] ^= 0x40;
  std::ofstream(dir / "b/weights.bin", std::ios::binary) << weights;
  CHECK_THROWS_AS(LoadCheckpoint(dir / "b"), Error);

  std::string manifest = Slurp(dir / "a/manifest.txt");
  auto pos = manifest.find("format_version = 1");
  REQUIRE(pos != std::string::npos);
  manifest.replace(pos, 18, "format_version = 9");
  std::ofstream(dir / "a/manifest.txt", std::ios::binary) << manifest;
  try {
    LoadCheckpoint(dir / "a");
    FAIL("expected a version error");
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("baseline never reads embeddings") {
  TempDir dir("base");
  WriteDataset(dir / "data", TinyDataset(2, 1));
  TrainConfig cfg = TinyConfig(Variant::kBaseline);
  cfg.embeddings_dir = dir / "does-not-exist";
  std::vector<Recording> data = LoadDataset(dir / "data", cfg);
  REQUIRE(data.size() == 2);
  CHECK(data[0].embeddings.size() == 0);
  CHECK(data[0].features.cols() == kSplicedDim);
  CHECK(data[0].features.rows() == data[0].NumFrames());

  TrainConfig c = TinyConfig(Variant::kConcat);
  c.embeddings_dir = dir / "does-not-exist";
  CHECK_THROWS(LoadDataset(dir / "data", c));
}

TEST_CASE("training smoke run") {
  TempDir dir("train");
  WriteDataset(dir / "data", TinyDataset(3, 2));
  TrainConfig cfg = TinyConfig(Variant::kConcat);
  cfg.epochs = 6;
  cfg.use_oracle_vad_on_embeddings = true;
  std::vector<Recording> data = LoadDataset(dir / "data", cfg);

  EendModel m1(cfg.Model(), cfg.seed);
  TrainResult r1 = Train(cfg, &m1, data, {}, dir / "run1");
  REQUIRE(r1.history.size() == 6);
  CHECK(r1.history.back().loss < r1.history.front().loss);
  CHECK(r1.silent_rows_seen > 0);
  CHECK(r1.silent_rows_nonzero == 0);
  for (const EpochRecord &e : r1.history) {
    CHECK(std::isfinite(e.loss));
    CHECK(e.val_der >= 0.0);
  }

  std::ifstream log(dir / "run1/train.log");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    for (const char *k : {"epoch", "step", "loss", "L_d", "L_alpha", "lr", "val_der"}) {
      CHECK(j.contains(k));
    }
    ++lines;
  }
  CHECK(lines == 6);
  Checkpoint final = LoadCheckpoint(dir / "run1/final", Variant::kConcat);
  CHECK(final.info.alpha == 1.0);
  CHECK(final.info.oracle_vad_on_embeddings);
  CHECK(final.info.epoch == 6);
  LoadCheckpoint(dir / "run1/best", Variant::kConcat);

  EendModel m2(cfg.Model(), cfg.seed);
  TrainResult r2 = Train(cfg, &m2, data, {}, "");
  CHECK(r2.final_loss == r1.final_loss);
  CHECK(Slurp(dir / "run1/final/weights.bin").size() > 0);

  TrainConfig unmasked = cfg;
  unmasked.use_oracle_vad_on_embeddings = false;
  unmasked.epochs = 1;
  std::vector<Recording> raw = LoadDataset(dir / "data", unmasked);
  EendModel m3(unmasked.Model(), 1);
  TrainResult r3 = Train(unmasked, &m3, raw, {}, "");
  CHECK(r3.silent_rows_nonzero > 0);

  TrainConfig adapt = cfg;
  adapt.mode = TrainMode::kAdapt;
  adapt.epochs = 1;
  Train(adapt, &m1, data, {}, dir / "adapt");
  Checkpoint ad = LoadCheckpoint(dir / "adapt/final");
  CHECK(ad.info.alpha == 0.1);
  CHECK(ad.info.mode == "adapt");

  EendModel wrong(TinyConfig(Variant::kBaseline).Model(), 1);
  CHECK_THROWS_AS(Train(cfg, &wrong, data, {}, ""), Error);
  CHECK_THROWS_AS(Train(cfg, &m1, {}, {}, ""), Error);
}

TEST_CASE("inference pipeline") {
  TempDir dir("infer");
  TrainConfig cfg = TinyConfig(Variant::kBaseline);
  EendModel model(cfg.Model(), 9);
  SaveCheckpoint(dir / "ck", model, {});
  Checkpoint ck = LoadCheckpoint(dir / "ck");

  MixtureSpec spec;
  spec.max_duration = 10.0;
  spec.speaker_pool = {11, 12, 13};
  spec.seed = 4;
  Conversation conv = SimulateConversation(spec);

  InferInput in;
  in.recording_id = conv.segments.front().recording_id;
  in.audio = conv.audio;
  InferOptions none;
  none.decode.threshold = 0.3;
  SegmentList hyp_none = Infer(ck, model, in, none);
  for (const Segment &s : hyp_none) CHECK(s.recording_id == in.recording_id);

  InferOptions oracle = none;
  oracle.vad = VadMode::kOracle;
  CHECK_THROWS_AS(Infer(ck, model, in, oracle), Error);
  in.reference = &conv.segments;
  SegmentList hyp_oracle = Infer(ck, model, in, oracle);
  CHECK(TotalTime(hyp_oracle) <= TotalTime(hyp_none) + 1e-9);
  const int32_t frames = NumOutputFrames(conv.audio.samples.size());
  VadMask mask = OracleMask(conv.segments, frames);
  LabelMatrix ln = SegmentsToLabels(hyp_none, {"spk0", "spk1"}, frames);
  LabelMatrix lo = SegmentsToLabels(hyp_oracle, {"spk0", "spk1"}, frames);
  CHECK(GateHypothesis(ln, mask).data == lo.data);

  TrainConfig cc = TinyConfig(Variant::kConcat);
  EendModel mc(cc.Model(), 9);
  CheckpointInfo masked;
  masked.oracle_vad_on_embeddings = true;
  SaveCheckpoint(dir / "ckc", mc, masked);
  Checkpoint ckc = LoadCheckpoint(dir / "ckc");
  for (VadMode ev : {VadMode::kNone, VadMode::kOracle}) {
    InferOptions n2 = none, o2 = oracle;
    n2.embedding_vad = o2.embedding_vad = ev;
    LabelMatrix a = SegmentsToLabels(Infer(ckc, mc, in, n2), {"spk0", "spk1"}, frames);
    LabelMatrix b = SegmentsToLabels(Infer(ckc, mc, in, o2), {"spk0", "spk1"}, frames);
    CHECK(GateHypothesis(a, mask).data == b.data);
  }
  InferInput other = in;
  other.recording_id = "elsewhere";
  CHECK_THROWS_AS(Infer(ckc, mc, other, oracle), Error);
  InferInput no_ref = in;
  no_ref.reference = nullptr;
  InferOptions emb_oracle = none;
  emb_oracle.embedding_vad = VadMode::kOracle;
  CHECK_THROWS_AS(Infer(ckc, mc, no_ref, emb_oracle), Error);

  InferOptions energy = none;
  energy.vad = VadMode::kEnergy;
  CHECK_NOTHROW(Infer(ck, model, in, energy));

  InferInput empty;
  empty.recording_id = "e";
  CHECK_THROWS_AS(Infer(ck, model, empty, none), Error);
  CHECK(ParseVadMode("oracle") == VadMode::kOracle);
  CHECK_THROWS_AS(ParseVadMode("webrtc"), Error);
}
