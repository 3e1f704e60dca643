// eend/tests/cli-test.cc
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

#include <sys/wait.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "eend/embeddings.h"
#include "eend/segments.h"
#include "eend/simulate.h"
#include "eend/vad.h"
#include "test-util.h"

using namespace eend;
using eend::testing::TempDir;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult Run(const std::string &args) {
  std::string cmd = std::string(EEND_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE *p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), p)) > 0) r.output.append(buf, n);
  int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Slurp(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string Simulate(const TempDir &dir, const std::string &name, const std::string &extra) {
  std::string out = dir / name;
  RunResult r = Run("simulate --out " + out + " --max-duration 10 " + extra);
  INFO(r.output);
  REQUIRE(r.code == 0);
  return out;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(Run("").code == 2);
  CHECK(Run("frobnicate").code == 2);
  CHECK(Run("simulate").code == 2);
  CHECK(Run("embed --data x --out y --provider magic").code == 2);
  CHECK(Run("embed --data x --out y --window 4").code == 2);
  CHECK(Run("score --ref a.rttm --hyp b.rttm --collar -1").code == 2);
  TempDir dir("cli-usage");
  CHECK(Run("simulate --out " + (dir / "d") + " --count 0").code == 2);
  RunResult help = Run("--help");
  CHECK(help.code == 0);
  CHECK(help.output.find("simulate") != std::string::npos);
}

TEST_CASE("runtime failures exit with code 1") {
  TempDir dir("cli-runtime");
  RunResult r = Run("score --ref " + (dir / "missing.rttm") + " --hyp " + (dir / "missing.rttm"));
  CHECK(r.code == 1);
  CHECK(r.output.find("missing.rttm") != std::string::npos);
  CHECK(Run("infer --checkpoint " + (dir / "nope") + " --wav " + (dir / "x.wav")).code == 1);
}

TEST_CASE("simulate is deterministic and honors zero overlap") {
  TempDir dir("cli-sim");
  std::string a = Simulate(dir, "a", "--count 3 --seed 7");
  std::string b = Simulate(dir, "b", "--count 3 --seed 7");
  std::vector<DatasetEntry> ea = ReadManifest(a);
  REQUIRE(ea.size() == 3);
  CHECK(Slurp(a + "/manifest.tsv") == Slurp(b + "/manifest.tsv"));
  for (const DatasetEntry &e : ea) {
    CHECK(Slurp(a + "/" + e.wav) == Slurp(b + "/" + e.wav));
    CHECK(Slurp(a + "/" + e.rttm) == Slurp(b + "/" + e.rttm));
  }

  std::string z = Simulate(dir, "z", "--count 3 --seed 1 --overlap 0");
  for (const DatasetEntry &e : ReadManifest(z)) {
    CHECK(ComputeOverlapRatio(ReadRttm(z + "/" + e.rttm)) == 0.0);
  }
}

TEST_CASE("score of a reference against itself") {
  TempDir dir("cli-score");
  std::string d = Simulate(dir, "d", "--count 1 --seed 3");
  std::string rttm = d + "/" + ReadManifest(d)[0].rttm;
  RunResult r = Run("score --ref " + rttm + " --hyp " + rttm + " --plot " + (dir / "der.svg"));
  INFO(r.output);
  CHECK(r.code == 0);
  CHECK(r.output.find("OVERALL") != std::string::npos);
  CHECK(r.output.find("   0.00") != std::string::npos);
  CHECK(Slurp(dir / "der.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("embed writes windowed, optionally masked embeddings") {
  TempDir dir("cli-embed");
  std::string d = Simulate(dir, "d", "--count 1 --seed 5");
  DatasetEntry e = ReadManifest(d)[0];
  RunResult r = Run("embed --data " + d + " --out " + (dir / "emb") + " --window 2");
  INFO(r.output);
  REQUIRE(r.code == 0);
  std::string bytes = Slurp(dir / ("emb/" + e.id + ".emb"));
  REQUIRE(bytes.size() > 24);
  uint32_t window_ms;
  std::memcpy(&window_ms, bytes.data() + 20, 4);
  CHECK(window_ms == 2000);

  std::string rttm = d + "/" + e.rttm;
  REQUIRE(Run("embed --data " + d + " --out " + (dir / "masked") + " --oracle-vad " + rttm)
              .code == 0);
  EmbeddingSequence m = LoadEmbeddings(dir / ("masked/" + e.id + ".emb"));
  VadMask mask = OracleMask(ReadRttm(rttm), m.NumFrames());
  int silent = 0;
  for (int t = 0; t < m.NumFrames(); ++t) {
    if (!mask[t]) {
      ++silent;
      CHECK(m.data.row(t).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  CHECK(silent > 0);

  RunResult f = Run("embed --data " + d + " --out " + (dir / "copy") + " --window 1 --provider file --input " +
                    (dir / "masked"));
  CHECK(f.code == 0);
  CHECK(Slurp(dir / ("copy/" + e.id + ".emb")) == Slurp(dir / ("masked/" + e.id + ".emb")));
  CHECK(Run("embed --data " + d + " --out " + (dir / "bad") + " --window 2 --provider file --input " +
            (dir / "masked"))
            .code == 1);
}

TEST_CASE("simulate, train, infer and score end to end") {
  TempDir dir("cli-e2e");
  std::string d = Simulate(dir, "d", "--count 2 --seed 9");
  std::ofstream(dir / "tiny.conf") << "variant = C\nepochs = 2\nwarmup_steps = 10\n"
                                      "chunk_frames = 50\nn_blocks = 1\nd_model = 16\n"
                                      "n_heads = 2\nff_dim = 32\ndropout = 0\n";
  RunResult tr = Run("train --config " + (dir / "tiny.conf") + " --train " + d + " --out " +
                     (dir / "run"));
  INFO(tr.output);
  REQUIRE(tr.code == 0);
  CHECK(Slurp(dir / "run/train.log").find("val_der") != std::string::npos);

  RunResult bad = Run("train --config " + (dir / "tiny.conf") + " --train " + d + " --out " +
                      (dir / "bad") + " --set learning_rate=1");
  CHECK(bad.code == 1);

  RunResult ad = Run("adapt --train " + d + " --init " + (dir / "run/final") + " --out " +
                     (dir / "adapt") + " --set epochs=1");
  INFO(ad.output);
  REQUIRE(ad.code == 0);
  CHECK(Slurp(dir / "adapt/final/manifest.txt").find("alpha = 0.10000000000000001") !=
        std::string::npos);
  CHECK(Run("adapt --train " + d + " --out " + (dir / "x")).code == 2);

  std::string ck = dir / "run/final";
  RunResult no_ref = Run("infer --checkpoint " + ck + " --data " + d + " --vad oracle");
  CHECK(no_ref.code == 1);
  CHECK(no_ref.output.find("reference") != std::string::npos);

  // Collect all references into one RTTM.
  SegmentList refs;
  for (const DatasetEntry &e : ReadManifest(d)) {
    SegmentList s = ReadRttm(d + "/" + e.rttm);
    refs.insert(refs.end(), s.begin(), s.end());
  }
  WriteRttm(dir / "ref.rttm", refs);
  RunResult inf = Run("infer --checkpoint " + ck + " --data " + d + " --out " + (dir / "hyp.rttm") +
                      " --vad oracle --reference " + (dir / "ref.rttm"));
  INFO(inf.output);
  REQUIRE(inf.code == 0);
  RunResult again = Run("infer --checkpoint " + ck + " --data " + d + " --out " +
                        (dir / "hyp2.rttm") + " --vad oracle --reference " + (dir / "ref.rttm"));
  REQUIRE(again.code == 0);
  CHECK(Slurp(dir / "hyp.rttm") == Slurp(dir / "hyp2.rttm"));
  RunResult sc = Run("score --ref " + (dir / "ref.rttm") + " --hyp " + (dir / "hyp.rttm"));
  INFO(sc.output);
  CHECK(sc.code == 0);
  CHECK(sc.output.find("OVERALL") != std::string::npos);
}
