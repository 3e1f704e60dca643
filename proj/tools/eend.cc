// eend/tools/eend.cc
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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eend/audio.h"
#include "eend/checkpoint.h"
#include "eend/config.h"
#include "eend/embeddings.h"
#include "eend/features.h"
#include "eend/metrics.h"
#include "eend/simulate.h"
#include "eend/trainer.h"
#include "eend/vad.h"

namespace fs = std::filesystem;
using namespace eend;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Error raised by argument combinations that CLI11 cannot express.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string DataPath(const std::string &dir, const std::string &rel) {
  return (fs::path(dir) / rel).string();
}

SegmentList SegmentsOf(const SegmentList &all, const std::string &id) {
  SegmentList out;
  for (const Segment &s : all) {
    if (s.recording_id == id) out.push_back(s);
  }
  return out;
}

void EnsureDir(const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string out;
  int32_t count = 10;
  double overlap = 0.344;
  uint64_t seed = 0;
  int32_t speakers = 2;
  int32_t pool_size = 16;
  double max_duration = 30.0;
  double snr_db = std::numeric_limits<double>::infinity();
};

int RunSimulate(const SimulateArgs &a) {
  if (a.count < 1) throw UsageError("--count must be at least 1");
  DatasetSpec spec;
  spec.count = a.count;
  spec.seed = a.seed;
  spec.pool_size = a.pool_size;
  spec.mixture.n_speakers = a.speakers;
  spec.mixture.target_overlap = a.overlap;
  spec.mixture.max_duration = a.max_duration;
  spec.mixture.noise_snr_db = a.snr_db;
  std::vector<DatasetEntry> entries = WriteDataset(a.out, spec);
  double mean = 0.0;
  for (const DatasetEntry &e : entries) mean += e.overlap_ratio;
  std::printf("wrote %zu mixtures to %s (mean overlap ratio %.3f)\n", entries.size(),
              a.out.c_str(), mean / entries.size());
  return 0;
}

// ---- features --------------------------------------------------------------

struct FeaturesArgs {
  std::string data;
  std::string out;
  bool mean_normalize = false;
};

int RunFeatures(const FeaturesArgs &a) {
  EnsureDir(a.out);
  FeatureOptions opts;
  opts.mean_normalize = a.mean_normalize;
  std::vector<DatasetEntry> entries = ReadManifest(a.data);
  for (const DatasetEntry &e : entries) {
    FrameSequence f = ComputeFeatures(ReadWave(DataPath(a.data, e.wav)), opts);
    WriteFeatures(DataPath(a.out, e.id + ".feat"), f);
  }
  std::printf("wrote features for %zu recordings to %s\n", entries.size(), a.out.c_str());
  return 0;
}

// ---- embed -----------------------------------------------------------------

struct EmbedArgs {
  std::string data;
  std::string out;
  double window = 1.0;
  std::string provider = "toy";
  std::string input;
  std::string oracle_vad;
  uint64_t seed = 0;
};

int RunEmbed(const EmbedArgs &a) {
  if (a.provider == "file" && a.input.empty()) {
    throw UsageError("--provider file needs --input with precomputed <id>.emb files");
  }
  std::optional<SegmentList> vad_ref;
  if (!a.oracle_vad.empty()) vad_ref = ReadRttm(a.oracle_vad);
  EnsureDir(a.out);
  ToyEmbedder toy(a.seed);
  std::vector<DatasetEntry> entries = ReadManifest(a.data);
  for (const DatasetEntry &e : entries) {
    AudioSignal audio = ReadWave(DataPath(a.data, e.wav));
    EmbeddingSequence emb;
    if (a.provider == "toy") {
      emb = ExtractEmbeddings(audio, toy, a.window);
    } else {
      std::string path = DataPath(a.input, e.id + ".emb");
      emb = LoadEmbeddings(path);
      if (emb.window_size != a.window) {
        throw Error(path + ": window " + FormatDouble(emb.window_size) +
                    " s differs from --window " + FormatDouble(a.window));
      }
    }
    if (vad_ref) {
      VadMask mask = OracleMask(SegmentsOf(*vad_ref, e.id), emb.NumFrames(), emb.hop);
      emb = ApplySilenceMask(emb, mask);
    }
    SaveEmbeddings(DataPath(a.out, e.id + ".emb"), emb);
  }
  std::printf("wrote %zu embedding files to %s\n", entries.size(), a.out.c_str());
  return 0;
}

// ---- train / adapt ---------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string train;
  std::string valid;
  std::string out;
  std::string init;
  std::vector<std::string> overrides;
};

KeyValueConfig LoadConfig(const TrainArgs &a) {
  KeyValueConfig kv;
  if (!a.config.empty()) kv = KeyValueConfig::Load(a.config);
  for (const std::string &o : a.overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError("--set expects key=value, got '" + o + "'");
    }
    kv.Set(o.substr(0, eq), o.substr(eq + 1));
  }
  return kv;
}

int RunTrain(const TrainArgs &a, bool adapt) {
  KeyValueConfig kv = LoadConfig(a);
  TrainConfig cfg = TrainConfig::FromKeyValue(kv);
  std::optional<Checkpoint> init;
  if (!a.init.empty()) {
    init = LoadCheckpoint(a.init);
    const Checkpoint &ck = *init;
    if (kv.Has("variant") && ck.config.variant != cfg.variant) {
      throw Error("config variant " + VariantName(cfg.variant) + " differs from checkpoint variant " +
                  VariantName(ck.config.variant));
    }
    if (kv.Has("window_size") && ck.info.window_size != cfg.window_size) {
      throw Error("config window_size differs from the checkpoint");
    }
    cfg.variant = ck.config.variant;
    cfg.encoder = ck.config.encoder;
    if (kv.Has("dropout")) kv.Get("dropout", &cfg.encoder.dropout);
    cfg.window_size = ck.info.window_size;
    cfg.embedding_seed = ck.info.embedding_seed;
  }
  if (adapt) {
    if (!init) throw UsageError("adapt needs --init <checkpoint>");
    cfg.mode = TrainMode::kAdapt;
  }
  cfg.Validate();
  std::vector<Recording> train = LoadDataset(a.train, cfg);
  std::vector<Recording> valid;
  if (!a.valid.empty()) valid = LoadDataset(a.valid, cfg);
  EendModel model = init ? EendModel(cfg.Model(), init->params) : EendModel(cfg.Model(), cfg.seed);
  std::printf("%s variant %s: %lld parameters, %zu recordings\n", adapt ? "adapting" : "training",
              VariantName(cfg.variant).c_str(), static_cast<long long>(model.NumParameters()),
              train.size());
  TrainHooks hooks;
  hooks.on_epoch = [](const EpochRecord &r) {
    std::printf("epoch %d step %lld loss %.5f L_d %.5f L_alpha %.5f lr %.3g val_der %.4f\n",
                r.epoch, static_cast<long long>(r.step), r.loss, r.diarization, r.attractor, r.lr,
                r.val_der);
    std::fflush(stdout);
    return true;
  };
  TrainResult result = Train(cfg, &model, train, valid, a.out, hooks);
  std::printf("final loss %.5f, best validation frame DER %.4f, checkpoints in %s\n",
              result.final_loss, result.best_val_der, a.out.c_str());
  return 0;
}

// ---- infer -----------------------------------------------------------------

struct InferArgs {
  std::string checkpoint;
  std::string data;
  std::string wav;
  std::string out;
  std::string vad = "none";
  std::string embedding_vad = "none";
  std::string reference;
  std::string embeddings;
  int32_t num_speakers = 2;
  double threshold = 0.5;
  int32_t median = 11;
};

int RunInfer(const InferArgs &a) {
  if (a.data.empty() == a.wav.empty()) throw UsageError("give exactly one of --data or --wav");
  InferOptions opts;
  opts.vad = ParseVadMode(a.vad);
  opts.embedding_vad = ParseVadMode(a.embedding_vad);
  opts.num_speakers = a.num_speakers;
  opts.decode.threshold = a.threshold;
  opts.decode.median_window = a.median;
  if ((opts.vad == VadMode::kOracle || opts.embedding_vad == VadMode::kOracle) &&
      a.reference.empty()) {
    throw Error("oracle VAD requires --reference <rttm>");
  }
  std::optional<SegmentList> reference;
  if (!a.reference.empty()) reference = ReadRttm(a.reference);

  Checkpoint ck = LoadCheckpoint(a.checkpoint);
  EendModel model = ck.Model();

  std::vector<std::pair<std::string, std::string>> inputs;  // (id, wav path)
  if (!a.wav.empty()) {
    inputs.emplace_back(fs::path(a.wav).stem().string(), a.wav);
  } else {
    for (const DatasetEntry &e : ReadManifest(a.data)) {
      inputs.emplace_back(e.id, DataPath(a.data, e.wav));
    }
  }
  SegmentList all;
  for (const auto &[id, path] : inputs) {
    InferInput in;
    in.recording_id = id;
    in.audio = ReadWave(path);
    if (reference) in.reference = &*reference;
    if (!a.embeddings.empty() && UsesEmbeddings(ck.config.variant)) {
      in.embeddings = LoadEmbeddings(DataPath(a.embeddings, id + ".emb"));
    }
    SegmentList hyp = Infer(ck, model, in, opts);
    all.insert(all.end(), hyp.begin(), hyp.end());
  }
  if (a.out.empty()) {
    WriteRttm(std::cout, all);
  } else {
    if (fs::path(a.out).has_parent_path()) EnsureDir(fs::path(a.out).parent_path().string());
    WriteRttm(a.out, all);
    std::printf("wrote %zu segments for %zu recordings to %s\n", all.size(), inputs.size(),
                a.out.c_str());
  }
  return 0;
}

// ---- score -----------------------------------------------------------------

struct ScoreArgs {
  std::string reference;
  std::vector<std::string> hypotheses;  // path or label=path
  double collar = kDefaultCollar;
  std::string plot;
};

double Pct(double part, double speech) { return speech > 0 ? 100.0 * part / speech : 0.0; }

void PrintRow(const std::string &name, const DerBreakdown &d) {
  std::printf("%-16s %7.2f %7.2f %7.2f %7.2f %9.2f\n", name.c_str(), 100.0 * d.der,
              Pct(d.fa, d.total_speech), Pct(d.miss, d.total_speech), Pct(d.se, d.total_speech),
              d.total_speech);
}

// Stacked FA / Miss / SE bars of corpus DER per configuration.
void WriteDerPlot(const std::string &path,
                  const std::vector<std::pair<std::string, DerBreakdown>> &rows) {
  const double width = 120.0 + 90.0 * rows.size(), height = 320.0;
  const double left = 60.0, bottom = 260.0, top = 30.0;
  double max_der = 0.01;
  for (const auto &[name, d] : rows) max_der = std::max(max_der, d.der);
  const double scale = (bottom - top) / (max_der * 1.1);
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "font-family=\"sans-serif\" font-size=\"12\">\n",
                width, height);
  os << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n"
                "<text x=\"%.1f\" y=\"%.1f\">DER (%%)</text>\n",
                left, bottom, width - 20, bottom, 10.0, top - 10);
  os << buf;
  const char *colors[3] = {"#d95f02", "#7570b3", "#1b9e77"};
  const char *labels[3] = {"FA", "Miss", "SE"};
  for (size_t i = 0; i < rows.size(); ++i) {
    const DerBreakdown &d = rows[i].second;
    const double parts[3] = {d.fa / d.total_speech, d.miss / d.total_speech,
                             d.se / d.total_speech};
    double x = left + 30.0 + 90.0 * i, y = bottom;
    for (int k = 0; k < 3; ++k) {
      double h = parts[k] * scale;
      y -= h;
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%.1f\" y=\"%.2f\" width=\"50\" height=\"%.2f\" fill=\"%s\"/>\n", x,
                    y, h, colors[k]);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.2f</text>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">",
                  x + 25, y - 4, 100.0 * d.der, x + 25, bottom + 16);
    os << buf;
    for (char c : rows[i].first) {
      if (c == '<') os << "&lt;";
      else if (c == '&') os << "&amp;";
      else os << c;
    }
    os << "</text>\n";
  }
  for (int k = 0; k < 3; ++k) {
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"10\" height=\"10\" fill=\"%s\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\">%s</text>\n",
                  left + 70.0 * k, bottom + 32, colors[k], left + 70.0 * k + 14, bottom + 41,
                  labels[k]);
    os << buf;
  }
  os << "</svg>\n";
  if (!os) throw Error("failed writing " + path);
}

int RunScore(const ScoreArgs &a) {
  SegmentList ref = ReadRttm(a.reference);
  if (ref.empty()) throw Error(a.reference + ": no reference segments");
  std::vector<std::pair<std::string, DerBreakdown>> totals;
  for (const std::string &h : a.hypotheses) {
    std::string label = h, path = h;
    auto eq = h.find('=');
    if (eq != std::string::npos) {
      label = h.substr(0, eq);
      path = h.substr(eq + 1);
    } else {
      label = fs::path(h).stem().string();
    }
    CorpusScore score = ScoreCorpus(ref, ReadRttm(path), a.collar);
    if (a.hypotheses.size() > 1) std::printf("== %s\n", label.c_str());
    std::printf("%-16s %7s %7s %7s %7s %9s\n", "recording", "DER%", "FA%", "Miss%", "SE%",
                "speech_s");
    for (const auto &[id, d] : score.recordings) PrintRow(id, d);
    PrintRow("OVERALL", score.total);
    totals.emplace_back(label, score.total);
  }
  if (!a.plot.empty()) WriteDerPlot(a.plot, totals);
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"End-to-end neural speaker diarization with speaker-embedding fusion"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "eend 1.0");

  SimulateArgs sim;
  CLI::App *c_sim = app.add_subcommand("simulate", "Write a simulated conversation dataset");
  c_sim->add_option("--out", sim.out, "Output dataset directory")->required();
  c_sim->add_option("--count", sim.count, "Number of mixtures")->capture_default_str();
  c_sim->add_option("--overlap", sim.overlap, "Target overlap ratio")
      ->check(CLI::Range(0.0, 0.95))
      ->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Dataset seed")->capture_default_str();
  c_sim->add_option("--speakers", sim.speakers, "Speakers per mixture")
      ->check(CLI::Range(1, 6))
      ->capture_default_str();
  c_sim->add_option("--pool-size", sim.pool_size, "Synthetic speakers in the pool")
      ->capture_default_str();
  c_sim->add_option("--max-duration", sim.max_duration, "Mixture length bound in seconds")
      ->capture_default_str();
  c_sim->add_option("--snr", sim.snr_db, "Additive white noise SNR in dB (default: none)");

  FeaturesArgs feat;
  CLI::App *c_feat = app.add_subcommand("features", "Dump spliced, subsampled log-Mel features");
  c_feat->add_option("--data", feat.data, "Dataset directory")->required();
  c_feat->add_option("--out", feat.out, "Output directory for <id>.feat")->required();
  c_feat->add_flag("--mean-normalize", feat.mean_normalize, "Per-utterance mean normalization");

  EmbedArgs emb;
  CLI::App *c_emb = app.add_subcommand("embed", "Write per-recording speaker embedding files");
  c_emb->add_option("--data", emb.data, "Dataset directory")->required();
  c_emb->add_option("--out", emb.out, "Output directory for <id>.emb")->required();
  c_emb->add_option("--window", emb.window, "Window length in seconds")
      ->check(CLI::IsMember({1.0, 2.0, 3.0}))
      ->capture_default_str();
  c_emb->add_option("--provider", emb.provider, "Embedding source")
      ->check(CLI::IsMember({"toy", "file"}))
      ->capture_default_str();
  c_emb->add_option("--input", emb.input, "Directory of precomputed <id>.emb (provider file)");
  c_emb->add_option("--oracle-vad", emb.oracle_vad,
                    "Reference RTTM; rows at silent frames are zeroed");
  c_emb->add_option("--seed", emb.seed, "Toy embedder projection seed")->capture_default_str();

  TrainArgs tr, ad;
  auto add_train_options = [](CLI::App *c, TrainArgs *t, bool init_required) {
    c->add_option("--config", t->config, "Key-value training config");
    c->add_option("--train", t->train, "Training dataset directory")->required();
    c->add_option("--valid", t->valid, "Validation dataset directory");
    c->add_option("--out", t->out, "Output directory for checkpoints and train.log")->required();
    auto *init = c->add_option("--init", t->init, "Checkpoint to start from");
    if (init_required) init->required();
    c->add_option("--set", t->overrides, "Config override key=value (repeatable)");
  };
  CLI::App *c_train = app.add_subcommand("train", "Train a model");
  add_train_options(c_train, &tr, false);
  CLI::App *c_adapt = app.add_subcommand("adapt", "Adapt a trained model (alpha 0.1)");
  add_train_options(c_adapt, &ad, true);

  InferArgs inf;
  CLI::App *c_inf = app.add_subcommand("infer", "Diarize audio into an RTTM");
  c_inf->add_option("--checkpoint", inf.checkpoint, "Checkpoint directory")->required();
  c_inf->add_option("--data", inf.data, "Dataset directory");
  c_inf->add_option("--wav", inf.wav, "Single WAV file");
  c_inf->add_option("--out", inf.out, "Output RTTM (default: stdout)");
  c_inf->add_option("--vad", inf.vad, "VAD gating")
      ->check(CLI::IsMember({"none", "oracle", "energy"}))
      ->capture_default_str();
  c_inf->add_option("--embedding-vad", inf.embedding_vad,
                    "Mask computed embeddings (checkpoints trained with masking only)")
      ->check(CLI::IsMember({"none", "oracle", "energy"}))
      ->capture_default_str();
  c_inf->add_option("--reference", inf.reference, "Reference RTTM for oracle VAD");
  c_inf->add_option("--embeddings", inf.embeddings, "Directory of precomputed <id>.emb");
  c_inf->add_option("--num-speakers", inf.num_speakers, "Speaker count; 0 estimates it")
      ->check(CLI::Range(0, 6))
      ->capture_default_str();
  c_inf->add_option("--threshold", inf.threshold, "Posterior threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  c_inf->add_option("--median", inf.median, "Median filter length in frames (odd)")
      ->capture_default_str();

  ScoreArgs sc;
  CLI::App *c_sc = app.add_subcommand("score", "Diarization error rate table");
  c_sc->add_option("--ref", sc.reference, "Reference RTTM")->required();
  c_sc->add_option("--hyp", sc.hypotheses, "Hypothesis RTTM, optionally label=path (repeatable)")
      ->required();
  c_sc->add_option("--collar", sc.collar, "Collar in seconds")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_sc->add_option("--plot", sc.plot, "Write an SVG bar chart of corpus DER per hypothesis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c_sim) return RunSimulate(sim);
    if (*c_feat) return RunFeatures(feat);
    if (*c_emb) return RunEmbed(emb);
    if (*c_train) return RunTrain(tr, false);
    if (*c_adapt) return RunTrain(ad, true);
    if (*c_inf) return RunInfer(inf);
    if (*c_sc) return RunScore(sc);
  } catch (const UsageError &e) {
    std::fprintf(stderr, "eend: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "eend: error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
