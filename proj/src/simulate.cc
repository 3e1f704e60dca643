// eend/simulate.cc
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

#include "eend/simulate.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

namespace eend {

uint64_t MixSeed(uint64_t seed, uint64_t index) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

double Uniform01(std::mt19937_64 &rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double UniformIn(std::mt19937_64 &rng, double lo, double hi) {
  return lo + (hi - lo) * Uniform01(rng);
}

}  // namespace

SynthSpeaker::SynthSpeaker(uint64_t seed) : seed_(seed) {
  std::mt19937_64 rng(MixSeed(seed, 0x5eed));
  // Log-uniform pitch between a low male and a high female voice.
  f0_ = std::exp(UniformIn(rng, std::log(85.0), std::log(270.0)));
  formants_[0] = UniformIn(rng, 300.0, 900.0);
  formants_[1] = UniformIn(rng, 1000.0, 2300.0);
  formants_[2] = UniformIn(rng, 2400.0, 3600.0);
  for (int32_t i = 0; i < 3; ++i) {
    bandwidths_[i] = UniformIn(rng, 60.0, 220.0);
    gains_[i] = std::pow(10.0, UniformIn(rng, -12.0, 0.0) / 20.0);
  }
  breathiness_ = UniformIn(rng, 0.05, 0.5);
  syllable_rate_ = UniformIn(rng, 3.0, 6.0);
  level_ = UniformIn(rng, 0.06, 0.15);
}

std::vector<double> SynthSpeaker::Generate(double duration,
                                           uint64_t utterance_seed) const {
  EEND_CHECK(duration >= 0.0, "negative utterance duration");
  const int64_t n = std::llround(duration * kSampleRate);
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  std::mt19937_64 rng(MixSeed(seed_, utterance_seed));
  std::normal_distribution<double> normal(0.0, 1.0);

  // Excitation: pulse train with slow pitch drift, plus noise.
  const double drift_rate = UniformIn(rng, 0.5, 2.0);
  const double drift_phase = UniformIn(rng, 0.0, 2.0 * std::numbers::pi);
  std::vector<double> source(n);
  double phase = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / kSampleRate;
    double f0 = f0_ * (1.0 + 0.06 * std::sin(2.0 * std::numbers::pi * drift_rate * t + drift_phase));
    phase += f0 / kSampleRate;
    double pulse = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      pulse = 1.0;
    }
    source[i] = pulse + breathiness_ * 0.1 * normal(rng);
  }

  // Parallel formant resonators.
  std::vector<double> voiced(n, 0.0);
  for (int32_t k = 0; k < 3; ++k) {
    double r = std::exp(-std::numbers::pi * bandwidths_[k] / kSampleRate);
    double theta = 2.0 * std::numbers::pi * formants_[k] / kSampleRate;
    double a1 = 2.0 * r * std::cos(theta), a2 = -r * r;
    double y1 = 0.0, y2 = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      double y = (1.0 - r) * source[i] + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      voiced[i] += gains_[k] * y;
    }
  }

  // Syllabic envelope between 0.3 and 1 with a random rate wobble, and 10 ms
  // fades at both ends.
  const double rate = syllable_rate_ * UniformIn(rng, 0.85, 1.15);
  const double env_phase = UniformIn(rng, 0.0, 1.0);
  const int64_t fade = std::min<int64_t>(80, n / 2);
  double energy = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / kSampleRate;
    double syl = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (rate * t + env_phase));
    double env = 0.3 + 0.7 * syl;
    if (i < fade) env *= static_cast<double>(i) / fade;
    if (n - 1 - i < fade) env *= static_cast<double>(n - 1 - i) / fade;
    voiced[i] *= env;
    energy += voiced[i] * voiced[i];
  }
  double rms = std::sqrt(energy / n);
  double gain = rms > 0 ? level_ * UniformIn(rng, 0.8, 1.25) / rms : 0.0;
  for (int64_t i = 0; i < n; ++i) out[i] = std::clamp(voiced[i] * gain, -1.0, 1.0);
  return out;
}

void MixtureSpec::Validate() const {
  EEND_CHECK(n_speakers >= 1, "need at least one speaker");
  EEND_CHECK(target_overlap >= 0.0 && target_overlap < 1.0,
             "target overlap must be in [0, 1)");
  EEND_CHECK(pause_scale > 0.0, "pause scale must be positive");
  EEND_CHECK(min_utterance > 0.0 && max_utterance >= min_utterance,
             "invalid utterance length range");
  EEND_CHECK(max_overlap >= 0.0, "max overlap must be non-negative");
  EEND_CHECK(max_duration >= max_utterance + 1.0,
             "max duration must exceed the longest utterance by 1 s");
  if (speaker_pool.empty()) throw Error("utterance pool is empty");
  if (static_cast<int32_t>(speaker_pool.size()) < n_speakers) {
    throw Error("speaker pool smaller than the number of speakers");
  }
}

namespace {

struct Turn {
  int32_t speaker;
  int64_t start;     // centiseconds
  int64_t duration;  // centiseconds
};

// Timeline in integer centiseconds. Every turn consumes the same four random
// draws whatever the overlap probability, so calibration sees common random
// numbers.
std::vector<Turn> PlanTurns(const MixtureSpec &spec, double p_overlap,
                            uint64_t seed, int64_t *length) {
  std::mt19937_64 rng(seed);
  const int64_t max_cs = std::llround(spec.max_duration * 100.0);
  const int32_t first = static_cast<int32_t>(rng() % spec.n_speakers);
  int64_t timeline_end =
      std::llround(std::min(1.0, -std::log1p(-Uniform01(rng)) * spec.pause_scale) * 100.0);
  std::vector<int64_t> last_end(spec.n_speakers, 0);
  std::vector<Turn> turns;
  int64_t prev_duration = 0;
  for (int32_t k = 0;; ++k) {
    double u_dur = Uniform01(rng), u_dec = Uniform01(rng), u_neg = Uniform01(rng),
           u_exp = Uniform01(rng);
    int64_t duration = std::llround(
        (spec.min_utterance + u_dur * (spec.max_utterance - spec.min_utterance)) * 100.0);
    int32_t speaker = (first + k) % spec.n_speakers;
    int64_t start = timeline_end;
    if (k > 0) {
      if (u_dec < p_overlap) {
        double bound = std::min(spec.max_overlap, prev_duration / 100.0);
        start = timeline_end - std::llround(u_neg * bound * 100.0);
      } else {
        start = timeline_end + std::llround(-std::log1p(-u_exp) * spec.pause_scale * 100.0);
      }
    }
    start = std::max({start, last_end[speaker], int64_t{0}});
    if (start + duration > max_cs) break;
    turns.push_back({speaker, start, duration});
    last_end[speaker] = start + duration;
    timeline_end = std::max(timeline_end, start + duration);
    prev_duration = duration;
  }
  *length = std::min(max_cs, timeline_end + 50);
  return turns;
}

SegmentList TurnsToSegments(const std::vector<Turn> &turns,
                            const std::vector<std::string> &names,
                            const std::string &recording_id) {
  SegmentList segments;
  for (const Turn &t : turns) {
    segments.push_back({recording_id, names[t.speaker], t.start / 100.0,
                        t.duration / 100.0});
  }
  return segments;
}

constexpr uint64_t kPilotSeed = 0xCA11B8A7E;
constexpr int32_t kPilotMixtures = 400;

double PilotOverlap(const MixtureSpec &spec, double p) {
  std::vector<std::string> names;
  for (int32_t s = 0; s < spec.n_speakers; ++s) names.push_back(std::to_string(s));
  double sum = 0.0;
  int32_t count = 0;
  for (int32_t i = 0; i < kPilotMixtures; ++i) {
    int64_t length = 0;
    auto turns = PlanTurns(spec, p, MixSeed(kPilotSeed, i), &length);
    if (turns.empty()) continue;
    sum += ComputeOverlapRatio(TurnsToSegments(turns, names, "pilot"));
    ++count;
  }
  return count > 0 ? sum / count : 0.0;
}

double SearchOverlapProbability(const MixtureSpec &spec) {
  if (PilotOverlap(spec, 1.0) <= spec.target_overlap) return 1.0;

  // Closed-form starting bracket from the expected overlap per turn:
  // r = p E[o] / (E[u] - p E[o]) with E[o] ~ E[min(max_overlap, u)] / 2.
  const double mean_utt = 0.5 * (spec.min_utterance + spec.max_utterance);
  const double mean_ov = 0.5 * std::min(spec.max_overlap, mean_utt);
  const double r = spec.target_overlap;
  double guess = std::clamp(r * mean_utt / (mean_ov * (1.0 + r)), 0.0, 1.0);

  // Correction loop: bisection on the pilot estimate around the guess.
  double lo = 0.0, hi = 1.0;
  double p = guess;
  for (int32_t iter = 0; iter < 30; ++iter) {
    double measured = PilotOverlap(spec, p);
    if (measured < r) {
      lo = p;
    } else {
      hi = p;
    }
    p = 0.5 * (lo + hi);
  }
  return p;
}

}  // namespace

double CalibrateOverlapProbability(const MixtureSpec &spec) {
  if (spec.target_overlap <= 0.0 || spec.n_speakers < 2) return 0.0;
  // The result depends only on the timing parameters; datasets ask for the
  // same calibration once per mixture.
  using Key = std::tuple<int32_t, double, double, double, double, double, double>;
  static std::mutex mu;
  static std::map<Key, double> cache;
  Key key{spec.n_speakers, spec.target_overlap, spec.pause_scale, spec.min_utterance,
          spec.max_utterance, spec.max_overlap, spec.max_duration};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  double p = SearchOverlapProbability(spec);
  std::lock_guard<std::mutex> lock(mu);
  cache[key] = p;
  return p;
}

Conversation SimulateConversation(const MixtureSpec &spec) {
  spec.Validate();
  const double p_overlap = CalibrateOverlapProbability(spec);

  std::mt19937_64 pick_rng(MixSeed(spec.seed, 1));
  std::vector<uint64_t> pool = spec.speaker_pool;
  for (int32_t s = 0; s < spec.n_speakers; ++s) {
    std::uniform_int_distribution<size_t> dist(s, pool.size() - 1);
    std::swap(pool[s], pool[dist(pick_rng)]);
  }
  std::vector<std::string> names;
  for (int32_t s = 0; s < spec.n_speakers; ++s) {
    names.push_back("spk" + std::to_string(pool[s] % 100000));
  }
  if (std::set<std::string>(names.begin(), names.end()).size() != names.size()) {
    for (int32_t s = 0; s < spec.n_speakers; ++s) names[s] += "_" + std::to_string(s);
  }

  int64_t length_cs = 0;
  std::vector<Turn> turns = PlanTurns(spec, p_overlap, MixSeed(spec.seed, 2), &length_cs);

  Conversation conv;
  conv.audio.samples.assign(length_cs * (kSampleRate / 100), 0.0);
  for (size_t k = 0; k < turns.size(); ++k) {
    const Turn &t = turns[k];
    SynthSpeaker speaker(pool[t.speaker]);
    std::vector<double> utt = speaker.Generate(t.duration / 100.0, MixSeed(spec.seed, 100 + k));
    int64_t offset = t.start * (kSampleRate / 100);
    for (size_t i = 0; i < utt.size(); ++i) conv.audio.samples[offset + i] += utt[i];
  }
  if (std::isfinite(spec.noise_snr_db)) {
    double energy = 0.0;
    for (double s : conv.audio.samples) energy += s * s;
    double rms = std::sqrt(energy / std::max<size_t>(1, conv.audio.samples.size()));
    double sigma = rms / std::pow(10.0, spec.noise_snr_db / 20.0);
    std::mt19937_64 noise_rng(MixSeed(spec.seed, 3));
    std::normal_distribution<double> normal(0.0, sigma);
    for (double &s : conv.audio.samples) s += normal(noise_rng);
  }
  for (double &s : conv.audio.samples) s = std::clamp(s, -1.0, 1.0);
  conv.segments = TurnsToSegments(turns, names, spec.recording_id);
  return conv;
}

double ComputeOverlapRatio(const SegmentList &segments) {
  std::vector<std::pair<double, int32_t>> events;
  for (const Segment &s : MergeSegments(segments)) {
    events.emplace_back(s.onset, +1);
    events.emplace_back(s.End(), -1);
  }
  // Ends sort before starts at equal times.
  std::sort(events.begin(), events.end());
  double speech = 0.0, overlap = 0.0;
  int32_t active = 0;
  for (size_t i = 0; i + 1 < events.size(); ++i) {
    active += events[i].second;
    double dur = events[i + 1].first - events[i].first;
    if (active >= 1) speech += dur;
    if (active >= 2) overlap += dur;
  }
  if (speech <= 0.0) throw Error("overlap ratio undefined: no speech");
  return overlap / speech;
}

double ComputeOverlapRatio(const LabelMatrix &labels) {
  int64_t speech = 0, overlap = 0;
  for (int32_t t = 0; t < labels.NumFrames(); ++t) {
    int32_t n = 0;
    for (int32_t s = 0; s < labels.NumSpeakers(); ++s) n += labels.data(t, s);
    speech += n >= 1;
    overlap += n >= 2;
  }
  if (speech == 0) throw Error("overlap ratio undefined: no speech");
  return static_cast<double>(overlap) / static_cast<double>(speech);
}

MixtureSpec DatasetMixture(const DatasetSpec &spec, int32_t index) {
  MixtureSpec m = spec.mixture;
  m.speaker_pool.clear();
  for (int32_t i = 0; i < spec.pool_size; ++i) {
    m.speaker_pool.push_back(MixSeed(MixSeed(spec.seed, 0xB001), i));
  }
  m.seed = MixSeed(spec.seed, 1000 + index);
  char id[32];
  std::snprintf(id, sizeof(id), "mix%04d", index);
  m.recording_id = id;
  return m;
}

std::vector<DatasetEntry> WriteDataset(const std::string &dir,
                                       const DatasetSpec &spec) {
  if (spec.count < 1) throw Error("dataset count must be at least 1");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "wav");
  fs::create_directories(fs::path(dir) / "rttm");
  std::vector<DatasetEntry> entries;
  for (int32_t i = 0; i < spec.count; ++i) {
    MixtureSpec m = DatasetMixture(spec, i);
    Conversation conv = SimulateConversation(m);
    DatasetEntry e;
    e.id = m.recording_id;
    e.wav = "wav/" + e.id + ".wav";
    e.rttm = "rttm/" + e.id + ".rttm";
    e.duration = conv.audio.Duration();
    e.overlap_ratio = ComputeOverlapRatio(conv.segments);
    WriteWave((fs::path(dir) / e.wav).string(), conv.audio);
    WriteRttm((fs::path(dir) / e.rttm).string(), conv.segments);
    entries.push_back(e);
  }
  WriteManifest(dir, entries);
  return entries;
}

void WriteManifest(const std::string &dir, const std::vector<DatasetEntry> &entries) {
  std::string path = (std::filesystem::path(dir) / "manifest.tsv").string();
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << "id\twav\trttm\tduration\toverlap_ratio\n";
  char buf[64];
  for (const DatasetEntry &e : entries) {
    std::snprintf(buf, sizeof(buf), "%.2f\t%.4f", e.duration, e.overlap_ratio);
    os << e.id << '\t' << e.wav << '\t' << e.rttm << '\t' << buf << '\n';
  }
}

std::vector<DatasetEntry> ReadManifest(const std::string &dir) {
  std::string path = (std::filesystem::path(dir) / "manifest.tsv").string();
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("id\t", 0) != 0) {
    throw ParseError(path + ": missing header");
  }
  std::vector<DatasetEntry> entries;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    DatasetEntry e;
    if (!(ls >> e.id >> e.wav >> e.rttm >> e.duration >> e.overlap_ratio)) {
      throw ParseError(path + ": malformed line '" + line + "'");
    }
    entries.push_back(e);
  }
  if (entries.empty()) throw ParseError(path + ": no recordings");
  return entries;
}

}  // namespace eend
