// eend/simulate.h
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

#ifndef EEND_SIMULATE_H_
#define EEND_SIMULATE_H_

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "eend/audio.h"
#include "eend/segments.h"

namespace eend {

// splitmix64 step; derives independent seeds from (seed, index) pairs.
uint64_t MixSeed(uint64_t seed, uint64_t index);

// Pseudo-speech source: a jittered glottal pulse train plus breath noise,
// shaped by three speaker-specific formant resonators and modulated at a
// syllabic rate. All voice parameters are drawn from the speaker seed.
class SynthSpeaker {
 public:
  explicit SynthSpeaker(uint64_t seed);

  // `duration` seconds of audio at 8 kHz, amplitude within [-1, 1].
  // Identical (speaker, utterance_seed, duration) give identical output.
  std::vector<double> Generate(double duration, uint64_t utterance_seed) const;

  uint64_t seed() const { return seed_; }
  double f0() const { return f0_; }
  const double *formants() const { return formants_; }

 private:
  uint64_t seed_;
  double f0_;
  double formants_[3];
  double bandwidths_[3];
  double gains_[3];
  double breathiness_;
  double syllable_rate_;
  double level_;
};

struct MixtureSpec {
  int32_t n_speakers = 2;
  double target_overlap = 0.344;  // fraction of speech time with >= 2 talkers
  double pause_scale = 0.5;       // mean of the exponential inter-turn gap, s
  double min_utterance = 1.0;     // s
  double max_utterance = 4.0;     // s
  double max_overlap = 2.0;       // bound on a negative gap, s
  double max_duration = 30.0;     // s
  // White noise floor relative to the speech RMS; +inf disables it.
  double noise_snr_db = std::numeric_limits<double>::infinity();
  std::vector<uint64_t> speaker_pool;  // synthetic speaker seeds
  uint64_t seed = 0;
  std::string recording_id = "mix";

  void Validate() const;
};

struct Conversation {
  AudioSignal audio;
  SegmentList segments;  // ground truth, times on a 10 ms grid
};

// Speakers alternate turns. After each turn the next one either starts a
// negative gap uniform in (0, min(max_overlap, previous turn)) before the end
// of the timeline (with a calibrated probability) or after an exponential
// pause. A speaker never overlaps itself. Deterministic given the spec.
Conversation SimulateConversation(const MixtureSpec &spec);

// Probability of starting a turn in overlap that makes the mean per-mixture
// overlap ratio match spec.target_overlap. Depends only on the timing
// parameters (not on spec.seed or the pool).
double CalibrateOverlapProbability(const MixtureSpec &spec);

// (time with >= 2 active speakers) / (time with >= 1). Throws when there is
// no speech at all.
double ComputeOverlapRatio(const SegmentList &segments);
double ComputeOverlapRatio(const LabelMatrix &labels);

struct DatasetEntry {
  std::string id;
  std::string wav;   // path relative to the dataset directory
  std::string rttm;  // path relative to the dataset directory
  double duration = 0.0;
  double overlap_ratio = 0.0;
};

struct DatasetSpec {
  int32_t count = 10;
  uint64_t seed = 0;
  int32_t pool_size = 16;  // speakers available to this dataset
  MixtureSpec mixture;     // speaker_pool/seed/recording_id are filled in
};

// Builds the i-th mixture spec of a dataset (pool drawn from `seed`,
// mixture seed MixSeed(seed, i), id "mix%04d").
MixtureSpec DatasetMixture(const DatasetSpec &spec, int32_t index);

// Writes wav/<id>.wav, rttm/<id>.rttm and manifest.tsv under `dir`.
std::vector<DatasetEntry> WriteDataset(const std::string &dir,
                                       const DatasetSpec &spec);

// manifest.tsv: header "id\twav\trttm\tduration\toverlap_ratio", then one
// line per recording.
std::vector<DatasetEntry> ReadManifest(const std::string &dir);
void WriteManifest(const std::string &dir, const std::vector<DatasetEntry> &entries);

}  // namespace eend

#endif  // EEND_SIMULATE_H_
