// eend/audio.h
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

#ifndef EEND_AUDIO_H_
#define EEND_AUDIO_H_

#include <cstdint>
#include <string>
#include <vector>

#include "eend/common.h"

namespace eend {

struct AudioSignal {
  std::vector<double> samples;  // nominally in [-1, 1]
  int32_t sample_rate = kSampleRate;

  double Duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  // Throws unless the rate is 8 kHz and every sample is finite.
  void Validate() const;
};

// Mono 16-bit PCM only.
AudioSignal ReadWave(const std::string &path);
void WriteWave(const std::string &path, const AudioSignal &audio);

}  // namespace eend

#endif  // EEND_AUDIO_H_
