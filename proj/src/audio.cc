// eend/audio.cc
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

#include "eend/audio.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "eend/binary-io.h"

namespace eend {

void AudioSignal::Validate() const {
  if (sample_rate != kSampleRate) {
    throw Error("expected 8000 Hz audio, got " + std::to_string(sample_rate) +
                " Hz");
  }
  for (double s : samples) {
    if (!std::isfinite(s)) throw Error("audio contains a non-finite sample");
  }
}

AudioSignal ReadWave(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
  ByteReader r(bytes, path);

  if (r.Tag() != "RIFF") throw ParseError(path + ": not a RIFF file");
  r.U32();
  if (r.Tag() != "WAVE") throw ParseError(path + ": not a WAVE file");

  bool have_fmt = false;
  int32_t sample_rate = 0;
  AudioSignal audio;
  while (!r.AtEnd()) {
    std::string id = r.Tag();
    uint32_t size = r.U32();
    if (id == "fmt ") {
      if (size < 16) throw ParseError(path + ": short fmt chunk");
      uint16_t format = r.U16();
      uint16_t channels = r.U16();
      sample_rate = static_cast<int32_t>(r.U32());
      r.U32();  // byte rate
      r.U16();  // block align
      uint16_t bits = r.U16();
      r.Skip(size - 16);
      if (format != 1 || channels != 1 || bits != 16) {
        throw ParseError(path + ": only mono 16-bit PCM is supported");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ParseError(path + ": data chunk before fmt");
      if (size % 2 != 0) throw ParseError(path + ": odd data size");
      size_t n = size / 2;
      audio.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        audio.samples[i] = static_cast<int16_t>(r.U16()) / 32768.0;
      }
      break;
    } else {
      r.Skip(size + (size & 1));
    }
  }
  if (!have_fmt) throw ParseError(path + ": missing fmt chunk");
  audio.sample_rate = sample_rate;
  return audio;
}

void WriteWave(const std::string &path, const AudioSignal &audio) {
  audio.Validate();
  ByteWriter w;
  uint32_t data_size = static_cast<uint32_t>(audio.samples.size() * 2);
  w.Tag("RIFF");
  w.U32(36 + data_size);
  w.Tag("WAVE");
  w.Tag("fmt ");
  w.U32(16);
  w.U16(1);
  w.U16(1);
  w.U32(static_cast<uint32_t>(audio.sample_rate));
  w.U32(static_cast<uint32_t>(audio.sample_rate * 2));
  w.U16(2);
  w.U16(16);
  w.Tag("data");
  w.U32(data_size);
  for (double s : audio.samples) {
    double v = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    w.U16(static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  w.Save(path);
}

}  // namespace eend
