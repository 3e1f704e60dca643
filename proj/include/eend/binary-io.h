// eend/binary-io.h
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

#ifndef EEND_BINARY_IO_H_
#define EEND_BINARY_IO_H_

// Little-endian byte (de)serialization shared by the WAV, matrix and
// checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "eend/common.h"

namespace eend {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class ByteReader {
 public:
  ByteReader(const std::vector<char> &bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  bool AtEnd() const { return pos_ >= bytes_.size(); }
  size_t Remaining() const { return bytes_.size() - pos_; }
  size_t Position() const { return pos_; }

  std::string Tag() {
    Need(4);
    std::string s(bytes_.data() + pos_, 4);
    pos_ += 4;
    return s;
  }
  uint16_t U16() { return Read<uint16_t>(); }
  uint32_t U32() { return Read<uint32_t>(); }
  uint64_t U64() { return Read<uint64_t>(); }
  float F32() { return Read<float>(); }
  double F64() { return Read<double>(); }
  std::string Str(size_t n) {
    Need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void Skip(size_t n) {
    Need(n);
    pos_ += n;
  }

 private:
  template <typename T>
  T Read() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void Need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError(name_ + ": truncated");
  }

  const std::vector<char> &bytes_;
  std::string name_;
  size_t pos_ = 0;
};

class ByteWriter {
 public:
  void Tag(const char *tag) { bytes_.insert(bytes_.end(), tag, tag + 4); }
  void U16(uint16_t v) { Write(v); }
  void U32(uint32_t v) { Write(v); }
  void U64(uint64_t v) { Write(v); }
  void F32(float v) { Write(v); }
  void F64(double v) { Write(v); }
  void Str(const std::string &s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  const std::vector<char> &Bytes() const { return bytes_; }
  void Save(const std::string &path) const;

 private:
  template <typename T>
  void Write(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.insert(bytes_.end(), buf, buf + sizeof(T));
  }

  std::vector<char> bytes_;
};

std::vector<char> ReadFileBytes(const std::string &path);

// FNV-1a, used as a payload checksum.
uint64_t Fnv1a64(const char *data, size_t n);

}  // namespace eend

#endif  // EEND_BINARY_IO_H_
