// eend/config.h
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

#ifndef EEND_CONFIG_H_
#define EEND_CONFIG_H_

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace eend {

// Flat "key = value" text. '#' starts a comment, blank lines are ignored,
// keys may appear only once.
class KeyValueConfig {
 public:
  static KeyValueConfig Parse(std::istream &is, const std::string &name = "<config>");
  static KeyValueConfig Load(const std::string &path);

  bool Has(const std::string &key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string> &values() const { return values_; }
  void Set(const std::string &key, const std::string &value) { values_[key] = value; }

  // Each getter leaves *out untouched when the key is absent and throws
  // ParseError when the value does not parse.
  void Get(const std::string &key, std::string *out) const;
  void Get(const std::string &key, int32_t *out) const;
  void Get(const std::string &key, uint64_t *out) const;
  void Get(const std::string &key, double *out) const;
  void Get(const std::string &key, bool *out) const;

  // Throws ParseError naming the first key not in `known`.
  void RejectUnknown(const std::vector<std::string> &known) const;

 private:
  std::string name_;
  std::map<std::string, std::string> values_;
};

// Round-trippable text for a double ("%.17g").
std::string FormatDouble(double v);

}  // namespace eend

#endif  // EEND_CONFIG_H_
