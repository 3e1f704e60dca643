// eend/config.cc
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

#include "eend/config.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "eend/common.h"

namespace eend {

namespace {

std::string Trim(const std::string &s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::Parse(std::istream &is, const std::string &name) {
  KeyValueConfig cfg;
  cfg.name_ = name;
  std::string line;
  int32_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    std::string where = name + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    std::string key = Trim(line.substr(0, eq)), value = Trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
    if (cfg.values_.count(key)) throw ParseError(where + ": duplicate key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::Load(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config " + path);
  return Parse(is, path);
}

void KeyValueConfig::Get(const std::string &key, std::string *out) const {
  auto it = values_.find(key);
  if (it != values_.end()) *out = it->second;
}

namespace {

template <typename T>
void ParseNumber(const std::string &cfg, const std::string &key,
                 const std::string &text, T *out) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(cfg + ": bad value '" + text + "' for " + key);
  }
  *out = v;
}

}  // namespace

void KeyValueConfig::Get(const std::string &key, int32_t *out) const {
  auto it = values_.find(key);
  if (it != values_.end()) ParseNumber(name_, key, it->second, out);
}

void KeyValueConfig::Get(const std::string &key, uint64_t *out) const {
  auto it = values_.find(key);
  if (it != values_.end()) ParseNumber(name_, key, it->second, out);
}

void KeyValueConfig::Get(const std::string &key, double *out) const {
  auto it = values_.find(key);
  if (it != values_.end()) ParseNumber(name_, key, it->second, out);
}

void KeyValueConfig::Get(const std::string &key, bool *out) const {
  auto it = values_.find(key);
  if (it == values_.end()) return;
  const std::string &v = it->second;
  if (v == "1" || v == "true" || v == "yes") {
    *out = true;
  } else if (v == "0" || v == "false" || v == "no") {
    *out = false;
  } else {
    throw ParseError(name_ + ": bad boolean '" + v + "' for " + key);
  }
}

void KeyValueConfig::RejectUnknown(const std::vector<std::string> &known) const {
  for (const auto &[key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParseError(name_ + ": unknown key '" + key + "'");
    }
  }
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace eend
