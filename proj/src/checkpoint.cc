// eend/checkpoint.cc
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

#include "eend/checkpoint.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "eend/binary-io.h"
#include "eend/config.h"

namespace eend {

namespace {

const std::vector<std::string> kManifestKeys = {
    "format_version", "variant", "n_blocks", "d_model", "n_heads", "ff_dim",
    "dropout", "feature_dim", "embedding_dim", "window_size", "embedding_seed",
    "oracle_vad_on_embeddings", "mode", "alpha", "epoch", "step", "val_der",
    "num_parameters", "weights_checksum"};

std::string Hex(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<char> EncodeWeights(const ag::ParameterSet &params) {
  ByteWriter w;
  w.Tag("EEWT");
  w.U32(kCheckpointVersion);
  w.U32(static_cast<uint32_t>(params.size()));
  for (int32_t i = 0; i < params.size(); ++i) {
    const ag::Parameter &p = params[i];
    w.U32(static_cast<uint32_t>(p.name.size()));
    w.Str(p.name);
    w.U32(static_cast<uint32_t>(p.value.rows()));
    w.U32(static_cast<uint32_t>(p.value.cols()));
    for (Eigen::Index k = 0; k < p.value.size(); ++k) w.F64(p.value.data()[k]);
  }
  uint64_t sum = Fnv1a64(w.Bytes().data(), w.Bytes().size());
  w.U64(sum);
  return w.Bytes();
}

}  // namespace

void SaveCheckpoint(const std::string &dir, const EendModel &model,
                    const CheckpointInfo &info) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<char> weights = EncodeWeights(model.params());
  uint64_t checksum = Fnv1a64(weights.data(), weights.size());
  {
    std::ofstream os(fs::path(dir) / "weights.bin", std::ios::binary);
    os.write(weights.data(), static_cast<std::streamsize>(weights.size()));
    if (!os) throw Error("cannot write " + dir + "/weights.bin");
  }
  const ModelConfig &c = model.config();
  std::ostringstream m;
  m << "format_version = " << kCheckpointVersion << '\n'
    << "variant = " << VariantName(c.variant) << '\n'
    << "n_blocks = " << c.encoder.n_blocks << '\n'
    << "d_model = " << c.encoder.d_model << '\n'
    << "n_heads = " << c.encoder.n_heads << '\n'
    << "ff_dim = " << c.encoder.ff_dim << '\n'
    << "dropout = " << FormatDouble(c.encoder.dropout) << '\n'
    << "feature_dim = " << c.feature_dim << '\n'
    << "embedding_dim = " << c.embedding_dim << '\n'
    << "window_size = " << FormatDouble(info.window_size) << '\n'
    << "embedding_seed = " << info.embedding_seed << '\n'
    << "oracle_vad_on_embeddings = " << (info.oracle_vad_on_embeddings ? 1 : 0) << '\n'
    << "mode = " << info.mode << '\n'
    << "alpha = " << FormatDouble(info.alpha) << '\n'
    << "epoch = " << info.epoch << '\n'
    << "step = " << info.step << '\n'
    << "val_der = " << FormatDouble(info.val_der) << '\n'
    << "num_parameters = " << model.NumParameters() << '\n'
    << "weights_checksum = " << Hex(checksum) << '\n';
  std::ofstream os(fs::path(dir) / "manifest.txt", std::ios::binary);
  os << m.str();
  if (!os) throw Error("cannot write " + dir + "/manifest.txt");
}

Checkpoint LoadCheckpoint(const std::string &dir, std::optional<Variant> expected) {
  namespace fs = std::filesystem;
  std::string manifest_path = (fs::path(dir) / "manifest.txt").string();
  if (!fs::exists(manifest_path)) throw Error("no checkpoint manifest at " + manifest_path);
  KeyValueConfig kv = KeyValueConfig::Load(manifest_path);
  kv.RejectUnknown(kManifestKeys);
  for (const std::string &key : kManifestKeys) {
    if (!kv.Has(key)) throw ParseError(manifest_path + ": missing key '" + key + "'");
  }

  int32_t version = 0;
  kv.Get("format_version", &version);
  if (version != static_cast<int32_t>(kCheckpointVersion)) {
    throw Error(manifest_path + ": checkpoint format version " + std::to_string(version) +
                " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint ck;
  std::string variant, checksum;
  kv.Get("variant", &variant);
  ck.config.variant = ParseVariant(variant);
  if (expected && *expected != ck.config.variant) {
    throw Error("checkpoint " + dir + " holds variant " + variant +
                " but variant " + VariantName(*expected) + " was requested");
  }
  kv.Get("n_blocks", &ck.config.encoder.n_blocks);
  kv.Get("d_model", &ck.config.encoder.d_model);
  kv.Get("n_heads", &ck.config.encoder.n_heads);
  kv.Get("ff_dim", &ck.config.encoder.ff_dim);
  kv.Get("dropout", &ck.config.encoder.dropout);
  kv.Get("feature_dim", &ck.config.feature_dim);
  kv.Get("embedding_dim", &ck.config.embedding_dim);
  kv.Get("window_size", &ck.info.window_size);
  kv.Get("embedding_seed", &ck.info.embedding_seed);
  kv.Get("oracle_vad_on_embeddings", &ck.info.oracle_vad_on_embeddings);
  kv.Get("mode", &ck.info.mode);
  kv.Get("alpha", &ck.info.alpha);
  kv.Get("epoch", &ck.info.epoch);
  int32_t step = 0;
  kv.Get("step", &step);
  ck.info.step = step;
  kv.Get("val_der", &ck.info.val_der);
  kv.Get("weights_checksum", &checksum);
  ck.config.encoder.Validate();

  std::string weights_path = (fs::path(dir) / "weights.bin").string();
  std::vector<char> bytes = ReadFileBytes(weights_path);
  if (Hex(Fnv1a64(bytes.data(), bytes.size())) != checksum) {
    throw Error(weights_path + ": does not match the manifest checksum");
  }
  if (bytes.size() < 8) throw ParseError(weights_path + ": truncated");
  uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  if (Fnv1a64(bytes.data(), bytes.size() - 8) != stored) {
    throw Error(weights_path + ": payload checksum mismatch (corrupted file)");
  }
  ByteReader r(bytes, weights_path);
  if (r.Tag() != "EEWT") throw ParseError(weights_path + ": bad magic");
  uint32_t wversion = r.U32();
  if (wversion != kCheckpointVersion) {
    throw Error(weights_path + ": weights format version " + std::to_string(wversion) +
                " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  uint32_t count = r.U32();
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.Str(r.U32());
    uint32_t rows = r.U32(), cols = r.U32();
    if (static_cast<uint64_t>(rows) * cols * 8 > r.Remaining()) {
      throw ParseError(weights_path + ": truncated tensor " + name);
    }
    Matrix value(rows, cols);
    for (Eigen::Index k = 0; k < value.size(); ++k) value.data()[k] = r.F64();
    ck.params.Add(name, std::move(value));
  }
  if (r.Remaining() != 8) throw ParseError(weights_path + ": trailing bytes");
  // Validates names and shapes against the manifest configuration.
  EendModel check(ck.config, ck.params);
  (void)check;
  return ck;
}

}  // namespace eend
