// eend/model.cc
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

#include "eend/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eend {

std::string VariantName(Variant v) {
  switch (v) {
    case Variant::kBaseline:
      return "baseline";
    case Variant::kEmbToEda:
      return "A";
    case Variant::kEmbToEncoder:
      return "B";
    case Variant::kConcat:
      return "C";
  }
  return "?";
}

Variant ParseVariant(const std::string &name) {
  if (name == "baseline") return Variant::kBaseline;
  if (name == "A") return Variant::kEmbToEda;
  if (name == "B") return Variant::kEmbToEncoder;
  if (name == "C") return Variant::kConcat;
  throw Error("unknown variant '" + name + "' (expected baseline, A, B or C)");
}

bool UsesFeatures(Variant v) { return v != Variant::kEmbToEncoder; }
bool UsesEmbeddings(Variant v) { return v != Variant::kBaseline; }

void EncoderConfig::Validate() const {
  EEND_CHECK(n_blocks >= 1, "encoder needs at least one block");
  EEND_CHECK(d_model >= 1 && n_heads >= 1, "d_model and n_heads must be positive");
  EEND_CHECK(d_model % n_heads == 0, "d_model must be divisible by n_heads");
  EEND_CHECK(ff_dim >= 1, "ff_dim must be positive");
  EEND_CHECK(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
}

int32_t ModelConfig::InputDim() const {
  switch (variant) {
    case Variant::kBaseline:
    case Variant::kEmbToEda:
      return feature_dim;
    case Variant::kEmbToEncoder:
      return embedding_dim;
    case Variant::kConcat:
      return feature_dim + embedding_dim;
  }
  return 0;
}

PosteriorMatrix ComputePosteriors(const Matrix &encoded,
                                  const AttractorSet &attractors,
                                  int32_t num_speakers) {
  if (encoded.cols() != attractors.attractors.cols()) {
    throw Error("posteriors: encoder dimension " + std::to_string(encoded.cols()) +
                " differs from attractor dimension " +
                std::to_string(attractors.attractors.cols()));
  }
  EEND_CHECK(num_speakers >= 1 && num_speakers <= attractors.size(),
             "posteriors: not enough attractors");
  PosteriorMatrix out;
  out.data = (encoded * attractors.attractors.topRows(num_speakers).transpose())
                 .unaryExpr([](double z) { return Sigmoid(z); });
  return out;
}

namespace {

Matrix XavierUniform(int32_t in, int32_t out, std::mt19937_64 *rng) {
  double limit = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(in, out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(*rng);
  return m;
}

Matrix Uniform(int32_t rows, int32_t cols, double limit, std::mt19937_64 *rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(*rng);
  return m;
}

std::string Block(const std::string &prefix, int32_t i) {
  return prefix + "." + std::to_string(i);
}

}  // namespace

EendModel::EendModel(const ModelConfig &config, uint64_t seed) : config_(config) {
  config_.encoder.Validate();
  CreateParameters(seed);
}

EendModel::EendModel(const ModelConfig &config, ag::ParameterSet params)
    : config_(config) {
  config_.encoder.Validate();
  CreateParameters(0);
  if (params.size() != params_.size()) {
    throw Error("checkpoint has " + std::to_string(params.size()) +
                " tensors, model expects " + std::to_string(params_.size()));
  }
  for (int32_t i = 0; i < params_.size(); ++i) {
    const ag::Parameter &want = params_[i], &got = params[i];
    if (want.name != got.name || want.value.rows() != got.value.rows() ||
        want.value.cols() != got.value.cols()) {
      throw Error("parameter mismatch at '" + want.name + "' (got '" + got.name +
                  "' " + std::to_string(got.value.rows()) + "x" +
                  std::to_string(got.value.cols()) + ")");
    }
  }
  params_ = std::move(params);
}

void EendModel::AddTransformerBlock(const std::string &p, int32_t d, int32_t ff,
                                    std::mt19937_64 *rng) {
  params_.Add(p + ".ln1.g", Matrix::Ones(1, d));
  params_.Add(p + ".ln1.b", Matrix::Zero(1, d));
  for (const char *name : {"q", "k", "v", "o"}) {
    params_.Add(p + ".att." + name + ".w", XavierUniform(d, d, rng));
    params_.Add(p + ".att." + name + ".b", Matrix::Zero(1, d));
  }
  params_.Add(p + ".ln2.g", Matrix::Ones(1, d));
  params_.Add(p + ".ln2.b", Matrix::Zero(1, d));
  params_.Add(p + ".ff1.w", XavierUniform(d, ff, rng));
  params_.Add(p + ".ff1.b", Matrix::Zero(1, ff));
  params_.Add(p + ".ff2.w", XavierUniform(ff, d, rng));
  params_.Add(p + ".ff2.b", Matrix::Zero(1, d));
}

void EendModel::CreateParameters(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const EncoderConfig &enc = config_.encoder;
  const int32_t d = enc.d_model;

  params_.Add("enc.in.w", XavierUniform(config_.InputDim(), d, &rng));
  params_.Add("enc.in.b", Matrix::Zero(1, d));
  for (int32_t i = 0; i < enc.n_blocks; ++i) {
    AddTransformerBlock(Block("enc", i), d, enc.ff_dim, &rng);
  }
  params_.Add("enc.out.g", Matrix::Ones(1, d));
  params_.Add("enc.out.b", Matrix::Zero(1, d));

  if (config_.variant == Variant::kEmbToEda) {
    params_.Add("emb.in.w", XavierUniform(config_.embedding_dim, d, &rng));
    params_.Add("emb.in.b", Matrix::Zero(1, d));
    AddTransformerBlock("emb.0", d, enc.ff_dim, &rng);
    params_.Add("emb.out.g", Matrix::Ones(1, d));
    params_.Add("emb.out.b", Matrix::Zero(1, d));
  }

  const double lstm_limit = 1.0 / std::sqrt(static_cast<double>(d));
  for (const char *part : {"eda.enc", "eda.dec"}) {
    std::string p(part);
    params_.Add(p + ".w_ih", Uniform(d, 4 * d, lstm_limit, &rng));
    params_.Add(p + ".w_hh", Uniform(d, 4 * d, lstm_limit, &rng));
    params_.Add(p + ".b", Uniform(1, 4 * d, lstm_limit, &rng));
  }
  params_.Add("eda.counter.w", XavierUniform(d, 1, &rng));
  params_.Add("eda.counter.b", Matrix::Zero(1, 1));
}

ag::Var EendModel::TransformerBlock(ag::Tape &tape, const std::string &p,
                                    ag::Var x, const GraphOptions &opts) const {
  const EncoderConfig &enc = config_.encoder;
  const int32_t d = enc.d_model, heads = enc.n_heads, dk = d / heads;
  const double dropout = opts.training ? enc.dropout : 0.0;
  auto P = [&](const std::string &name) { return tape.Param(p + name); };

  ag::Var y = ag::LayerNormRows(x, P(".ln1.g"), P(".ln1.b"));
  ag::Var q = ag::Linear(y, P(".att.q.w"), P(".att.q.b"));
  ag::Var k = ag::Linear(y, P(".att.k.w"), P(".att.k.b"));
  ag::Var v = ag::Linear(y, P(".att.v.w"), P(".att.v.b"));
  std::vector<ag::Var> contexts;
  contexts.reserve(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  for (int32_t h = 0; h < heads; ++h) {
    ag::Var qh = heads == 1 ? q : ag::SliceCols(q, h * dk, dk);
    ag::Var kh = heads == 1 ? k : ag::SliceCols(k, h * dk, dk);
    ag::Var vh = heads == 1 ? v : ag::SliceCols(v, h * dk, dk);
    ag::Var att = ag::SoftmaxRows(ag::Scale(ag::MatMulNT(qh, kh), scale));
    contexts.push_back(ag::MatMul(att, vh));
  }
  ag::Var ctx = heads == 1 ? contexts[0] : ag::ConcatCols(contexts);
  ag::Var att_out = ag::Linear(ctx, P(".att.o.w"), P(".att.o.b"));
  x = ag::Add(x, ag::Dropout(att_out, dropout, opts.rng));

  y = ag::LayerNormRows(x, P(".ln2.g"), P(".ln2.b"));
  ag::Var hidden = ag::Relu(ag::Linear(y, P(".ff1.w"), P(".ff1.b")));
  hidden = ag::Dropout(hidden, dropout, opts.rng);
  ag::Var ff_out = ag::Linear(hidden, P(".ff2.w"), P(".ff2.b"));
  return ag::Add(x, ag::Dropout(ff_out, dropout, opts.rng));
}

ag::Var EendModel::Encode(ag::Tape &tape, ag::Var input,
                          const GraphOptions &opts) const {
  if (input.cols() != config_.InputDim()) {
    throw Error("encoder expects " + std::to_string(config_.InputDim()) +
                "-dim input for variant " + VariantName(config_.variant) +
                ", got " + std::to_string(input.cols()));
  }
  EEND_CHECK(input.rows() >= 1, "encoder input is empty");
  ag::Var x = ag::Linear(input, tape.Param("enc.in.w"), tape.Param("enc.in.b"));
  for (int32_t i = 0; i < config_.encoder.n_blocks; ++i) {
    x = TransformerBlock(tape, Block("enc", i), x, opts);
  }
  return ag::LayerNormRows(x, tape.Param("enc.out.g"), tape.Param("enc.out.b"));
}

ag::Var EendModel::EncodeEmbeddings(ag::Tape &tape, ag::Var embeddings,
                                    const GraphOptions &opts) const {
  if (config_.variant != Variant::kEmbToEda) {
    throw Error("embedding encoder exists only in variant A");
  }
  if (embeddings.cols() != config_.embedding_dim) {
    throw Error("embedding encoder expects " + std::to_string(config_.embedding_dim) +
                "-dim input, got " + std::to_string(embeddings.cols()));
  }
  EEND_CHECK(embeddings.rows() >= 1, "embedding sequence is empty");
  ag::Var x = ag::Linear(embeddings, tape.Param("emb.in.w"), tape.Param("emb.in.b"));
  x = TransformerBlock(tape, "emb.0", x, opts);
  return ag::LayerNormRows(x, tape.Param("emb.out.g"), tape.Param("emb.out.b"));
}

std::pair<ag::Var, ag::Var> EendModel::Eda(ag::Tape &tape, ag::Var sequence,
                                           int32_t n_attractors,
                                           const GraphOptions &opts) const {
  EEND_CHECK(n_attractors >= 1, "need at least one attractor");
  if (sequence.rows() < 1) throw Error("EDA input sequence is empty");
  const int32_t d = config_.encoder.d_model;
  if (sequence.cols() != d) throw Error("EDA input must be d_model wide");

  ag::Var seq = sequence;
  if (opts.shuffle) {
    EEND_CHECK(opts.rng != nullptr, "shuffling needs a random generator");
    std::vector<int32_t> order(sequence.rows());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), *opts.rng);
    seq = ag::GatherRows(sequence, order);
  }
  ag::Var zero_state = tape.Constant(Matrix::Zero(1, d));
  ag::Var enc = ag::Lstm(seq, zero_state, zero_state, tape.Param("eda.enc.w_ih"),
                         tape.Param("eda.enc.w_hh"), tape.Param("eda.enc.b"));
  ag::Var last = ag::SliceRows(enc, enc.rows() - 1, 1);
  ag::Var h0 = ag::SliceCols(last, 0, d);
  ag::Var c0 = ag::SliceCols(last, d, d);

  // The decoder input is the zero vector at every step.
  ag::Var zeros = tape.Constant(Matrix::Zero(n_attractors, d));
  ag::Var dec = ag::Lstm(zeros, h0, c0, tape.Param("eda.dec.w_ih"),
                         tape.Param("eda.dec.w_hh"), tape.Param("eda.dec.b"));
  ag::Var attractors = ag::SliceCols(dec, 0, d);
  ag::Var existence = ag::Linear(attractors, tape.Param("eda.counter.w"),
                                 tape.Param("eda.counter.b"));
  return {attractors, existence};
}

EendModel::Graph EendModel::Build(ag::Tape &tape, ag::Var features,
                                  ag::Var embeddings, int32_t num_speakers,
                                  int32_t n_attractors,
                                  const GraphOptions &opts) const {
  EEND_CHECK(num_speakers >= 1 && n_attractors >= num_speakers,
             "invalid speaker/attractor counts");
  const Variant variant = config_.variant;
  if (UsesFeatures(variant) && !features.valid()) {
    throw Error("variant " + VariantName(variant) + " needs acoustic features");
  }
  if (UsesEmbeddings(variant) && !embeddings.valid()) {
    throw Error("variant " + VariantName(variant) + " needs speaker embeddings");
  }
  if (UsesFeatures(variant) && UsesEmbeddings(variant) &&
      features.rows() != embeddings.rows()) {
    throw Error("features and embeddings differ in length (" +
                std::to_string(features.rows()) + " vs " +
                std::to_string(embeddings.rows()) + "); align them first");
  }

  Graph g;
  switch (variant) {
    case Variant::kBaseline:
      g.encoded = Encode(tape, features, opts);
      g.attractor_input = g.encoded;
      break;
    case Variant::kEmbToEda:
      g.encoded = Encode(tape, features, opts);
      g.attractor_input = EncodeEmbeddings(tape, embeddings, opts);
      break;
    case Variant::kEmbToEncoder:
      g.encoded = Encode(tape, embeddings, opts);
      g.attractor_input = g.encoded;
      break;
    case Variant::kConcat:
      g.encoded = Encode(tape, ag::ConcatCols({features, embeddings}), opts);
      g.attractor_input = g.encoded;
      break;
  }
  auto [attractors, existence] = Eda(tape, g.attractor_input, n_attractors, opts);
  g.attractors = attractors;
  g.existence_logits = existence;
  ag::Var active = n_attractors == num_speakers
                       ? attractors
                       : ag::SliceRows(attractors, 0, num_speakers);
  g.logits = ag::MatMulNT(g.encoded, active);
  return g;
}

Matrix EendModel::Encode(const Matrix &input) const {
  ag::Tape tape(&params_, false);
  return Encode(tape, tape.Constant(input), {}).value();
}

Matrix EendModel::EncodeEmbeddings(const Matrix &embeddings) const {
  ag::Tape tape(&params_, false);
  return EncodeEmbeddings(tape, tape.Constant(embeddings), {}).value();
}

AttractorSet EendModel::GenerateAttractors(const Matrix &sequence,
                                           int32_t n_attractors, bool shuffle,
                                           uint64_t shuffle_seed) const {
  ag::Tape tape(&params_, false);
  std::mt19937_64 rng(shuffle_seed);
  GraphOptions opts;
  opts.shuffle = shuffle;
  opts.rng = &rng;
  auto [attractors, existence] = Eda(tape, tape.Constant(sequence), n_attractors, opts);
  AttractorSet out;
  out.attractors = attractors.value();
  for (Eigen::Index s = 0; s < existence.rows(); ++s) {
    out.existence_probs.push_back(Sigmoid(existence.value()(s, 0)));
  }
  return out;
}

void EendModel::CheckInputs(const Matrix *features, const Matrix *embeddings) const {
  const Variant v = config_.variant;
  if (UsesFeatures(v) && features == nullptr) {
    throw Error("variant " + VariantName(v) + " needs acoustic features");
  }
  if (UsesEmbeddings(v) && embeddings == nullptr) {
    throw Error("variant " + VariantName(v) + " needs speaker embeddings");
  }
}

EendModel::Output EendModel::Forward(const Matrix *features,
                                     const Matrix *embeddings,
                                     int32_t num_speakers) const {
  CheckInputs(features, embeddings);
  ag::Tape tape(&params_, false);
  ag::Var x = UsesFeatures(config_.variant) ? tape.Constant(*features) : ag::Var();
  ag::Var b = UsesEmbeddings(config_.variant) ? tape.Constant(*embeddings) : ag::Var();
  Graph g = Build(tape, x, b, num_speakers, num_speakers, {});
  Output out;
  out.posteriors.data = g.logits.value().unaryExpr([](double z) { return Sigmoid(z); });
  out.attractors.attractors = g.attractors.value();
  for (Eigen::Index s = 0; s < g.existence_logits.rows(); ++s) {
    out.attractors.existence_probs.push_back(Sigmoid(g.existence_logits.value()(s, 0)));
  }
  return out;
}

EendModel::Output EendModel::ForwardVariable(const Matrix *features,
                                             const Matrix *embeddings,
                                             int32_t max_speakers,
                                             double threshold) const {
  EEND_CHECK(max_speakers >= 1, "max_speakers must be positive");
  CheckInputs(features, embeddings);
  ag::Tape tape(&params_, false);
  ag::Var x = UsesFeatures(config_.variant) ? tape.Constant(*features) : ag::Var();
  ag::Var b = UsesEmbeddings(config_.variant) ? tape.Constant(*embeddings) : ag::Var();
  Graph g = Build(tape, x, b, 1, max_speakers + 1, {});
  AttractorSet all;
  all.attractors = g.attractors.value();
  for (Eigen::Index s = 0; s < g.existence_logits.rows(); ++s) {
    all.existence_probs.push_back(Sigmoid(g.existence_logits.value()(s, 0)));
  }
  int32_t count = 0;
  while (count < max_speakers && all.existence_probs[count] >= threshold) ++count;
  count = std::max(count, 1);
  Output out;
  out.attractors.attractors = all.attractors.topRows(count);
  out.attractors.existence_probs.assign(all.existence_probs.begin(),
                                        all.existence_probs.begin() + count);
  out.posteriors = ComputePosteriors(g.encoded.value(), out.attractors, count);
  return out;
}

}  // namespace eend
