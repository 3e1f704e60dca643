// eend/model.h
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

#ifndef EEND_MODEL_H_
#define EEND_MODEL_H_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "eend/autograd.h"
#include "eend/common.h"

namespace eend {

// How speaker embeddings enter the model.
enum class Variant {
  kBaseline,      // acoustic features only
  kEmbToEda,      // A: embeddings, via one transformer block, drive the EDA
  kEmbToEncoder,  // B: embeddings replace the acoustic features
  kConcat,        // C: features and embeddings concatenated per frame
};

std::string VariantName(Variant v);  // "baseline", "A", "B", "C"
Variant ParseVariant(const std::string &name);
bool UsesFeatures(Variant v);
bool UsesEmbeddings(Variant v);

struct EncoderConfig {
  int32_t n_blocks = 4;
  int32_t d_model = 256;
  int32_t n_heads = 4;
  int32_t ff_dim = 2048;
  double dropout = 0.1;

  void Validate() const;
};

struct ModelConfig {
  Variant variant = Variant::kBaseline;
  EncoderConfig encoder;
  int32_t feature_dim = kSplicedDim;
  int32_t embedding_dim = kEmbeddingDim;

  // Width of the main encoder input: 345 (baseline, A), 512 (B), 857 (C).
  int32_t InputDim() const;
};

struct AttractorSet {
  Matrix attractors;                   // S' x D
  std::vector<double> existence_probs;  // S', each in (0, 1)

  int32_t size() const { return static_cast<int32_t>(attractors.rows()); }
};

struct PosteriorMatrix {
  Matrix data;  // T x S, entries in (0, 1)

  int32_t NumFrames() const { return static_cast<int32_t>(data.rows()); }
  int32_t NumSpeakers() const { return static_cast<int32_t>(data.cols()); }
};

// sigmoid(e_t . a_s) for the first num_speakers attractors.
PosteriorMatrix ComputePosteriors(const Matrix &encoded,
                                  const AttractorSet &attractors,
                                  int32_t num_speakers);

// Transformer encoder + encoder-decoder attractor model. Parameters live in
// an ag::ParameterSet shared by inference, training and serialization.
class EendModel {
 public:
  // Randomly initialized from `seed`.
  EendModel(const ModelConfig &config, uint64_t seed);
  // Adopts existing parameters; throws unless names and shapes match what
  // `config` would create.
  EendModel(const ModelConfig &config, ag::ParameterSet params);

  const ModelConfig &config() const { return config_; }
  const ag::ParameterSet &params() const { return params_; }
  ag::ParameterSet &mutable_params() { return params_; }
  int64_t NumParameters() const { return params_.NumScalars(); }

  // ---- Differentiable graph pieces -----------------------------------------
  struct GraphOptions {
    bool training = false;  // enables dropout
    bool shuffle = false;   // permutes EDA input frames
    std::mt19937_64 *rng = nullptr;
  };
  struct Graph {
    ag::Var encoded;           // e, T x D
    ag::Var attractor_input;   // sequence fed to the EDA
    ag::Var attractors;        // n x D
    ag::Var existence_logits;  // n x 1
    ag::Var logits;            // T x num_speakers
  };

  // Main encoder on a T x InputDim() sequence.
  ag::Var Encode(ag::Tape &tape, ag::Var input, const GraphOptions &opts) const;
  // One transformer block over T x embedding_dim; variant A only.
  ag::Var EncodeEmbeddings(ag::Tape &tape, ag::Var embeddings,
                           const GraphOptions &opts) const;
  // Returns (attractors n x D, existence logits n x 1).
  std::pair<ag::Var, ag::Var> Eda(ag::Tape &tape, ag::Var sequence,
                                  int32_t n_attractors,
                                  const GraphOptions &opts) const;
  // `features` / `embeddings` may be invalid Vars when the variant does not
  // read them. Produces num_speakers posterior columns and n_attractors
  // attractors (n_attractors >= num_speakers).
  Graph Build(ag::Tape &tape, ag::Var features, ag::Var embeddings,
              int32_t num_speakers, int32_t n_attractors,
              const GraphOptions &opts) const;

  // ---- Evaluation-mode convenience (dropout and shuffling off) -------------
  Matrix Encode(const Matrix &input) const;
  Matrix EncodeEmbeddings(const Matrix &embeddings) const;
  AttractorSet GenerateAttractors(const Matrix &sequence, int32_t n_attractors,
                                  bool shuffle = false,
                                  uint64_t shuffle_seed = 0) const;

  struct Output {
    PosteriorMatrix posteriors;
    AttractorSet attractors;
  };
  // Fixed speaker count: posteriors for `num_speakers` columns. Pointers may
  // be null when the variant ignores that stream.
  Output Forward(const Matrix *features, const Matrix *embeddings,
                 int32_t num_speakers = 2) const;
  // Decodes up to max_speakers + 1 attractors and keeps those before the
  // first existence probability below `threshold` (at least one).
  Output ForwardVariable(const Matrix *features, const Matrix *embeddings,
                         int32_t max_speakers = 4, double threshold = 0.5) const;

 private:
  void CreateParameters(uint64_t seed);
  void AddTransformerBlock(const std::string &prefix, int32_t d, int32_t ff,
                           std::mt19937_64 *rng);
  ag::Var TransformerBlock(ag::Tape &tape, const std::string &prefix, ag::Var x,
                           const GraphOptions &opts) const;
  void CheckInputs(const Matrix *features, const Matrix *embeddings) const;

  ModelConfig config_;
  ag::ParameterSet params_;
};

}  // namespace eend

#endif  // EEND_MODEL_H_
