// eend/common.h
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

#ifndef EEND_COMMON_H_
#define EEND_COMMON_H_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace eend {

// Row-major: one row is one frame.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &what) : std::runtime_error(what) {}
};

// Thrown for malformed files (WAV, RTTM, matrices, checkpoints).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string &what) : Error(what) {}
};

#define EEND_CHECK(cond, msg)                                        \
  do {                                                               \
    if (!(cond)) throw ::eend::Error(std::string(msg));              \
  } while (0)

inline constexpr int32_t kSampleRate = 8000;
inline constexpr int32_t kFrameLength = 200;  // 25 ms
inline constexpr int32_t kFrameShift = 80;    // 10 ms
inline constexpr int32_t kNumMelBins = 23;
inline constexpr int32_t kContext = 7;
inline constexpr int32_t kSubsampling = 10;
inline constexpr int32_t kSplicedDim = kNumMelBins * (2 * kContext + 1);
inline constexpr int32_t kEmbeddingDim = 512;
inline constexpr double kOutputFrameShift = 0.1;

// Frames on the 100 ms grid for an utterance of `num_samples` samples.
int32_t NumOutputFrames(int64_t num_samples);

// Numerically safe logistic function.
inline double Sigmoid(double x) {
  if (x >= 0) {
    double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace eend

#endif  // EEND_COMMON_H_
