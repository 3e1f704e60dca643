// eend/autograd.h
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

#ifndef EEND_AUTOGRAD_H_
#define EEND_AUTOGRAD_H_

// Minimal tape-based reverse-mode differentiation over dense double
// matrices. A Tape records every operation of one forward pass; Backward()
// walks the records in reverse creation order.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "eend/common.h"

namespace eend::ag {

struct Parameter {
  std::string name;
  Matrix value;
};

// Named trainable tensors, kept in creation order. The order defines the
// serialization layout and the optimizer state layout.
class ParameterSet {
 public:
  int32_t Add(const std::string &name, Matrix init);
  int32_t Find(const std::string &name) const;  // -1 if absent

  Parameter &operator[](int32_t i) { return params_[i]; }
  const Parameter &operator[](int32_t i) const { return params_[i]; }
  int32_t size() const { return static_cast<int32_t>(params_.size()); }
  int64_t NumScalars() const;

  // Zero matrices shaped like every parameter.
  std::vector<Matrix> ZerosLike() const;

 private:
  std::vector<Parameter> params_;
};

class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape *tape, int32_t id) : tape_(tape), id_(id) {}

  const Matrix &value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape *tape() const { return tape_; }
  int32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape *tape_ = nullptr;
  int32_t id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape &, int32_t self)>;

  // `params` may be null when the graph has no trainable leaves. With
  // grad_enabled false nothing is retained for Backward().
  explicit Tape(const ParameterSet *params = nullptr, bool grad_enabled = true);

  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var Constant(Matrix value);
  // Leaf whose gradient is tracked (e.g. to differentiate w.r.t. inputs).
  Var Input(Matrix value);
  // Leaf bound to params[index]; repeated calls return the same node.
  Var Param(int32_t index);
  Var Param(const std::string &name);

  // Seeds d(loss)/d(loss) = 1 for a 1x1 loss and propagates.
  void Backward(Var loss);

  bool grad_enabled() const { return grad_enabled_; }
  bool RequiresGrad(int32_t id) const { return nodes_[id].requires_grad; }
  const Matrix &Value(int32_t id) const;
  // Zero matrix of the right shape when nothing flowed into `v`.
  Matrix Grad(Var v) const;
  // Adds the gradient of every parameter leaf into grads[param_index].
  void AccumulateParamGrads(std::vector<Matrix> *grads) const;

  // Adds `g` to the gradient of node `id` (allocating it on first use).
  void AddGrad(int32_t id, const Matrix &g);
  template <typename Expr>
  void AddGradExpr(int32_t id, const Expr &g) {
    Matrix &dst = GradRef(id);
    dst += g;
  }
  Matrix &GradRef(int32_t id);
  const Matrix &GradOf(int32_t id) const { return nodes_[id].grad; }

  // Records an operation. `fn` is dropped when no parent needs a gradient.
  Var Push(Matrix value, std::initializer_list<Var> parents, BackwardFn fn);
  Var Push(Matrix value, const std::vector<Var> &parents, BackwardFn fn);

  const ParameterSet *params() const { return params_; }
  int32_t size() const { return static_cast<int32_t>(nodes_.size()); }

 private:
  struct Node {
    Matrix value;
    const Matrix *external = nullptr;  // parameter storage
    Matrix grad;
    bool requires_grad = false;
    int32_t param_index = -1;
    BackwardFn backward;
  };

  const ParameterSet *params_;
  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::vector<int32_t> param_nodes_;
};

// ---- Elementary operations -------------------------------------------------

Var MatMul(Var a, Var b);    // a * b
Var MatMulNT(Var a, Var b);  // a * b^T
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);  // elementwise
Var Scale(Var a, double c);
Var AddRow(Var a, Var row);  // broadcasts a 1 x n row over every row of a
// x * weight + bias with weight in x out and bias 1 x out.
Var Linear(Var x, Var weight, Var bias);

Var Relu(Var a);
Var Sigmoid(Var a);
Var Tanh(Var a);
Var SoftmaxRows(Var a);
Var LayerNormRows(Var x, Var gamma, Var beta, double eps = 1e-5);

Var ConcatCols(const std::vector<Var> &parts);
Var SliceCols(Var a, Eigen::Index start, Eigen::Index n);
Var SliceRows(Var a, Eigen::Index start, Eigen::Index n);
// Output row i is input row order[i].
Var GatherRows(Var a, const std::vector<int32_t> &order);
// Inverted dropout; identity when rate == 0.
Var Dropout(Var a, double rate, std::mt19937_64 *rng);

Var Sum(Var a);  // 1 x 1
Var AddScalars(Var a, Var b, double b_weight);  // a + b_weight * b, both 1 x 1

// Unidirectional LSTM over the rows of x (T x in). Gate layout in the
// 4*D columns of w_ih (in x 4D), w_hh (D x 4D) and bias (1 x 4D) is
// [input, forget, cell, output]. Returns T x 2D whose row t is [h_t, c_t].
Var Lstm(Var x, Var h0, Var c0, Var w_ih, Var w_hh, Var bias);

}  // namespace eend::ag

#endif  // EEND_AUTOGRAD_H_
