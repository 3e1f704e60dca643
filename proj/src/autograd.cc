// eend/autograd.cc
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

#include "eend/autograd.h"

#include <algorithm>
#include <cmath>
#include <memory>

namespace eend::ag {

int32_t ParameterSet::Add(const std::string &name, Matrix init) {
  if (Find(name) >= 0) throw Error("duplicate parameter " + name);
  params_.push_back({name, std::move(init)});
  return size() - 1;
}

int32_t ParameterSet::Find(const std::string &name) const {
  for (int32_t i = 0; i < size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return -1;
}

int64_t ParameterSet::NumScalars() const {
  int64_t n = 0;
  for (const Parameter &p : params_) n += p.value.size();
  return n;
}

std::vector<Matrix> ParameterSet::ZerosLike() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const Parameter &p : params_) {
    out.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
  return out;
}

const Matrix &Var::value() const { return tape_->Value(id_); }

Tape::Tape(const ParameterSet *params, bool grad_enabled)
    : params_(params), grad_enabled_(grad_enabled) {
  if (params_ != nullptr) param_nodes_.assign(params_->size(), -1);
}

const Matrix &Tape::Value(int32_t id) const {
  const Node &n = nodes_[id];
  return n.external != nullptr ? *n.external : n.value;
}

Var Tape::Constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, size() - 1);
}

Var Tape::Input(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var(this, size() - 1);
}

Var Tape::Param(int32_t index) {
  EEND_CHECK(params_ != nullptr && index >= 0 && index < params_->size(),
             "parameter index out of range");
  if (param_nodes_[index] >= 0) return Var(this, param_nodes_[index]);
  Node n;
  n.external = &(*params_)[index].value;
  n.requires_grad = grad_enabled_;
  n.param_index = index;
  nodes_.push_back(std::move(n));
  param_nodes_[index] = size() - 1;
  return Var(this, size() - 1);
}

Var Tape::Param(const std::string &name) {
  EEND_CHECK(params_ != nullptr, "tape has no parameters");
  int32_t i = params_->Find(name);
  if (i < 0) throw Error("unknown parameter " + name);
  return Param(i);
}

Var Tape::Push(Matrix value, std::initializer_list<Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Var &p : parents) n.requires_grad |= nodes_[p.id()].requires_grad;
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, size() - 1);
}

Var Tape::Push(Matrix value, const std::vector<Var> &parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Var &p : parents) n.requires_grad |= nodes_[p.id()].requires_grad;
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, size() - 1);
}

Matrix &Tape::GradRef(int32_t id) {
  Node &n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix &v = Value(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::AddGrad(int32_t id, const Matrix &g) {
  if (!nodes_[id].requires_grad) return;
  GradRef(id) += g;
}

void Tape::Backward(Var loss) {
  EEND_CHECK(grad_enabled_, "Backward() on a tape without gradients");
  EEND_CHECK(loss.tape() == this, "loss belongs to another tape");
  EEND_CHECK(loss.rows() == 1 && loss.cols() == 1, "loss must be 1 x 1");
  if (!nodes_[loss.id()].requires_grad) return;
  GradRef(loss.id())(0, 0) += 1.0;
  for (int32_t id = loss.id(); id >= 0; --id) {
    Node &n = nodes_[id];
    if (n.backward && n.grad.size() != 0) n.backward(*this, id);
  }
}

Matrix Tape::Grad(Var v) const {
  const Node &n = nodes_[v.id()];
  if (n.grad.size() != 0) return n.grad;
  const Matrix &val = Value(v.id());
  return Matrix::Zero(val.rows(), val.cols());
}

void Tape::AccumulateParamGrads(std::vector<Matrix> *grads) const {
  for (size_t i = 0; i < param_nodes_.size(); ++i) {
    int32_t id = param_nodes_[i];
    if (id < 0 || nodes_[id].grad.size() == 0) continue;
    (*grads)[i] += nodes_[id].grad;
  }
}

namespace {

void CheckSameShape(const Var &a, const Var &b, const char *op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Var MatMul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw Error("MatMul: inner dimensions differ (" + std::to_string(a.cols()) +
                " vs " + std::to_string(b.rows()) + ")");
  }
  Tape *t = a.tape();
  Matrix v = a.value() * b.value();
  int32_t ia = a.id(), ib = b.id();
  return t->Push(std::move(v), {a, b}, [ia, ib](Tape &tape, int32_t self) {
    const Matrix &g = tape.GradOf(self);
    if (tape.RequiresGrad(ia)) tape.AddGradExpr(ia, g * tape.Value(ib).transpose());
    if (tape.RequiresGrad(ib)) tape.AddGradExpr(ib, tape.Value(ia).transpose() * g);
  });
}

Var MatMulNT(Var a, Var b) {
  if (a.cols() != b.cols()) throw Error("MatMulNT: column counts differ");
  Tape *t = a.tape();
  Matrix v = a.value() * b.value().transpose();
  int32_t ia = a.id(), ib = b.id();
  return t->Push(std::move(v), {a, b}, [ia, ib](Tape &tape, int32_t self) {
    const Matrix &g = tape.GradOf(self);
    if (tape.RequiresGrad(ia)) tape.AddGradExpr(ia, g * tape.Value(ib));
    if (tape.RequiresGrad(ib)) tape.AddGradExpr(ib, g.transpose() * tape.Value(ia));
  });
}

Var Add(Var a, Var b) {
  CheckSameShape(a, b, "Add");
  int32_t ia = a.id(), ib = b.id();
  return a.tape()->Push(a.value() + b.value(), {a, b},
                        [ia, ib](Tape &tape, int32_t self) {
                          const Matrix &g = tape.GradOf(self);
                          tape.AddGrad(ia, g);
                          tape.AddGrad(ib, g);
                        });
}

Var Sub(Var a, Var b) {
  CheckSameShape(a, b, "Sub");
  int32_t ia = a.id(), ib = b.id();
  return a.tape()->Push(a.value() - b.value(), {a, b},
                        [ia, ib](Tape &tape, int32_t self) {
                          const Matrix &g = tape.GradOf(self);
                          tape.AddGrad(ia, g);
                          if (tape.RequiresGrad(ib)) tape.AddGradExpr(ib, -g);
                        });
}

Var Mul(Var a, Var b) {
  CheckSameShape(a, b, "Mul");
  int32_t ia = a.id(), ib = b.id();
  Matrix v = a.value().cwiseProduct(b.value());
  return a.tape()->Push(std::move(v), {a, b}, [ia, ib](Tape &tape, int32_t self) {
    const Matrix &g = tape.GradOf(self);
    if (tape.RequiresGrad(ia)) tape.AddGradExpr(ia, g.cwiseProduct(tape.Value(ib)));
    if (tape.RequiresGrad(ib)) tape.AddGradExpr(ib, g.cwiseProduct(tape.Value(ia)));
  });
}

Var Scale(Var a, double c) {
  int32_t ia = a.id();
  return a.tape()->Push(a.value() * c, {a}, [ia, c](Tape &tape, int32_t self) {
    if (tape.RequiresGrad(ia)) tape.AddGradExpr(ia, tape.GradOf(self) * c);
  });
}

Var AddRow(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw Error("AddRow: bad row shape");
  int32_t ia = a.id(), ir = row.id();
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return a.tape()->Push(std::move(v), {a, row}, [ia, ir](Tape &tape, int32_t self) {
    const Matrix &g = tape.GradOf(self);
    tape.AddGrad(ia, g);
    if (tape.RequiresGrad(ir)) tape.AddGradExpr(ir, g.colwise().sum());
  });
}

Var Linear(Var x, Var weight, Var bias) {
  if (x.cols() != weight.rows()) {
    throw Error("Linear: input dimension " + std::to_string(x.cols()) +
                " does not match weight rows " + std::to_string(weight.rows()));
  }
  if (bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw Error("Linear: bias shape mismatch");
  }
  Matrix v = x.value() * weight.value();
  v.rowwise() += bias.value().row(0);
  int32_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape()->Push(std::move(v), {x, weight, bias},
                        [ix, iw, ib](Tape &tape, int32_t self) {
                          const Matrix &g = tape.GradOf(self);
                          if (tape.RequiresGrad(ix))
                            tape.AddGradExpr(ix, g * tape.Value(iw).transpose());
                          if (tape.RequiresGrad(iw))
                            tape.AddGradExpr(iw, tape.Value(ix).transpose() * g);
                          if (tape.RequiresGrad(ib))
                            tape.AddGradExpr(ib, g.colwise().sum());
                        });
}

Var Relu(Var a) {
  int32_t ia = a.id();
  Matrix v = a.value().cwiseMax(0.0);
  return a.tape()->Push(std::move(v), {a}, [ia](Tape &tape, int32_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix &x = tape.Value(ia);
    tape.AddGradExpr(ia, (x.array() > 0.0).select(tape.GradOf(self), 0.0));
  });
}

Var Sigmoid(Var a) {
  int32_t ia = a.id();
  Matrix v = a.value().unaryExpr([](double x) { return eend::Sigmoid(x); });
  return a.tape()->Push(std::move(v), {a}, [ia](Tape &tape, int32_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix &y = tape.Value(self);
    tape.AddGradExpr(
        ia, tape.GradOf(self).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var Tanh(Var a) {
  int32_t ia = a.id();
  Matrix v = a.value().array().tanh().matrix();
  return a.tape()->Push(std::move(v), {a}, [ia](Tape &tape, int32_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix &y = tape.Value(self);
    tape.AddGradExpr(
        ia, tape.GradOf(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var SoftmaxRows(Var a) {
  int32_t ia = a.id();
  const Matrix &x = a.value();
  Matrix v(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    v.row(r) = (x.row(r).array() - m).exp().matrix();
    v.row(r) /= v.row(r).sum();
  }
  return a.tape()->Push(std::move(v), {a}, [ia](Tape &tape, int32_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix &y = tape.Value(self);
    const Matrix &g = tape.GradOf(self);
    Matrix gy = g.cwiseProduct(y);
    Vector dot = gy.rowwise().sum();
    Matrix dx = gy - (y.array().colwise() * dot.array()).matrix();
    tape.AddGrad(ia, dx);
  });
}

Var LayerNormRows(Var x, Var gamma, Var beta, double eps) {
  const Matrix &xv = x.value();
  const Eigen::Index n = xv.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n) {
    throw Error("LayerNormRows: gamma/beta shape mismatch");
  }
  auto normalized = std::make_shared<Matrix>(xv.rows(), n);
  auto inv_std = std::make_shared<Vector>(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    double mean = xv.row(r).mean();
    double var = (xv.row(r).array() - mean).square().mean();
    (*inv_std)[r] = 1.0 / std::sqrt(var + eps);
    normalized->row(r) = (xv.row(r).array() - mean) * (*inv_std)[r];
  }
  Matrix v = normalized->array().rowwise() * gamma.value().row(0).array();
  v.rowwise() += beta.value().row(0);
  int32_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape()->Push(
      std::move(v), {x, gamma, beta},
      [ix, ig, ib, normalized, inv_std](Tape &tape, int32_t self) {
        const Matrix &g = tape.GradOf(self);
        const Matrix &xhat = *normalized;
        if (tape.RequiresGrad(ig)) tape.AddGradExpr(ig, g.cwiseProduct(xhat).colwise().sum());
        if (tape.RequiresGrad(ib)) tape.AddGradExpr(ib, g.colwise().sum());
        if (!tape.RequiresGrad(ix)) return;
        Matrix dxhat = g.array().rowwise() * tape.Value(ig).row(0).array();
        Vector mean_d = dxhat.rowwise().mean();
        Vector mean_dx = dxhat.cwiseProduct(xhat).rowwise().mean();
        Matrix dx = dxhat;
        dx.colwise() -= mean_d;
        dx -= (xhat.array().colwise() * mean_dx.array()).matrix();
        dx = (dx.array().colwise() * inv_std->array()).matrix();
        tape.AddGrad(ix, dx);
      });
}

Var ConcatCols(const std::vector<Var> &parts) {
  EEND_CHECK(!parts.empty(), "ConcatCols: no inputs");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  for (const Var &p : parts) {
    if (p.rows() != rows) throw Error("ConcatCols: row counts differ");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  std::vector<int32_t> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var &p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return parts[0].tape()->Push(std::move(v), parts,
                               [ids, offsets](Tape &tape, int32_t self) {
                                 const Matrix &g = tape.GradOf(self);
                                 for (size_t i = 0; i < ids.size(); ++i) {
                                   if (!tape.RequiresGrad(ids[i])) continue;
                                   Eigen::Index n = tape.Value(ids[i]).cols();
                                   tape.AddGradExpr(ids[i], g.middleCols(offsets[i], n));
                                 }
                               });
}

Var SliceCols(Var a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.cols()) throw Error("SliceCols: out of range");
  int32_t ia = a.id();
  Matrix v = a.value().middleCols(start, n);
  return a.tape()->Push(std::move(v), {a}, [ia, start, n](Tape &tape, int32_t self) {
    if (!tape.RequiresGrad(ia)) return;
    tape.GradRef(ia).middleCols(start, n) += tape.GradOf(self);
  });
}

Var SliceRows(Var a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.rows()) throw Error("SliceRows: out of range");
  int32_t ia = a.id();
  Matrix v = a.value().middleRows(start, n);
  return a.tape()->Push(std::move(v), {a}, [ia, start, n](Tape &tape, int32_t self) {
    if (!tape.RequiresGrad(ia)) return;
    tape.GradRef(ia).middleRows(start, n) += tape.GradOf(self);
  });
}

Var GatherRows(Var a, const std::vector<int32_t> &order) {
  const Matrix &x = a.value();
  Matrix v(static_cast<Eigen::Index>(order.size()), x.cols());
  for (size_t i = 0; i < order.size(); ++i) {
    if (order[i] < 0 || order[i] >= x.rows()) throw Error("GatherRows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = x.row(order[i]);
  }
  int32_t ia = a.id();
  return a.tape()->Push(std::move(v), {a}, [ia, order](Tape &tape, int32_t self) {
    if (!tape.RequiresGrad(ia)) return;
    const Matrix &g = tape.GradOf(self);
    Matrix &dst = tape.GradRef(ia);
    for (size_t i = 0; i < order.size(); ++i) {
      dst.row(order[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var Dropout(Var a, double rate, std::mt19937_64 *rng) {
  if (rate <= 0.0) return a;
  EEND_CHECK(rate < 1.0, "dropout rate must be < 1");
  EEND_CHECK(rng != nullptr, "dropout needs a random generator");
  std::bernoulli_distribution keep(1.0 - rate);
  auto mask = std::make_shared<Matrix>(a.rows(), a.cols());
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask->size(); ++i) {
    mask->data()[i] = keep(*rng) ? scale : 0.0;
  }
  int32_t ia = a.id();
  return a.tape()->Push(a.value().cwiseProduct(*mask), {a},
                        [ia, mask](Tape &tape, int32_t self) {
                          if (tape.RequiresGrad(ia))
                            tape.AddGradExpr(ia, tape.GradOf(self).cwiseProduct(*mask));
                        });
}

Var Sum(Var a) {
  int32_t ia = a.id();
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape()->Push(std::move(v), {a}, [ia](Tape &tape, int32_t self) {
    if (!tape.RequiresGrad(ia)) return;
    tape.GradRef(ia).array() += tape.GradOf(self)(0, 0);
  });
}

Var AddScalars(Var a, Var b, double b_weight) {
  if (a.rows() != 1 || a.cols() != 1 || b.rows() != 1 || b.cols() != 1) {
    throw Error("AddScalars: operands must be 1 x 1");
  }
  int32_t ia = a.id(), ib = b.id();
  Matrix v(1, 1);
  v(0, 0) = a.scalar() + b_weight * b.scalar();
  return a.tape()->Push(std::move(v), {a, b}, [ia, ib, b_weight](Tape &tape, int32_t self) {
    double g = tape.GradOf(self)(0, 0);
    if (tape.RequiresGrad(ia)) tape.GradRef(ia)(0, 0) += g;
    if (tape.RequiresGrad(ib)) tape.GradRef(ib)(0, 0) += b_weight * g;
  });
}

Var Lstm(Var x, Var h0, Var c0, Var w_ih, Var w_hh, Var bias) {
  const Eigen::Index steps = x.rows(), d = w_hh.rows();
  if (w_ih.rows() != x.cols() || w_ih.cols() != 4 * d || w_hh.cols() != 4 * d ||
      bias.rows() != 1 || bias.cols() != 4 * d || h0.rows() != 1 || h0.cols() != d ||
      c0.rows() != 1 || c0.cols() != d) {
    throw Error("Lstm: inconsistent shapes");
  }
  EEND_CHECK(steps > 0, "Lstm: empty sequence");

  // Per-step caches for the backward pass.
  auto gates = std::make_shared<Matrix>(steps, 4 * d);  // activated i, f, g, o
  auto h_prev = std::make_shared<Matrix>(steps, d);
  auto c_prev = std::make_shared<Matrix>(steps, d);
  auto tanh_c = std::make_shared<Matrix>(steps, d);

  Matrix pre = x.value() * w_ih.value();
  pre.rowwise() += bias.value().row(0);
  const Matrix &whh = w_hh.value();
  Matrix out(steps, 2 * d);
  RowVector h = h0.value().row(0), c = c0.value().row(0);
  for (Eigen::Index t = 0; t < steps; ++t) {
    h_prev->row(t) = h;
    c_prev->row(t) = c;
    RowVector a = pre.row(t) + h * whh;
    auto act = gates->row(t);
    for (Eigen::Index j = 0; j < d; ++j) {
      act[j] = eend::Sigmoid(a[j]);
      act[d + j] = eend::Sigmoid(a[d + j]);
      act[2 * d + j] = std::tanh(a[2 * d + j]);
      act[3 * d + j] = eend::Sigmoid(a[3 * d + j]);
    }
    c = act.segment(d, d).cwiseProduct(c) +
        act.segment(0, d).cwiseProduct(act.segment(2 * d, d));
    tanh_c->row(t) = c.array().tanh().matrix();
    h = act.segment(3 * d, d).cwiseProduct(tanh_c->row(t));
    out.row(t).head(d) = h;
    out.row(t).tail(d) = c;
  }

  int32_t ix = x.id(), ih = h0.id(), ic = c0.id(), iwi = w_ih.id(),
          iwh = w_hh.id(), ib = bias.id();
  return x.tape()->Push(
      std::move(out), {x, h0, c0, w_ih, w_hh, bias},
      [=](Tape &tape, int32_t self) {
        const Matrix &g = tape.GradOf(self);
        const Matrix &whh_v = tape.Value(iwh);
        Matrix dpre(steps, 4 * d);
        RowVector dh_next = RowVector::Zero(d), dc_next = RowVector::Zero(d);
        for (Eigen::Index t = steps - 1; t >= 0; --t) {
          auto act = gates->row(t);
          RowVector dh = g.row(t).head(d) + dh_next;
          RowVector o = act.segment(3 * d, d);
          RowVector tc = tanh_c->row(t);
          RowVector dc = g.row(t).tail(d) + dc_next +
                         dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
          for (Eigen::Index j = 0; j < d; ++j) {
            double gi = act[j], gf = act[d + j], gg = act[2 * d + j], go = act[3 * d + j];
            dpre(t, j) = dc[j] * gg * gi * (1.0 - gi);
            dpre(t, d + j) = dc[j] * (*c_prev)(t, j) * gf * (1.0 - gf);
            dpre(t, 2 * d + j) = dc[j] * gi * (1.0 - gg * gg);
            dpre(t, 3 * d + j) = dh[j] * tc[j] * go * (1.0 - go);
          }
          dh_next = dpre.row(t) * whh_v.transpose();
          dc_next = dc.cwiseProduct(act.segment(d, d));
        }
        if (tape.RequiresGrad(ix)) tape.AddGradExpr(ix, dpre * tape.Value(iwi).transpose());
        if (tape.RequiresGrad(ih)) tape.AddGrad(ih, dh_next);
        if (tape.RequiresGrad(ic)) tape.AddGrad(ic, dc_next);
        if (tape.RequiresGrad(iwi)) tape.AddGradExpr(iwi, tape.Value(ix).transpose() * dpre);
        if (tape.RequiresGrad(iwh)) tape.AddGradExpr(iwh, h_prev->transpose() * dpre);
        if (tape.RequiresGrad(ib)) tape.AddGradExpr(ib, dpre.colwise().sum());
      });
}

}  // namespace eend::ag
