// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

// Dense rank-2 tensors with tape-based reverse-mode differentiation.
//
// Values are Eigen matrices of doubles. A scalar is a 1x1 matrix and a vector
// is a single row. Every op takes and returns `Var` handles that live on one
// `Tape`; `Tape::backward` walks the records in reverse once and then the
// tape refuses further backward calls.
//
// Broadcasting is limited to the right-hand operand of add/sub/mul: it may
// have the same shape as the left operand, be a single row (trailing-dim
// broadcast over rows) or be 1x1 (scalar). Anything else is a DimensionError.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace graphflow {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Vector3 = Eigen::Vector3d;

std::string shape_string(const Matrix& m);

// A learned quantity owned by a model. `grad` is accumulated by backward and
// cleared by the optimizer.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backprop = std::function<void(const Matrix& upstream, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Untracked value: never receives a gradient.
  Var constant(Matrix value);
  // Tracked input whose gradient can be read back with grad() after backward.
  Var leaf(Matrix value);
  // Tracked reference to a model parameter; backward accumulates into p.grad.
  // With gradients disabled the parameter is read as a constant.
  Var parameter(Parameter& p);

  const Matrix& value(const Var& v) const;
  // Gradient of the last backward with respect to v (zeros if unreachable).
  Matrix grad(const Var& v) const;
  bool requires_grad(const Var& v) const;

  void backward(const Var& loss);
  bool consumed() const { return consumed_; }

  // Inference mode: parameters are read as constants and no closures run.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  std::size_t size() const { return nodes_.size(); }

  // Op implementation hooks.
  Var record(Matrix value, std::initializer_list<Var> parents, Backprop backprop);
  Var record(Matrix value, std::span<const Var> parents, Backprop backprop);
  void accumulate(const Var& v, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);
  void check_owner(const Var& v) const;

  std::deque<Node> nodes_;
  bool consumed_ = false;
  bool grad_enabled_ = true;
};

// ---- arithmetic -----------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var transpose(const Var& a);

// ---- activations ----------------------------------------------------------

Var relu(const Var& a);
Var gelu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softmax_rows(const Var& a);

// ---- reductions and losses ------------------------------------------------

Var sum(const Var& a);
Var mean(const Var& a);
// Mean of squared differences over all entries.
Var mse(const Var& prediction, const Var& target);
// Mean binary cross-entropy of sigmoid(logits) against {0,1} targets.
Var bce_with_logits(const Var& logits, const Matrix& targets);

// ---- structure ------------------------------------------------------------

Var hcat(std::span<const Var> parts);
Var vcat(std::span<const Var> parts);
Var slice_cols(const Var& a, Index start, Index count);
Var slice_rows(const Var& a, Index start, Index count);
Var gather_rows(const Var& a, std::span<const Index> rows);
// out[s] = mean of rows r with segment[r] == s; empty segments are zero rows.
Var segment_mean(const Var& a, std::span<const Index> segment, Index segments);
// out[r] = weights[r] * a[r].
Var scale_rows(const Var& a, const Vector& weights);

}  // namespace graphflow
