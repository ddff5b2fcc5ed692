// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/tensor.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "graphflow/errors.hpp"

namespace graphflow {

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw ContractError("use of an empty Var");
  return tape_->value(*this);
}

// ---------------------------------------------------------------------------
// Tape

void Tape::check_owner(const Var& v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  if (grad_enabled_) {
    n.param = &p;
    n.requires_grad = true;
  }
  return push(std::move(n));
}

const Matrix& Tape::value(const Var& v) const {
  check_owner(v);
  return nodes_[v.id()].value;
}

Matrix Tape::grad(const Var& v) const {
  check_owner(v);
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tape::requires_grad(const Var& v) const {
  check_owner(v);
  return nodes_[v.id()].requires_grad;
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backprop backprop) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backprop));
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  bool tracked = false;
  for (const Var& p : parents) {
    check_owner(p);
    tracked = tracked || nodes_[p.id()].requires_grad;
  }
  if (tracked && grad_enabled_) {
    n.requires_grad = true;
    n.backprop = std::move(backprop);
  }
  return push(std::move(n));
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
    throw DimensionError("gradient " + shape_string(g) + " does not match value " +
                         shape_string(n.value));
  }
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& loss) {
  check_owner(loss);
  if (consumed_) throw ContractError("tape already consumed by a previous backward");
  const Node& root = nodes_[loss.id()];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ContractError("backward needs a scalar loss, got " + shape_string(root.value));
  }
  consumed_ = true;
  if (!root.requires_grad) return;
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backprop) n.backprop(n.grad, *this);
    if (n.param != nullptr) {
      if (n.param->grad.size() == 0) n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

enum class Broadcast { Same, Row, Scalar };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::Same;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::Scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_string(b) + " onto " +
                       shape_string(a));
}

Matrix expand(const Matrix& a, const Matrix& b, Broadcast kind) {
  switch (kind) {
    case Broadcast::Same:
      return b;
    case Broadcast::Row:
      return b.replicate(a.rows(), 1);
    case Broadcast::Scalar:
      return Matrix::Constant(a.rows(), a.cols(), b(0, 0));
  }
  return b;
}

Matrix reduce(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::Same:
      return g;
    case Broadcast::Row:
      return g.colwise().sum();
    case Broadcast::Scalar:
      return Matrix::Constant(1, 1, g.sum());
  }
  return g;
}

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ContractError("operands live on different tapes");
  }
  return *a.tape();
}

}  // namespace

// ---------------------------------------------------------------------------
// Arithmetic

Var matmul(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_string(av) + " and " +
                         shape_string(bv));
  }
  Matrix out = av * bv;
  return tape.record(std::move(out), {a, b}, [a, b](const Matrix& g, Tape& t) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "add");
  Matrix out = a.value() + expand(a.value(), b.value(), kind);
  return tape.record(std::move(out), {a, b}, [a, b, kind](const Matrix& g, Tape& t) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, reduce(g, kind));
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "sub");
  Matrix out = a.value() - expand(a.value(), b.value(), kind);
  return tape.record(std::move(out), {a, b}, [a, b, kind](const Matrix& g, Tape& t) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -reduce(g, kind));
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "mul");
  Matrix bx = expand(a.value(), b.value(), kind);
  Matrix out = a.value().cwiseProduct(bx);
  return tape.record(std::move(out), {a, b}, [a, b, kind](const Matrix& g, Tape& t) {
    if (t.requires_grad(a)) {
      t.accumulate(a, g.cwiseProduct(expand(a.value(), b.value(), kind)));
    }
    if (t.requires_grad(b)) t.accumulate(b, reduce(g.cwiseProduct(a.value()), kind));
  });
}

Var scale(const Var& a, double factor) {
  Tape& tape = *a.tape();
  return tape.record(a.value() * factor, {a},
                     [a, factor](const Matrix& g, Tape& t) { t.accumulate(a, g * factor); });
}

Var transpose(const Var& a) {
  Tape& tape = *a.tape();
  return tape.record(a.value().transpose(), {a},
                     [a](const Matrix& g, Tape& t) { t.accumulate(a, g.transpose()); });
}

// ---------------------------------------------------------------------------
// Activations

Var relu(const Var& a) {
  Tape& tape = *a.tape();
  Matrix out = a.value().cwiseMax(0.0);
  return tape.record(std::move(out), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

Var gelu(const Var& a) {
  Tape& tape = *a.tape();
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  Matrix out = a.value().unaryExpr(
      [inv_sqrt2](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
  return tape.record(std::move(out), {a}, [a, inv_sqrt2](const Matrix& g, Tape& t) {
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    Matrix d = a.value().unaryExpr([&](double x) {
      const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
      return cdf + x * pdf;
    });
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var tanh(const Var& a) {
  Tape& tape = *a.tape();
  Matrix out = a.value().array().tanh().matrix();
  return tape.record(std::move(out), {a}, [a](const Matrix& g, Tape& t) {
    const Eigen::ArrayXXd y = a.value().array().tanh();
    t.accumulate(a, (g.array() * (1.0 - y * y)).matrix());
  });
}

namespace {

Eigen::ArrayXXd logistic(const Matrix& x) {
  return x.unaryExpr([](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
          })
      .array();
}

Matrix row_softmax(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double peak = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - peak).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace

Var sigmoid(const Var& a) {
  Tape& tape = *a.tape();
  Matrix out = logistic(a.value()).matrix();
  return tape.record(std::move(out), {a}, [a](const Matrix& g, Tape& t) {
    const Eigen::ArrayXXd y = logistic(a.value());
    t.accumulate(a, (g.array() * y * (1.0 - y)).matrix());
  });
}

Var softmax_rows(const Var& a) {
  Tape& tape = *a.tape();
  Matrix out = row_softmax(a.value());
  return tape.record(std::move(out), {a}, [a](const Matrix& g, Tape& t) {
    const Matrix y = row_softmax(a.value());
    const Vector dots = g.cwiseProduct(y).rowwise().sum();
    Matrix d = y.cwiseProduct(g - dots.replicate(1, g.cols()));
    t.accumulate(a, d);
  });
}

// ---------------------------------------------------------------------------
// Reductions and losses

Var sum(const Var& a) {
  Tape& tape = *a.tape();
  return tape.record(Matrix::Constant(1, 1, a.value().sum()), {a},
                     [a](const Matrix& g, Tape& t) {
                       t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
                     });
}

Var mean(const Var& a) {
  const Index n = a.value().size();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var mse(const Var& prediction, const Var& target) {
  Tape& tape = same_tape(prediction, target);
  const Matrix& p = prediction.value();
  const Matrix& y = target.value();
  if (p.rows() != y.rows() || p.cols() != y.cols()) {
    throw DimensionError("mse: " + shape_string(p) + " vs " + shape_string(y));
  }
  if (p.size() == 0) throw DimensionError("mse of empty tensors");
  const double n = static_cast<double>(p.size());
  const double value = (p - y).squaredNorm() / n;
  return tape.record(Matrix::Constant(1, 1, value), {prediction, target},
                     [prediction, target, n](const Matrix& g, Tape& t) {
                       const Matrix diff = prediction.value() - target.value();
                       const double k = 2.0 * g(0, 0) / n;
                       t.accumulate(prediction, diff * k);
                       if (t.requires_grad(target)) t.accumulate(target, -diff * k);
                     });
}

Var bce_with_logits(const Var& logits, const Matrix& targets) {
  Tape& tape = *logits.tape();
  const Matrix& x = logits.value();
  if (x.rows() != targets.rows() || x.cols() != targets.cols()) {
    throw DimensionError("bce_with_logits: " + shape_string(x) + " vs " + shape_string(targets));
  }
  const double n = static_cast<double>(x.size());
  // max(x,0) - x*y + log(1 + exp(-|x|))
  const double value =
      (x.cwiseMax(0.0).array() - x.array() * targets.array() +
       (-x.array().abs()).exp().log1p())
          .sum() /
      n;
  return tape.record(Matrix::Constant(1, 1, value), {logits},
                     [logits, targets, n](const Matrix& g, Tape& t) {
                       Matrix d = (logistic(logits.value()) - targets.array()).matrix();
                       t.accumulate(logits, d * (g(0, 0) / n));
                     });
}

// ---------------------------------------------------------------------------
// Structure

Var hcat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("hcat of zero tensors");
  Tape& tape = *parts.front().tape();
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("hcat: row counts differ, " + shape_string(parts.front().value()) +
                           " vs " + shape_string(p.value()));
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> kept(parts.begin(), parts.end());
  return tape.record(std::move(out), parts, [kept](const Matrix& g, Tape& t) {
    Index offset = 0;
    for (const Var& p : kept) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(offset, p.cols()));
      offset += p.cols();
    }
  });
}

Var vcat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("vcat of zero tensors");
  Tape& tape = *parts.front().tape();
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("vcat: column counts differ, " + shape_string(parts.front().value()) +
                           " vs " + shape_string(p.value()));
    }
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> kept(parts.begin(), parts.end());
  return tape.record(std::move(out), parts, [kept](const Matrix& g, Tape& t) {
    Index offset = 0;
    for (const Var& p : kept) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(offset, p.rows()));
      offset += p.rows();
    }
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") out of " + shape_string(a.value()));
  }
  Tape& tape = *a.tape();
  return tape.record(a.value().middleCols(start, count), {a},
                     [a, start, count](const Matrix& g, Tape& t) {
                       Matrix full = Matrix::Zero(a.rows(), a.cols());
                       full.middleCols(start, count) = g;
                       t.accumulate(a, full);
                     });
}

Var slice_rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") out of " + shape_string(a.value()));
  }
  Tape& tape = *a.tape();
  return tape.record(a.value().middleRows(start, count), {a},
                     [a, start, count](const Matrix& g, Tape& t) {
                       Matrix full = Matrix::Zero(a.rows(), a.cols());
                       full.middleRows(start, count) = g;
                       t.accumulate(a, full);
                     });
}

Var gather_rows(const Var& a, std::span<const Index> rows) {
  Tape& tape = *a.tape();
  const Matrix& v = a.value();
  Matrix out(static_cast<Index>(rows.size()), v.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= v.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(rows[r]) + " out of " +
                           shape_string(v));
    }
    out.row(static_cast<Index>(r)) = v.row(rows[r]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return tape.record(std::move(out), {a}, [a, idx = std::move(idx)](const Matrix& g, Tape& t) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) full.row(idx[r]) += g.row(static_cast<Index>(r));
    t.accumulate(a, full);
  });
}

Var segment_mean(const Var& a, std::span<const Index> segment, Index segments) {
  const Matrix& v = a.value();
  if (static_cast<Index>(segment.size()) != v.rows()) {
    throw DimensionError("segment_mean: " + std::to_string(segment.size()) +
                         " segment ids for " + shape_string(v));
  }
  Tape& tape = *a.tape();
  Vector counts = Vector::Zero(segments);
  Matrix out = Matrix::Zero(segments, v.cols());
  for (Index r = 0; r < v.rows(); ++r) {
    const Index s = segment[static_cast<std::size_t>(r)];
    if (s < 0 || s >= segments) {
      throw DimensionError("segment_mean: segment id " + std::to_string(s) + " out of range");
    }
    out.row(s) += v.row(r);
    counts(s) += 1.0;
  }
  for (Index s = 0; s < segments; ++s) {
    if (counts(s) > 0.0) out.row(s) /= counts(s);
  }
  std::vector<Index> seg(segment.begin(), segment.end());
  return tape.record(std::move(out), {a},
                     [a, seg = std::move(seg), counts](const Matrix& g, Tape& t) {
                       Matrix full(a.rows(), a.cols());
                       for (Index r = 0; r < a.rows(); ++r) {
                         const Index s = seg[static_cast<std::size_t>(r)];
                         full.row(r) = g.row(s) / counts(s);
                       }
                       t.accumulate(a, full);
                     });
}

Var scale_rows(const Var& a, const Vector& weights) {
  if (weights.size() != a.rows()) {
    throw DimensionError("scale_rows: " + std::to_string(weights.size()) + " weights for " +
                         shape_string(a.value()));
  }
  Tape& tape = *a.tape();
  Matrix out = weights.asDiagonal() * a.value();
  return tape.record(std::move(out), {a}, [a, weights](const Matrix& g, Tape& t) {
    t.accumulate(a, weights.asDiagonal() * g);
  });
}

}  // namespace graphflow
