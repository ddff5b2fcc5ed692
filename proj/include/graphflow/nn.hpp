// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

// Small building blocks shared by the exchange units, denoisers and codecs.

#pragma once

#include <string>
#include <vector>

#include "graphflow/rng.hpp"
#include "graphflow/tensor.hpp"

namespace graphflow {

using ParameterList = std::vector<Parameter*>;

// y = x W + b with W stored as in x out.
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, Index in, Index out, Rng& rng);

  Var operator()(Tape& tape, const Var& x);
  void collect(ParameterList& out);

  Index in_dim() const { return weight_.value.rows(); }
  Index out_dim() const { return weight_.value.cols(); }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
};

// Linear layers with GELU between them; the last layer is linear.
class Mlp {
 public:
  Mlp() = default;
  // dims = {in, hidden..., out}
  Mlp(const std::string& name, const std::vector<Index>& dims, Rng& rng);

  Var operator()(Tape& tape, const Var& x);
  void collect(ParameterList& out);

  Index in_dim() const { return layers_.front().in_dim(); }
  Index out_dim() const { return layers_.back().out_dim(); }

 private:
  std::vector<Linear> layers_;
};

// Sinusoidal features of t: sin(w_k t), cos(w_k t) interleaved, w_k = 2^k for
// k < dim/2.
Matrix time_embedding(const Vector& t, Index dim);

}  // namespace graphflow
