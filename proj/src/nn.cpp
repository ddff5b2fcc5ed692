// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/nn.hpp"

#include <cmath>

#include "graphflow/errors.hpp"

namespace graphflow {

Linear::Linear(std::string name, Index in, Index out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Matrix w = (rand_uniform(rng, in, out).array() * 2.0 - 1.0).matrix() * bound;
  Matrix b = (rand_uniform(rng, 1, out).array() * 2.0 - 1.0).matrix() * bound;
  weight_ = Parameter(name + ".weight", std::move(w));
  bias_ = Parameter(name + ".bias", std::move(b));
}

Var Linear::operator()(Tape& tape, const Var& x) {
  return add(matmul(x, tape.parameter(weight_)), tape.parameter(bias_));
}

void Linear::collect(ParameterList& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Mlp::Mlp(const std::string& name, const std::vector<Index>& dims, Rng& rng) {
  if (dims.size() < 2) throw ContractError("Mlp needs at least input and output dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers_.emplace_back(name + "." + std::to_string(i), dims[i], dims[i + 1], rng);
  }
}

Var Mlp::operator()(Tape& tape, const Var& x) {
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](tape, h);
    if (i + 1 < layers_.size()) h = gelu(h);
  }
  return h;
}

void Mlp::collect(ParameterList& out) {
  for (Linear& l : layers_) l.collect(out);
}

Matrix time_embedding(const Vector& t, Index dim) {
  const Index half = dim / 2;
  Matrix out(t.size(), dim);
  for (Index r = 0; r < t.size(); ++r) {
    for (Index k = 0; k < half; ++k) {
      const double w = std::ldexp(1.0, static_cast<int>(k));
      out(r, 2 * k) = std::sin(w * t(r));
      out(r, 2 * k + 1) = std::cos(w * t(r));
    }
  }
  return out;
}

}  // namespace graphflow
