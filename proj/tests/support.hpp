// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

// Shared helpers for the unit and acceptance tests: finite-difference
// gradient checks, the per-op check table, and random graphs.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "graphflow/nn.hpp"
#include "graphflow/rng.hpp"
#include "graphflow/scene_graph.hpp"
#include "graphflow/tensor.hpp"

namespace graphflow::testing {

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed, 77);
  return randn(rng, rows, cols) * scale;
}

// Relative error with a small floor so exact zeros compare sanely.
inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3});
}

using OpFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Loss = sum(f(inputs) * w) for a fixed random w, so every output entry gets a
// distinct upstream gradient. Returns the largest relative error between the
// tape gradient and central differences over all input entries.
inline double grad_check(const OpFn& f, const std::vector<Matrix>& inputs, std::uint64_t seed, double h = 1e-5) {
  Matrix weights;
  auto loss_value = [&](const std::vector<Matrix>& xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const Matrix& x : xs) vars.push_back(tape.constant(x));
    const Var out = f(tape, vars);
    if (weights.size() == 0) weights = random_matrix(out.rows(), out.cols(), seed ^ 0x5151);
    return (out.value().array() * weights.array()).sum();
  };
  loss_value(inputs);

  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& x : inputs) vars.push_back(tape.leaf(x));
  const Var out = f(tape, vars);
  const Var loss = sum(mul(out, tape.constant(weights)));
  tape.backward(loss);

  double worst = 0.0;
  std::vector<Matrix> xs = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix g = tape.grad(vars[k]);
    for (Index i = 0; i < xs[k].size(); ++i) {
      const double keep = xs[k].data()[i];
      xs[k].data()[i] = keep + h;
      const double up = loss_value(xs);
      xs[k].data()[i] = keep - h;
      const double down = loss_value(xs);
      xs[k].data()[i] = keep;
      worst = std::max(worst, rel_err(g.data()[i], (up - down) / (2 * h)));
    }
  }
  return worst;
}

// Central differences on up to `per_param` entries of each parameter against
// the gradients accumulated by one backward of `loss`.
inline double param_grad_check(const std::function<Var(Tape&)>& loss, const ParameterList& params, int per_param,
                               std::uint64_t seed, double h = 1e-5) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto value = [&] {
    Tape tape;
    tape.set_grad_enabled(false);
    return loss(tape).value()(0, 0);
  };
  Rng rng(seed, 3);
  double worst = 0.0;
  for (Parameter* p : params) {
    const Index n = p->value.size();
    const Index probes = std::min<Index>(n, per_param);
    for (Index k = 0; k < probes; ++k) {
      const Index i = probes == n ? k : static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      const double keep = p->value.data()[i];
      p->value.data()[i] = keep + h;
      const double up = value();
      p->value.data()[i] = keep - h;
      const double down = value();
      p->value.data()[i] = keep;
      worst = std::max(worst, rel_err(p->grad.data()[i], (up - down) / (2 * h)));
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return worst;
}

struct OpCase {
  std::string name;
  OpFn fn;
  // Input shapes; draws are scaled to keep activations in their smooth range.
  std::vector<std::pair<Index, Index>> shapes;
  double scale = 1.0;
  // Added to every input entry, e.g. to keep relu inputs away from the kink.
  bool away_from_zero = false;
};

inline std::vector<OpCase> op_cases() {
  using V = std::vector<Var>;
  static const std::vector<Index> gather_index = {2, 0, 2, 1};
  static const std::vector<Index> segments = {0, 2, 0, 2, 3};
  return {
      {"matmul", [](Tape&, const V& x) { return matmul(x[0], x[1]); }, {{3, 4}, {4, 2}}},
      {"add", [](Tape&, const V& x) { return add(x[0], x[1]); }, {{3, 4}, {3, 4}}},
      {"add_row_broadcast", [](Tape&, const V& x) { return add(x[0], x[1]); }, {{3, 4}, {1, 4}}},
      {"add_scalar_broadcast", [](Tape&, const V& x) { return add(x[0], x[1]); }, {{3, 4}, {1, 1}}},
      {"sub", [](Tape&, const V& x) { return sub(x[0], x[1]); }, {{3, 4}, {1, 4}}},
      {"mul", [](Tape&, const V& x) { return mul(x[0], x[1]); }, {{3, 4}, {3, 4}}},
      {"mul_row_broadcast", [](Tape&, const V& x) { return mul(x[0], x[1]); }, {{3, 4}, {1, 4}}},
      {"scale", [](Tape&, const V& x) { return scale(x[0], -2.5); }, {{3, 4}}},
      {"transpose", [](Tape&, const V& x) { return transpose(x[0]); }, {{3, 4}}},
      {"relu", [](Tape&, const V& x) { return relu(x[0]); }, {{3, 4}}, 1.0, true},
      {"gelu", [](Tape&, const V& x) { return gelu(x[0]); }, {{3, 4}}},
      {"tanh", [](Tape&, const V& x) { return tanh(x[0]); }, {{3, 4}}},
      {"sigmoid", [](Tape&, const V& x) { return sigmoid(x[0]); }, {{3, 4}}},
      {"softmax_rows", [](Tape&, const V& x) { return softmax_rows(x[0]); }, {{3, 4}}},
      {"sum", [](Tape&, const V& x) { return sum(x[0]); }, {{3, 4}}},
      {"mean", [](Tape&, const V& x) { return mean(x[0]); }, {{3, 4}}},
      {"mse", [](Tape&, const V& x) { return mse(x[0], x[1]); }, {{3, 4}, {3, 4}}},
      {"bce_with_logits",
       [](Tape&, const V& x) {
         Matrix targets(3, 4);
         targets << 1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 0;
         return bce_with_logits(x[0], targets);
       },
       {{3, 4}}, 2.0},
      {"hcat", [](Tape&, const V& x) { return hcat(x); }, {{3, 2}, {3, 4}}},
      {"vcat", [](Tape&, const V& x) { return vcat(x); }, {{2, 4}, {3, 4}}},
      {"slice_cols", [](Tape&, const V& x) { return slice_cols(x[0], 1, 2); }, {{3, 4}}},
      {"slice_rows", [](Tape&, const V& x) { return slice_rows(x[0], 1, 2); }, {{3, 4}}},
      {"gather_rows", [](Tape&, const V& x) { return gather_rows(x[0], gather_index); }, {{3, 4}}},
      {"segment_mean", [](Tape&, const V& x) { return segment_mean(x[0], segments, 5); }, {{5, 3}}},
      {"scale_rows",
       [](Tape&, const V& x) {
         Vector w(3);
         w << 0.5, 0.0, -2.0;
         return scale_rows(x[0], w);
       },
       {{3, 4}}},
  };
}

// Largest error of one op case over `points` random input draws.
inline double op_grad_error(const OpCase& op, int points, std::uint64_t seed) {
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    std::vector<Matrix> inputs;
    for (std::size_t k = 0; k < op.shapes.size(); ++k) {
      Matrix m = random_matrix(op.shapes[k].first, op.shapes[k].second, seed + 1000 * p + k, op.scale);
      if (op.away_from_zero) {
        m = m.unaryExpr([](double v) { return v >= 0 ? v + 0.1 : v - 0.1; });
      }
      inputs.push_back(std::move(m));
    }
    worst = std::max(worst, grad_check(op.fn, inputs, seed + p));
  }
  return worst;
}

// Random valid graph: n nodes, each unordered pair related with probability
// edge_prob through one random predicate, then normalized.
inline MultimodalGraph random_graph(Rng& rng, int n, double edge_prob) {
  MultimodalGraph g;
  for (int i = 0; i < n; ++i) {
    const int cat = static_cast<int>(rng.below(kCategoryCount));
    const int style = static_cast<int>(rng.below(kStylesPerCategory));
    const Modality m{rng.bernoulli(0.7), rng.bernoulli(0.7)};
    g.nodes.push_back(make_node(cat, style, m));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!rng.bernoulli(edge_prob)) continue;
      const auto p = static_cast<Predicate>(rng.below(kPredicateCount));
      set_relation(g, i, j, p);
    }
  }
  return normalized(g);
}

// Applies node permutation perm (new index of old node i is perm[i]).
inline MultimodalGraph permute_graph(const MultimodalGraph& g, const std::vector<int>& perm) {
  MultimodalGraph out;
  out.nodes.resize(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) out.nodes[static_cast<std::size_t>(perm[i])] = g.nodes[i];
  for (const Edge& e : g.edges) {
    out.edges.push_back(Edge{perm[static_cast<std::size_t>(e.source)], perm[static_cast<std::size_t>(e.target)], e.predicate});
  }
  return normalized(out);
}

// Reference point-set metrics written directly from their definitions, with
// no shared code or caching. Distances accumulate in the same order as the
// library so results compare bitwise.
inline double brute_chamfer(const Matrix& a, const Matrix& b) {
  auto one_way = [](const Matrix& from, const Matrix& to) {
    std::vector<double> nearest;
    for (Index i = 0; i < from.rows(); ++i) {
      std::vector<double> d;
      for (Index j = 0; j < to.rows(); ++j) {
        double s = 0.0;
        for (Index k = 0; k < from.cols(); ++k) s += (from(i, k) - to(j, k)) * (from(i, k) - to(j, k));
        d.push_back(s);
      }
      nearest.push_back(*std::min_element(d.begin(), d.end()));
    }
    double total = 0.0;
    for (double v : nearest) total += v;
    return total / static_cast<double>(from.rows());
  };
  return one_way(a, b) + one_way(b, a);
}

struct BruteMetrics {
  double mmd = 0.0;
  double cov = 0.0;
  double nna = 0.0;
};

inline BruteMetrics brute_metrics(const std::vector<Matrix>& gen, const std::vector<Matrix>& ref) {
  BruteMetrics m;
  double mmd = 0.0;
  for (const Matrix& r : ref) {
    double best = std::numeric_limits<double>::infinity();
    for (const Matrix& g : gen) best = std::min(best, brute_chamfer(r, g));
    mmd += best;
  }
  m.mmd = mmd / static_cast<double>(ref.size());

  std::vector<bool> hit(ref.size(), false);
  for (const Matrix& g : gen) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t r = 0; r < ref.size(); ++r) d.emplace_back(brute_chamfer(g, ref[r]), r);
    hit[std::min_element(d.begin(), d.end())->second] = true;
  }
  m.cov = static_cast<double>(std::count(hit.begin(), hit.end(), true)) / static_cast<double>(ref.size());

  std::vector<std::pair<const Matrix*, bool>> all;
  for (const Matrix& g : gen) all.emplace_back(&g, true);
  for (const Matrix& r : ref) all.emplace_back(&r, false);
  std::size_t right = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (j != i) d.emplace_back(brute_chamfer(*all[i].first, *all[j].first), j);
    }
    const std::size_t nn = std::min_element(d.begin(), d.end())->second;
    if (all[nn].second == all[i].second) ++right;
  }
  m.nna = static_cast<double>(right) / static_cast<double>(all.size());
  return m;
}

}  // namespace graphflow::testing
