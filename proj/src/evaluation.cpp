// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "graphflow/branches.hpp"

namespace graphflow {

std::string_view to_string(EvalMode m) {
  switch (m) {
    case EvalMode::GenerationOnly: return "generation-only";
    case EvalMode::RelationshipChange: return "relationship-change";
    case EvalMode::NodeAddition: return "node-addition";
  }
  return "generation-only";
}

EvalMode parse_eval_mode(std::string_view s) {
  if (s == "generation-only") return EvalMode::GenerationOnly;
  if (s == "relationship-change") return EvalMode::RelationshipChange;
  if (s == "node-addition") return EvalMode::NodeAddition;
  throw ParseError("unknown eval mode '" + std::string(s) +
                   "' (expected generation-only|relationship-change|node-addition)");
}

namespace {

std::size_t family_slot(Family f) {
  for (std::size_t k = 0; k < kConstraintFamilies.size(); ++k) {
    if (kConstraintFamilies[k] == f) return k;
  }
  throw ContractError("family '" + std::string(to_string(f)) + "' is not a layout constraint family");
}

// Families whose predicates have a distinct inverse.
bool flippable(Predicate p) {
  const Family f = family_of(p);
  return f == Family::LeftRight || f == Family::FrontBehind || f == Family::SmallerLarger ||
         f == Family::TallerShorter;
}

constexpr std::array<Predicate, 8> kAddablePredicates = {
    Predicate::LeftOf,      Predicate::RightOf,    Predicate::FrontOf,     Predicate::Behind,
    Predicate::SmallerThan, Predicate::BiggerThan, Predicate::TallerThan, Predicate::ShorterThan,
};

}  // namespace

const Tally& EvalReport::family(Family f) const { return families[family_slot(f)]; }
Tally& EvalReport::family(Family f) { return families[family_slot(f)]; }

bool flip_random_edge(const MultimodalGraph& g, Rng& rng, MultimodalGraph& edited, Edge& changed) {
  std::vector<Edge> candidates;
  for (const Edge& e : g.edges) {
    if (flippable(e.predicate)) candidates.push_back(e);
  }
  if (candidates.empty()) return false;
  const Edge pick = candidates[rng.below(candidates.size())];
  changed = Edge{pick.source, pick.target, inverse(pick.predicate)};
  edited = change_relationship(g, pick, changed.predicate);
  return true;
}

MultimodalGraph add_random_node(const MultimodalGraph& g, Rng& rng, std::vector<Edge>& added) {
  const int category = static_cast<int>(rng.below(kCategoryCount));
  const int style = static_cast<int>(rng.below(kStylesPerCategory));
  const int fresh = static_cast<int>(g.node_count());
  std::vector<int> others(static_cast<std::size_t>(fresh));
  for (int i = 0; i < fresh; ++i) others[static_cast<std::size_t>(i)] = i;
  for (std::size_t i = others.size(); i > 1; --i) std::swap(others[i - 1], others[rng.below(i)]);
  const std::size_t count = std::min<std::size_t>(others.size(), 1 + rng.below(2));
  added.clear();
  for (std::size_t k = 0; k < count; ++k) {
    const Predicate p = kAddablePredicates[rng.below(kAddablePredicates.size())];
    added.push_back(Edge{fresh, others[k], p});
  }
  return add_node(g, make_node(category, style, Modality{true, true}), added);
}

EvalReport eval_mode(const LayoutGenerator& generate, std::span<const MultimodalGraph> graphs, EvalMode mode,
                     std::uint64_t seed, const ConstraintThresholds& thresholds) {
  EvalReport report;
  report.mode = mode;
  std::vector<MultimodalGraph> inputs;
  // Edges to check per graph.
  std::vector<std::vector<Edge>> checks;
  std::vector<Edge> flipped;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    Rng rng(seed, k);
    const MultimodalGraph& g = graphs[k];
    std::vector<Edge> check;
    if (mode == EvalMode::GenerationOnly) {
      inputs.push_back(g);
      check = g.edges;
    } else if (mode == EvalMode::RelationshipChange) {
      MultimodalGraph edited;
      Edge changed;
      if (!flip_random_edge(g, rng, edited, changed)) continue;
      inputs.push_back(std::move(edited));
      check = inputs.back().edges;
      flipped.push_back(changed);
    } else {
      std::vector<Edge> added;
      inputs.push_back(add_random_node(g, rng, added));
      check = added;
    }
    checks.push_back(std::move(check));
  }

  const std::vector<Matrix> layouts = generate(inputs);
  if (layouts.size() != inputs.size()) {
    throw ContractError("eval_mode: generator returned " + std::to_string(layouts.size()) + " layouts for " +
                        std::to_string(inputs.size()) + " graphs");
  }
  report.scene_count = static_cast<Index>(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (layouts[k].rows() != inputs[k].node_count()) {
      throw ContractError("eval_mode: layout " + std::to_string(k) + " has the wrong node count");
    }
    const Matrix decoded = decode_layout(layouts[k]).rows;
    for (const Edge& e : checks[k]) {
      if (e.predicate == Predicate::SameAs) continue;
      report.family(family_of(e.predicate)).add(check_constraint(e.predicate, decoded, e.source, e.target, thresholds));
    }
    if (mode == EvalMode::RelationshipChange) {
      const Edge& e = flipped[k];
      report.flipped.add(check_constraint(e.predicate, decoded, e.source, e.target, thresholds));
    }
  }
  return report;
}

std::string report_table(std::span<const EvalReport> reports) {
  auto cell = [](const Tally& t) {
    if (t.checked == 0) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", t.rate());
    return std::string(buf);
  };
  std::string out = "family";
  for (const EvalReport& r : reports) out += "\t" + std::string(to_string(r.mode));
  out += "\n";
  for (std::size_t k = 0; k < kConstraintFamilies.size(); ++k) {
    out += std::string(to_string(kConstraintFamilies[k]));
    for (const EvalReport& r : reports) out += "\t" + cell(r.families[k]);
    out += "\n";
  }
  const bool any_flipped = std::any_of(reports.begin(), reports.end(),
                                       [](const EvalReport& r) { return r.flipped.checked > 0; });
  if (any_flipped) {
    out += "flipped-edge";
    for (const EvalReport& r : reports) out += "\t" + cell(r.flipped);
    out += "\n";
  }
  return out;
}

double chamfer(const VoxelGrid& a, const VoxelGrid& b) { return chamfer(a.points(), b.points()); }

DistributionMetrics distribution_metrics(std::span<const Matrix> generated, std::span<const Matrix> reference) {
  if (generated.empty() || reference.empty()) throw MetricError("distribution metrics need non-empty sets");
  const std::size_t ng = generated.size();
  const std::size_t nr = reference.size();
  const std::size_t n = ng + nr;
  auto item = [&](std::size_t i) -> const Matrix& { return i < ng ? generated[i] : reference[i - ng]; };
  Matrix d = Matrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = chamfer(item(i), item(j));
      d(static_cast<Index>(i), static_cast<Index>(j)) = v;
      d(static_cast<Index>(j), static_cast<Index>(i)) = v;
    }
  }
  auto at = [&](std::size_t i, std::size_t j) { return d(static_cast<Index>(i), static_cast<Index>(j)); };

  DistributionMetrics m;
  double mmd = 0.0;
  for (std::size_t r = 0; r < nr; ++r) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < ng; ++g) best = std::min(best, at(ng + r, g));
    mmd += best;
  }
  m.mmd = mmd / static_cast<double>(nr);

  std::set<std::size_t> covered;
  for (std::size_t g = 0; g < ng; ++g) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < nr; ++r) {
      if (at(g, ng + r) < at(g, ng + best)) best = r;
    }
    covered.insert(best);
  }
  m.cov = static_cast<double>(covered.size()) / static_cast<double>(nr);

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && at(i, j) < at(i, best)) best = j;
    }
    if ((best < ng) == (i < ng)) ++correct;
  }
  m.nna = n > 1 ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  return m;
}

DistributionMetrics distribution_metrics(std::span<const VoxelGrid> generated, std::span<const VoxelGrid> reference) {
  auto clouds = [](std::span<const VoxelGrid> grids) {
    std::vector<Matrix> out;
    for (const VoxelGrid& g : grids) {
      if (g.empty()) throw MetricError("distribution metrics: empty voxel grid");
      out.push_back(g.points());
    }
    return out;
  };
  const std::vector<Matrix> g = clouds(generated);
  const std::vector<Matrix> r = clouds(reference);
  return distribution_metrics(g, r);
}

ConsistencyReport same_as_consistency(const ShapeGenerator& generate, std::span<const MultimodalGraph> graphs,
                                      std::uint64_t seed) {
  struct Pair {
    std::size_t graph_a, node_a, graph_b, node_b;
  };
  std::vector<Pair> same;
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> linked;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    for (const Edge& e : graphs[k].edges) {
      if (e.predicate != Predicate::SameAs) continue;
      linked.insert({k, static_cast<std::size_t>(e.source), static_cast<std::size_t>(e.target)});
      if (e.source < e.target) {
        same.push_back({k, static_cast<std::size_t>(e.source), k, static_cast<std::size_t>(e.target)});
      }
    }
  }
  if (same.empty()) {
    throw MetricError("no same-as pairs in the dataset; raise oracle.same_as_probability");
  }

  std::vector<std::vector<VoxelGrid>> shapes = generate(graphs);
  if (shapes.size() != graphs.size()) throw ContractError("same_as_consistency: generator returned the wrong count");
  ConsistencyReport report;
  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    if (static_cast<Index>(shapes[k].size()) != graphs[k].node_count()) {
      throw ContractError("same_as_consistency: wrong shape count for graph " + std::to_string(k));
    }
    for (std::size_t i = 0; i < shapes[k].size(); ++i) {
      if (shapes[k][i].empty()) {
        shapes[k][i] = VoxelGrid::full();
        ++report.degenerate_count;
      }
      pool.emplace_back(k, i);
    }
  }

  Rng rng(seed, hash_string("control"));
  std::vector<Pair> control;
  while (control.size() < same.size()) {
    const auto a = pool[rng.below(pool.size())];
    const auto b = pool[rng.below(pool.size())];
    if (a == b) continue;
    if (a.first == b.first && linked.count({a.first, a.second, b.second}) != 0) continue;
    control.push_back({a.first, a.second, b.first, b.second});
  }

  auto mean_chamfer = [&](const std::vector<Pair>& pairs) {
    double total = 0.0;
    for (const Pair& p : pairs) total += chamfer(shapes[p.graph_a][p.node_a], shapes[p.graph_b][p.node_b]);
    return total / static_cast<double>(pairs.size());
  };
  report.pairs = same.size();
  report.same_as_mean = mean_chamfer(same);
  report.control_mean = mean_chamfer(control);
  return report;
}

}  // namespace graphflow
