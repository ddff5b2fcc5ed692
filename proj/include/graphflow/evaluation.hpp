// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphflow/constraints.hpp"
#include "graphflow/errors.hpp"
#include "graphflow/rng.hpp"
#include "graphflow/scene_graph.hpp"
#include "graphflow/voxel.hpp"

namespace graphflow {

enum class EvalMode { GenerationOnly, RelationshipChange, NodeAddition };

std::string_view to_string(EvalMode m);
EvalMode parse_eval_mode(std::string_view s);

struct Tally {
  std::int64_t checked = 0;
  std::int64_t satisfied = 0;

  double rate() const {
    return checked == 0 ? std::numeric_limits<double>::quiet_NaN()
                        : static_cast<double>(satisfied) / static_cast<double>(checked);
  }
  void add(bool ok) {
    ++checked;
    satisfied += ok ? 1 : 0;
  }
};

struct EvalReport {
  EvalMode mode = EvalMode::GenerationOnly;
  Index scene_count = 0;
  int degenerate_count = 0;
  // Indexed like kConstraintFamilies.
  std::array<Tally, kConstraintFamilies.size()> families{};
  // Relationship-change only: the edited edges.
  Tally flipped;

  const Tally& family(Family f) const;
  Tally& family(Family f);
};

// Raw N x 8 layout rows for each graph; decode_layout is applied by the caller.
using LayoutGenerator = std::function<std::vector<Matrix>(std::span<const MultimodalGraph>)>;

// Edits the graphs per mode (seeded), generates layouts, decodes them and
// checks the relevant edges. Same-as edges are never checked here.
EvalReport eval_mode(const LayoutGenerator& generate, std::span<const MultimodalGraph> graphs, EvalMode mode,
                     std::uint64_t seed, const ConstraintThresholds& thresholds = {});

// The graph edit used by relationship-change: one spatial edge replaced by its
// inverse predicate. Returns false if the graph has no flippable edge.
bool flip_random_edge(const MultimodalGraph& g, Rng& rng, MultimodalGraph& edited, Edge& changed);
// The edit used by node-addition: a fresh node tied to one or two existing nodes.
MultimodalGraph add_random_node(const MultimodalGraph& g, Rng& rng, std::vector<Edge>& added);

// Rows = families, columns = the reports' modes, tab separated.
std::string report_table(std::span<const EvalReport> reports);

// Symmetric Chamfer distance between point sets stored one point per row:
// mean over a of the squared distance to the nearest point of b, plus the
// same from b to a.
template <class A, class B>
double chamfer(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.rows() == 0 || b.rows() == 0) throw MetricError("chamfer of an empty point set");
  if (a.cols() != b.cols()) throw MetricError("chamfer: point dimensions differ");
  auto directed = [](const auto& from, const auto& to) {
    double total = 0.0;
    for (Index i = 0; i < from.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < to.rows(); ++j) {
        double d = 0.0;
        for (Index k = 0; k < from.cols(); ++k) {
          const double diff = from(i, k) - to(j, k);
          d += diff * diff;
        }
        if (d < best) best = d;
      }
      total += best;
    }
    return total / static_cast<double>(from.rows());
  };
  return directed(a, b) + directed(b, a);
}

double chamfer(const VoxelGrid& a, const VoxelGrid& b);

struct DistributionMetrics {
  double mmd = 0.0;
  double cov = 0.0;
  double nna = 0.0;
};

// Chamfer-based MMD, coverage and leave-one-out 1-NNA over point clouds.
// Nearest-neighbour ties go to the lowest index, generated before reference.
DistributionMetrics distribution_metrics(std::span<const Matrix> generated, std::span<const Matrix> reference);
DistributionMetrics distribution_metrics(std::span<const VoxelGrid> generated, std::span<const VoxelGrid> reference);

struct ConsistencyReport {
  double same_as_mean = 0.0;
  double control_mean = 0.0;
  std::size_t pairs = 0;
  int degenerate_count = 0;
};

// Voxel grids per node for each graph.
using ShapeGenerator = std::function<std::vector<std::vector<VoxelGrid>>(std::span<const MultimodalGraph>)>;

// Chamfer over every same-as pair versus as many random pairs of objects that
// are not same-as linked. Empty generated grids count as degenerate and are
// replaced by the full cube.
ConsistencyReport same_as_consistency(const ShapeGenerator& generate, std::span<const MultimodalGraph> graphs,
                                      std::uint64_t seed);

}  // namespace graphflow
