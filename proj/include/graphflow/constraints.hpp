// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

// Geometric definitions of the spatial predicates over layout rows
// [t_x, t_y, t_z, s_x, s_y, s_z, cos a, sin a]. Each rule is written so that
// rule(i, j) holds exactly when inverse-rule(j, i) holds.

#pragma once

#include "graphflow/scene_graph.hpp"
#include "graphflow/tensor.hpp"

namespace graphflow {

inline constexpr Index kLayoutDim = 8;

struct ConstraintThresholds {
  double margin = 0.05;           // left/right, front/behind
  double volume_margin = 0.1;     // relative, bigger/smaller and taller/shorter
  double close_distance = 0.3;    // center distance for close-by
  double symmetry_margin = 0.08;  // mirrored center and size tolerance
  int symmetry_axis = 0;          // mirror plane normal: 0 = x, 2 = z
};

// Throws ContractError for out-of-range indices and for same-as, which is a
// shape relation (see relation_holds in oracle.hpp).
bool check_constraint(Predicate p, const Matrix& layout, Index i, Index j,
                      const ConstraintThresholds& thresholds = {});

}  // namespace graphflow
