// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/constraints.hpp"

#include "graphflow/errors.hpp"

namespace graphflow {

bool check_constraint(Predicate p, const Matrix& layout, Index i, Index j,
                      const ConstraintThresholds& th) {
  if (layout.cols() != kLayoutDim) {
    throw ContractError("check_constraint: layout must have 8 columns, got " + shape_string(layout));
  }
  if (i < 0 || j < 0 || i >= layout.rows() || j >= layout.rows()) {
    throw ContractError("check_constraint: node pair (" + std::to_string(i) + ", " +
                        std::to_string(j) + ") out of range for " +
                        std::to_string(layout.rows()) + " nodes");
  }
  const auto ti = layout.row(i).head<3>();
  const auto tj = layout.row(j).head<3>();
  const auto si = layout.row(i).segment<3>(3);
  const auto sj = layout.row(j).segment<3>(3);
  const double vol_i = si.prod();
  const double vol_j = sj.prod();
  const double grow = 1.0 + th.volume_margin;
  switch (p) {
    case Predicate::LeftOf: return ti.x() < tj.x() - th.margin;
    case Predicate::RightOf: return ti.x() > tj.x() + th.margin;
    case Predicate::FrontOf: return ti.z() > tj.z() + th.margin;
    case Predicate::Behind: return ti.z() < tj.z() - th.margin;
    case Predicate::BiggerThan: return vol_i > vol_j * grow;
    case Predicate::SmallerThan: return vol_j > vol_i * grow;
    case Predicate::TallerThan: return si.y() > sj.y() * grow;
    case Predicate::ShorterThan: return sj.y() > si.y() * grow;
    case Predicate::CloseBy: return (ti - tj).norm() < th.close_distance;
    case Predicate::SymmetricalTo: {
      RowVector mirrored = ti;
      mirrored(th.symmetry_axis) = -mirrored(th.symmetry_axis);
      return (mirrored - tj).norm() < th.symmetry_margin &&
             (si - sj).cwiseAbs().maxCoeff() < th.symmetry_margin;
    }
    case Predicate::SameAs:
      throw ContractError("check_constraint: same-as is a shape relation, not a layout rule");
  }
  return false;
}

}  // namespace graphflow
