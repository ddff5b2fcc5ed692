// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/voxel.hpp"

namespace graphflow {

Vector3 VoxelGrid::center(int linear_index) {
  const int x = linear_index % kGridSize;
  const int y = (linear_index / kGridSize) % kGridSize;
  const int z = linear_index / (kGridSize * kGridSize);
  auto coord = [](int i) { return (2.0 * i + 1.0) / kGridSize - 1.0; };
  return {coord(x), coord(y), coord(z)};
}

void VoxelGrid::fill(int x0, int x1, int y0, int y1, int z0, int z1, bool value) {
  for (int z = z0; z <= z1; ++z) {
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (in_range(x, y, z)) set(x, y, z, value);
      }
    }
  }
}

std::vector<int> VoxelGrid::active() const {
  std::vector<int> out;
  out.reserve(bits_.count());
  for (int i = 0; i < kVoxelCount; ++i) {
    if (test(i)) out.push_back(i);
  }
  return out;
}

Matrix VoxelGrid::points() const {
  const std::vector<int> idx = active();
  Matrix out(static_cast<Index>(idx.size()), 3);
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = center(idx[r]).transpose();
  return out;
}

VoxelGrid VoxelGrid::full() {
  Bits b;
  b.set();
  return VoxelGrid(b);
}

double iou(const VoxelGrid& a, const VoxelGrid& b) {
  const auto uni = (a.bits() | b.bits()).count();
  if (uni == 0) return 1.0;
  return static_cast<double>((a.bits() & b.bits()).count()) / static_cast<double>(uni);
}

}  // namespace graphflow
