// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bitset>
#include <vector>

#include "graphflow/tensor.hpp"

namespace graphflow {

inline constexpr int kGridSize = 8;
inline constexpr int kVoxelCount = kGridSize * kGridSize * kGridSize;

// Binary occupancy on an 8^3 grid. Linear index = x + 8 * (y + 8 * z).
class VoxelGrid {
 public:
  using Bits = std::bitset<kVoxelCount>;

  VoxelGrid() = default;
  explicit VoxelGrid(const Bits& bits) : bits_(bits) {}

  static constexpr int index(int x, int y, int z) { return x + kGridSize * (y + kGridSize * z); }
  static constexpr bool in_range(int x, int y, int z) {
    return x >= 0 && y >= 0 && z >= 0 && x < kGridSize && y < kGridSize && z < kGridSize;
  }
  // Voxel center in the object frame [-1, 1]^3.
  static Vector3 center(int linear_index);

  bool test(int linear_index) const { return bits_.test(static_cast<std::size_t>(linear_index)); }
  bool at(int x, int y, int z) const { return in_range(x, y, z) && test(index(x, y, z)); }
  void set(int linear_index, bool value = true) { bits_.set(static_cast<std::size_t>(linear_index), value); }
  void set(int x, int y, int z, bool value = true) { set(index(x, y, z), value); }
  void flip(int linear_index) { bits_.flip(static_cast<std::size_t>(linear_index)); }
  // Sets every voxel of the inclusive box [x0,x1] x [y0,y1] x [z0,z1].
  void fill(int x0, int x1, int y0, int y1, int z0, int z1, bool value = true);

  int count() const { return static_cast<int>(bits_.count()); }
  bool empty() const { return bits_.none(); }
  // Active voxel indices in ascending order.
  std::vector<int> active() const;
  // Active voxel centers, one row per voxel, ascending index order.
  Matrix points() const;

  const Bits& bits() const { return bits_; }
  static VoxelGrid full();

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  Bits bits_;
};

// |a ∩ b| / |a ∪ b|; two empty grids have IoU 1.
double iou(const VoxelGrid& a, const VoxelGrid& b);

}  // namespace graphflow
