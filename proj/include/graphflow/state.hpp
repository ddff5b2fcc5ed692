// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "graphflow/scene_graph.hpp"
#include "graphflow/tensor.hpp"
#include "graphflow/voxel.hpp"

namespace graphflow {

enum class Branch : std::uint8_t { Layout, Shape, Texture };

std::string_view to_string(Branch b);
// Throws ParseError for anything but layout|shape|texture.
Branch parse_branch(std::string_view s);

inline constexpr Index kShapeLatentDim = 16;

// Width of one state row: 8 for layout boxes, 16 for shape latents, 8 for
// per-voxel texture features.
Index state_dim(Branch b);

// Denoising state of one branch for one or more graphs.
//
// Layout and shape states hold one row per node. Texture states hold one row
// per active voxel; `row_node` maps rows to nodes and `voxels` records the
// voxel index of each row. Neither mapping changes while the state is
// denoised.
struct FlowState {
  Branch branch = Branch::Layout;
  Index node_count = 0;
  Matrix values;
  std::vector<Index> row_node;
  std::vector<int> voxels;
  double t = 0.0;

  Index rows() const { return values.rows(); }
  bool same_geometry(const FlowState& other) const {
    return branch == other.branch && node_count == other.node_count &&
           row_node == other.row_node && voxels == other.voxels;
  }
};

FlowState layout_state(const Matrix& layout);
FlowState shape_state(const Matrix& latents);
// Rows follow ascending voxel index within each node, nodes in order.
// features[i] must have one row per active voxel of geometry[i].
FlowState texture_state(std::span<const VoxelGrid> geometry, std::span<const Matrix> features);
// Same structure filled with zeros.
FlowState texture_geometry(std::span<const VoxelGrid> geometry);
// Rows of node i, in order.
Matrix node_rows(const FlowState& s, Index node);

// Concatenates states of several graphs; node indices are offset.
FlowState concat_states(std::span<const FlowState> parts);
// Inverse of concat_states given per-part node counts.
std::vector<FlowState> split_state(const FlowState& s, std::span<const Index> node_counts);

// Disjoint union of graphs laid out for message passing.
struct GraphBatch {
  Index node_count = 0;
  Index scene_count = 0;
  std::vector<Index> node_scene;
  std::vector<Index> categories;
  Matrix modal_features;  // node_count x 64, [text | vision]
  std::vector<Index> edge_source;
  std::vector<Index> edge_target;
  std::vector<Index> edge_predicate;

  Index edge_count() const { return static_cast<Index>(edge_source.size()); }
};

GraphBatch make_batch(std::span<const MultimodalGraph* const> graphs);
GraphBatch make_batch(const MultimodalGraph& graph);

}  // namespace graphflow
