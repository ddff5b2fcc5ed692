// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/state.hpp"

#include "graphflow/errors.hpp"

namespace graphflow {

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::Layout: return "layout";
    case Branch::Shape: return "shape";
    case Branch::Texture: return "texture";
  }
  return "layout";
}

Branch parse_branch(std::string_view s) {
  if (s == "layout") return Branch::Layout;
  if (s == "shape") return Branch::Shape;
  if (s == "texture") return Branch::Texture;
  throw ParseError("unknown branch '" + std::string(s) + "' (expected layout|shape|texture)");
}

Index state_dim(Branch b) {
  switch (b) {
    case Branch::Layout: return 8;
    case Branch::Shape: return kShapeLatentDim;
    case Branch::Texture: return 8;
  }
  return 8;
}

namespace {

FlowState per_node_state(Branch b, const Matrix& values) {
  if (values.cols() != state_dim(b)) {
    throw DimensionError(std::string(to_string(b)) + " state needs " +
                         std::to_string(state_dim(b)) + " columns, got " + shape_string(values));
  }
  FlowState s;
  s.branch = b;
  s.node_count = values.rows();
  s.values = values;
  s.row_node.resize(static_cast<std::size_t>(values.rows()));
  for (Index i = 0; i < values.rows(); ++i) s.row_node[static_cast<std::size_t>(i)] = i;
  return s;
}

}  // namespace

FlowState layout_state(const Matrix& layout) { return per_node_state(Branch::Layout, layout); }
FlowState shape_state(const Matrix& latents) { return per_node_state(Branch::Shape, latents); }

FlowState texture_geometry(std::span<const VoxelGrid> geometry) {
  FlowState s;
  s.branch = Branch::Texture;
  s.node_count = static_cast<Index>(geometry.size());
  Index rows = 0;
  for (const VoxelGrid& g : geometry) rows += g.count();
  s.values = Matrix::Zero(rows, state_dim(Branch::Texture));
  s.row_node.reserve(static_cast<std::size_t>(rows));
  s.voxels.reserve(static_cast<std::size_t>(rows));
  for (std::size_t i = 0; i < geometry.size(); ++i) {
    for (const int v : geometry[i].active()) {
      s.row_node.push_back(static_cast<Index>(i));
      s.voxels.push_back(v);
    }
  }
  return s;
}

FlowState texture_state(std::span<const VoxelGrid> geometry, std::span<const Matrix> features) {
  if (geometry.size() != features.size()) {
    throw ContractError("texture_state: " + std::to_string(geometry.size()) + " grids but " +
                        std::to_string(features.size()) + " feature blocks");
  }
  FlowState s = texture_geometry(geometry);
  Index at = 0;
  for (std::size_t i = 0; i < geometry.size(); ++i) {
    const Matrix& f = features[i];
    if (f.rows() != geometry[i].count() || f.cols() != state_dim(Branch::Texture)) {
      throw ContractError("texture_state: node " + std::to_string(i) + " has features " +
                          shape_string(f) + " for " + std::to_string(geometry[i].count()) +
                          " active voxels");
    }
    s.values.middleRows(at, f.rows()) = f;
    at += f.rows();
  }
  return s;
}

Matrix node_rows(const FlowState& s, Index node) {
  std::vector<Index> rows;
  for (std::size_t r = 0; r < s.row_node.size(); ++r) {
    if (s.row_node[r] == node) rows.push_back(static_cast<Index>(r));
  }
  Matrix out(static_cast<Index>(rows.size()), s.values.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = s.values.row(rows[k]);
  return out;
}

FlowState concat_states(std::span<const FlowState> parts) {
  if (parts.empty()) throw ContractError("concat_states of nothing");
  FlowState out;
  out.branch = parts.front().branch;
  out.t = parts.front().t;
  Index rows = 0;
  for (const FlowState& p : parts) {
    if (p.branch != out.branch) throw ContractError("concat_states: mixed branches");
    rows += p.rows();
  }
  out.values.resize(rows, state_dim(out.branch));
  Index at = 0;
  for (const FlowState& p : parts) {
    out.values.middleRows(at, p.rows()) = p.values;
    for (const Index n : p.row_node) out.row_node.push_back(n + out.node_count);
    out.voxels.insert(out.voxels.end(), p.voxels.begin(), p.voxels.end());
    out.node_count += p.node_count;
    at += p.rows();
  }
  return out;
}

std::vector<FlowState> split_state(const FlowState& s, std::span<const Index> node_counts) {
  std::vector<FlowState> out;
  Index node_begin = 0;
  std::size_t row = 0;
  for (const Index count : node_counts) {
    FlowState part;
    part.branch = s.branch;
    part.t = s.t;
    part.node_count = count;
    const std::size_t row_begin = row;
    while (row < s.row_node.size() && s.row_node[row] < node_begin + count) {
      part.row_node.push_back(s.row_node[row] - node_begin);
      if (!s.voxels.empty()) part.voxels.push_back(s.voxels[row]);
      ++row;
    }
    part.values = s.values.middleRows(static_cast<Index>(row_begin), static_cast<Index>(row - row_begin));
    node_begin += count;
    out.push_back(std::move(part));
  }
  if (row != s.row_node.size() || node_begin != s.node_count) {
    throw ContractError("split_state: node counts do not cover the state");
  }
  return out;
}

GraphBatch make_batch(std::span<const MultimodalGraph* const> graphs) {
  GraphBatch b;
  b.scene_count = static_cast<Index>(graphs.size());
  for (const MultimodalGraph* g : graphs) b.node_count += g->node_count();
  b.modal_features.resize(b.node_count, kNodeFeatureDim);
  Index offset = 0;
  for (std::size_t s = 0; s < graphs.size(); ++s) {
    const MultimodalGraph& g = *graphs[s];
    for (Index i = 0; i < g.node_count(); ++i) {
      const NodeSpec& n = g.nodes[static_cast<std::size_t>(i)];
      b.node_scene.push_back(static_cast<Index>(s));
      b.categories.push_back(n.category);
      b.modal_features.row(offset + i) << n.text.transpose(), n.vision.transpose();
    }
    for (const Edge& e : g.edges) {
      b.edge_source.push_back(offset + e.source);
      b.edge_target.push_back(offset + e.target);
      b.edge_predicate.push_back(static_cast<Index>(e.predicate));
    }
    offset += g.node_count();
  }
  return b;
}

GraphBatch make_batch(const MultimodalGraph& graph) {
  const MultimodalGraph* one[] = {&graph};
  return make_batch(std::span<const MultimodalGraph* const>(one));
}

}  // namespace graphflow
