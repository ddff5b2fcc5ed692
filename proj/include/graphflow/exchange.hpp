// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "graphflow/nn.hpp"
#include "graphflow/rng.hpp"
#include "graphflow/state.hpp"
#include "graphflow/tensor.hpp"

namespace graphflow {

struct ModelConfig {
  int gcn_layers = 5;
  Index gcn_hidden = 256;
  Index edge_dim = 32;
  Index condition_dim = 128;
  Index projector_dim = 64;
  Index time_dim = 32;
  int denoiser_depth = 4;
  Index denoiser_hidden = 256;
  // Adds one masked self-attention block over the rows of each scene.
  bool node_attention = false;
  Index attention_dim = 64;
};

// Throws ContractError on non-positive sizes or an odd time_dim.
void validate(const ModelConfig& c);

// Per-node condition vectors, one row per node.
struct ConditionSet {
  Matrix vectors;

  Index node_count() const { return vectors.rows(); }
};

ConditionSet null_condition(Index node_count, Index dim);

// Message passing over (subject, predicate, object) triplets.
//
// Every node also takes part in a self triplet with a learned self-edge
// embedding, so nodes without edges still get an update. The aggregation
// over neighbours is masked to zero for isolated nodes.
class TripletGcn {
 public:
  TripletGcn() = default;
  TripletGcn(const std::string& name, Index input_dim, const ModelConfig& c, Rng& rng);

  // nodes: batch.node_count x input_dim. Returns node_count x condition_dim.
  Var operator()(Tape& tape, const Var& nodes, const GraphBatch& batch);
  void collect(ParameterList& out);

  int layer_count() const { return static_cast<int>(triplet_.size()); }

 private:
  Index condition_dim_ = 0;
  Index edge_dim_ = 0;
  Parameter edge_table_;  // one row per predicate plus the self edge
  std::vector<Mlp> triplet_;
  std::vector<Mlp> aggregate_;
};

// Builds condition vectors for one branch from the graph and the current
// noisy state of that branch.
class ExchangeUnit {
 public:
  ExchangeUnit() = default;
  ExchangeUnit(Branch branch, const ModelConfig& c, Rng& rng);

  // state rows are mapped to nodes through row_node; node_time holds t per node.
  Var operator()(Tape& tape, const GraphBatch& batch, const Var& state,
                 std::span<const Index> row_node, const Vector& node_time);
  ConditionSet operator()(const GraphBatch& batch, const FlowState& state, const Vector& node_time);

  // Per-node summary of the state: rows averaged per node, then projected.
  Var project(Tape& tape, const Var& state, std::span<const Index> row_node, Index node_count);
  void collect(ParameterList& out);

  Branch branch() const { return branch_; }
  Index input_dim() const;

 private:
  Branch branch_ = Branch::Layout;
  ModelConfig config_;
  Parameter category_table_;
  Linear projector_;
  TripletGcn gcn_;
};

}  // namespace graphflow
