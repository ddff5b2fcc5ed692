// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/exchange.hpp"

#include <numeric>

#include "graphflow/errors.hpp"

namespace graphflow {

void validate(const ModelConfig& c) {
  auto positive = [](Index v, const char* name) {
    if (v <= 0) throw ContractError(std::string("model.") + name + " must be positive");
  };
  positive(c.gcn_layers, "gcn_layers");
  positive(c.gcn_hidden, "gcn_hidden");
  positive(c.edge_dim, "edge_dim");
  positive(c.condition_dim, "condition_dim");
  positive(c.projector_dim, "projector_dim");
  positive(c.time_dim, "time_dim");
  positive(c.denoiser_depth, "denoiser_depth");
  positive(c.denoiser_hidden, "denoiser_hidden");
  positive(c.attention_dim, "attention_dim");
  if (c.time_dim % 2 != 0) throw ContractError("model.time_dim must be even");
  if (c.denoiser_depth < 2) throw ContractError("model.denoiser_depth must be at least 2");
}

ConditionSet null_condition(Index node_count, Index dim) {
  return ConditionSet{Matrix::Zero(node_count, dim)};
}

TripletGcn::TripletGcn(const std::string& name, Index input_dim, const ModelConfig& c, Rng& rng)
    : condition_dim_(c.condition_dim), edge_dim_(c.edge_dim) {
  edge_table_ = Parameter(name + ".edges", randn(rng, kPredicateCount + 1, c.edge_dim));
  Index in = input_dim;
  for (int l = 0; l < c.gcn_layers; ++l) {
    const std::string prefix = name + ".layer" + std::to_string(l);
    triplet_.emplace_back(prefix + ".triplet",
                          std::vector<Index>{2 * in + c.edge_dim, c.gcn_hidden,
                                             2 * c.condition_dim + c.edge_dim},
                          rng);
    aggregate_.emplace_back(prefix + ".aggregate",
                            std::vector<Index>{c.condition_dim, c.gcn_hidden, c.condition_dim}, rng);
    in = c.condition_dim;
  }
}

void TripletGcn::collect(ParameterList& out) {
  out.push_back(&edge_table_);
  for (std::size_t l = 0; l < triplet_.size(); ++l) {
    triplet_[l].collect(out);
    aggregate_[l].collect(out);
  }
}

Var TripletGcn::operator()(Tape& tape, const Var& nodes, const GraphBatch& batch) {
  const Index n = batch.node_count;
  const Index e = batch.edge_count();
  if (nodes.rows() != n) {
    throw DimensionError("TripletGcn: " + std::to_string(nodes.rows()) + " node rows for " +
                         std::to_string(n) + " nodes");
  }

  // Triplet rows: n self triplets first, then the edges.
  std::vector<Index> subject(static_cast<std::size_t>(n + e));
  std::vector<Index> object(static_cast<std::size_t>(n + e));
  std::vector<Index> predicate(static_cast<std::size_t>(n + e));
  std::iota(subject.begin(), subject.begin() + n, Index{0});
  std::iota(object.begin(), object.begin() + n, Index{0});
  std::fill(predicate.begin(), predicate.begin() + n, Index{kPredicateCount});
  std::copy(batch.edge_source.begin(), batch.edge_source.end(), subject.begin() + n);
  std::copy(batch.edge_target.begin(), batch.edge_target.end(), object.begin() + n);
  std::copy(batch.edge_predicate.begin(), batch.edge_predicate.end(), predicate.begin() + n);

  // Own-role outputs: subject output of every triplet, object output of edges.
  std::vector<Index> own_segment(subject);
  own_segment.insert(own_segment.end(), batch.edge_target.begin(), batch.edge_target.end());
  // Neighbour outputs: the other endpoint's output, in both directions.
  std::vector<Index> neighbour_segment(batch.edge_source);
  neighbour_segment.insert(neighbour_segment.end(), batch.edge_target.begin(), batch.edge_target.end());
  Vector has_neighbour = Vector::Zero(n);
  for (const Index s : neighbour_segment) has_neighbour(s) = 1.0;

  Var h = nodes;
  Var tau = gather_rows(tape.parameter(edge_table_), predicate);
  for (std::size_t l = 0; l < triplet_.size(); ++l) {
    const Var parts[] = {gather_rows(h, subject), tau, gather_rows(h, object)};
    const Var out = triplet_[l](tape, hcat(parts));
    const Var gamma_s = slice_cols(out, 0, condition_dim_);
    tau = slice_cols(out, condition_dim_, edge_dim_);
    const Var gamma_o = slice_cols(out, condition_dim_ + edge_dim_, condition_dim_);

    Var next;
    if (e == 0) {
      next = segment_mean(gamma_s, own_segment, n);
    } else {
      const Var edge_s = slice_rows(gamma_s, n, e);
      const Var edge_o = slice_rows(gamma_o, n, e);
      const Var own_parts[] = {gamma_s, edge_o};
      const Var own = segment_mean(vcat(own_parts), own_segment, n);
      const Var neighbour_parts[] = {edge_o, edge_s};
      const Var pooled = segment_mean(vcat(neighbour_parts), neighbour_segment, n);
      next = add(own, scale_rows(aggregate_[l](tape, pooled), has_neighbour));
    }
    h = next;
  }
  return h;
}

ExchangeUnit::ExchangeUnit(Branch branch, const ModelConfig& c, Rng& rng) : branch_(branch), config_(c) {
  validate(c);
  const std::string name = std::string(to_string(branch)) + ".exchange";
  category_table_ = Parameter(name + ".category", randn(rng, kCategoryCount, kCategoryEmbedDim));
  projector_ = Linear(name + ".projector", state_dim(branch), c.projector_dim, rng);
  gcn_ = TripletGcn(name + ".gcn", input_dim(), c, rng);
}

Index ExchangeUnit::input_dim() const {
  return kCategoryEmbedDim + kNodeFeatureDim + config_.projector_dim + config_.time_dim;
}

void ExchangeUnit::collect(ParameterList& out) {
  out.push_back(&category_table_);
  projector_.collect(out);
  gcn_.collect(out);
}

Var ExchangeUnit::project(Tape& tape, const Var& state, std::span<const Index> row_node, Index node_count) {
  if (static_cast<Index>(row_node.size()) != state.rows()) {
    throw DimensionError("ExchangeUnit: row_node has " + std::to_string(row_node.size()) +
                         " entries for " + std::to_string(state.rows()) + " rows");
  }
  return projector_(tape, segment_mean(state, row_node, node_count));
}

Var ExchangeUnit::operator()(Tape& tape, const GraphBatch& batch, const Var& state,
                             std::span<const Index> row_node, const Vector& node_time) {
  if (node_time.size() != batch.node_count) {
    throw DimensionError("ExchangeUnit: node_time has " + std::to_string(node_time.size()) +
                         " entries for " + std::to_string(batch.node_count) + " nodes");
  }
  const Var parts[] = {
      gather_rows(tape.parameter(category_table_), batch.categories),
      tape.constant(batch.modal_features),
      project(tape, state, row_node, batch.node_count),
      tape.constant(time_embedding(node_time, config_.time_dim)),
  };
  return gcn_(tape, hcat(parts), batch);
}

ConditionSet ExchangeUnit::operator()(const GraphBatch& batch, const FlowState& state, const Vector& node_time) {
  if (state.branch != branch_) throw ContractError("ExchangeUnit: state of another branch");
  Tape tape;
  tape.set_grad_enabled(false);
  const Var c = (*this)(tape, batch, tape.constant(state.values), state.row_node, node_time);
  return ConditionSet{c.value()};
}

}  // namespace graphflow
