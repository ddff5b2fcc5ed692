// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/flow.hpp"

#include <cmath>

#include "graphflow/errors.hpp"

namespace graphflow {

namespace {

Index denoiser_input_dim(Branch b, const ModelConfig& c) {
  return state_dim(b) + c.condition_dim + c.time_dim + (b == Branch::Texture ? 3 : 0);
}

}  // namespace

Denoiser::Denoiser(Branch branch, const ModelConfig& c, Rng& rng) : branch_(branch), config_(c) {
  const std::string name = std::string(to_string(branch)) + ".denoiser";
  Index in = denoiser_input_dim(branch, c);
  for (int l = 0; l < c.denoiser_depth; ++l) {
    const Index out = l + 1 == c.denoiser_depth ? state_dim(branch) : c.denoiser_hidden;
    layers_.emplace_back(name + "." + std::to_string(l), in, out, rng);
    in = out;
  }
  if (c.node_attention) {
    query_ = Linear(name + ".attention.query", c.denoiser_hidden, c.attention_dim, rng);
    key_ = Linear(name + ".attention.key", c.denoiser_hidden, c.attention_dim, rng);
    value_ = Linear(name + ".attention.value", c.denoiser_hidden, c.attention_dim, rng);
    attention_out_ = Linear(name + ".attention.out", c.attention_dim, c.denoiser_hidden, rng);
  }
}

void Denoiser::collect(ParameterList& out) {
  for (Linear& l : layers_) l.collect(out);
  if (config_.node_attention) {
    query_.collect(out);
    key_.collect(out);
    value_.collect(out);
    attention_out_.collect(out);
  }
}

Var Denoiser::operator()(Tape& tape, const Var& state, const Var& condition, const Vector& row_time,
                         const Matrix& positions, std::span<const Index> row_scene) {
  std::vector<Var> inputs = {state, condition, tape.constant(time_embedding(row_time, config_.time_dim))};
  if (branch_ == Branch::Texture) inputs.push_back(tape.constant(positions));
  Var h = hcat(inputs);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l](tape, h);
    if (l + 1 == layers_.size()) break;
    h = gelu(h);
    if (l == 0 && config_.node_attention) {
      const Index rows = h.rows();
      Matrix mask(rows, rows);
      for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < rows; ++j) {
          mask(i, j) = row_scene[static_cast<std::size_t>(i)] == row_scene[static_cast<std::size_t>(j)] ? 0.0 : -1e9;
        }
      }
      const Var scores = scale(matmul(query_(tape, h), transpose(key_(tape, h))),
                               1.0 / std::sqrt(static_cast<double>(config_.attention_dim)));
      const Var weights = softmax_rows(add(scores, tape.constant(std::move(mask))));
      h = add(h, attention_out_(tape, matmul(weights, value_(tape, h))));
    }
  }
  return h;
}

FlowModel::FlowModel(Branch branch, const ModelConfig& c, std::uint64_t seed) : branch_(branch), config_(c) {
  validate(c);
  Rng rng(seed, hash_string(to_string(branch)));
  exchange_ = ExchangeUnit(branch, c, rng);
  denoiser_ = Denoiser(branch, c, rng);
  exchange_.collect(parameters_);
  denoiser_.collect(parameters_);
}

Var FlowModel::velocity(Tape& tape, const GraphBatch& batch, const FlowState& structure, const Var& state,
                        const Vector& node_time, const Vector& keep) {
  if (structure.branch != branch_) throw ContractError("FlowModel: state of another branch");
  if (structure.node_count != batch.node_count || keep.size() != batch.node_count) {
    throw DimensionError("FlowModel: state, batch and keep disagree on the node count");
  }
  Var condition;
  if (keep.isZero()) {
    condition = tape.constant(Matrix::Zero(batch.node_count, config_.condition_dim));
  } else {
    condition = exchange_(tape, batch, state, structure.row_node, node_time);
    if (!(keep.array() == 1.0).all()) condition = scale_rows(condition, keep);
  }

  const Index rows = state.rows();
  Vector row_time(rows);
  std::vector<Index> row_scene(static_cast<std::size_t>(rows));
  Matrix positions;
  if (branch_ == Branch::Texture) positions.resize(rows, 3);
  for (Index r = 0; r < rows; ++r) {
    const Index node = structure.row_node[static_cast<std::size_t>(r)];
    row_time(r) = node_time(node);
    row_scene[static_cast<std::size_t>(r)] = batch.node_scene[static_cast<std::size_t>(node)];
    if (branch_ == Branch::Texture) {
      positions.row(r) = VoxelGrid::center(structure.voxels[static_cast<std::size_t>(r)]).transpose();
    }
  }
  return denoiser_(tape, state, gather_rows(condition, structure.row_node), row_time, positions, row_scene);
}

Matrix FlowModel::velocity(const GraphBatch& batch, const FlowState& state, double t, bool conditional) {
  Tape tape;
  tape.set_grad_enabled(false);
  const Vector node_time = Vector::Constant(batch.node_count, t);
  const Vector keep = Vector::Constant(batch.node_count, conditional ? 1.0 : 0.0);
  return velocity(tape, batch, state, tape.constant(state.values), node_time, keep).value();
}

double time_from_normal(double z) {
  const double x = std::exp(1.0 + z);
  return x / (1.0 + x);
}

double sample_time(Rng& rng) { return time_from_normal(rng.normal()); }

FlowState interpolate(const FlowState& d0, const FlowState& d1, double t) {
  if (!d0.same_geometry(d1) || d0.values.cols() != d1.values.cols()) {
    throw DimensionError("interpolate: endpoint states differ in structure");
  }
  FlowState out = d0;
  out.values = (1.0 - t) * d0.values + t * d1.values;
  out.t = t;
  return out;
}

Matrix velocity_target(const FlowState& d0, const FlowState& d1) {
  if (!d0.same_geometry(d1) || d0.values.cols() != d1.values.cols()) {
    throw DimensionError("velocity_target: endpoint states differ in structure");
  }
  return d1.values - d0.values;
}

void validate(const TrainConfig& c) {
  if (c.steps < 0) throw ContractError("train.steps must be non-negative");
  if (c.batch_size <= 0) throw ContractError("train.batch_size must be positive");
  if (!(c.learning_rate > 0)) throw ContractError("train.learning_rate must be positive");
  if (c.decay_fractions.size() != c.decay_factors.size()) {
    throw ContractError("train.decay_fractions and train.decay_factors differ in length");
  }
  if (c.weight_decay < 0) throw ContractError("train.weight_decay must be non-negative");
  if (c.mask_ratio < 0 || c.mask_ratio > 1) throw ContractError("train.mask_ratio must be in [0, 1]");
  if (c.condition_dropout < 0 || c.condition_dropout > 1) {
    throw ContractError("train.condition_dropout must be in [0, 1]");
  }
}

double learning_rate_at(const TrainConfig& c, std::int64_t step) {
  double lr = c.learning_rate;
  const double total = static_cast<double>(c.steps);
  for (std::size_t k = 0; k < c.decay_fractions.size(); ++k) {
    if (static_cast<double>(step) >= c.decay_fractions[k] * total) lr = c.learning_rate * c.decay_factors[k];
  }
  return lr;
}

FlowDraw draw_flow(std::span<const TrainingExample* const> examples, const TrainConfig& c, const Rng& rng) {
  if (examples.empty()) throw ContractError("draw_flow: empty batch");
  std::vector<MultimodalGraph> graphs;
  std::vector<FlowState> data;
  std::vector<Matrix> noise;
  std::vector<double> times;
  std::vector<double> keeps;
  for (std::size_t k = 0; k < examples.size(); ++k) {
    const TrainingExample& ex = *examples[k];
    if (ex.data.node_count != ex.graph.node_count()) {
      throw ContractError("draw_flow: example " + std::to_string(k) + " state does not match its graph");
    }
    Rng r = rng.fork(k);
    graphs.push_back(mask_modalities(ex.graph, c.mask_ratio, r));
    times.push_back(sample_time(r));
    keeps.push_back(r.bernoulli(c.condition_dropout) ? 0.0 : 1.0);
    noise.push_back(randn(r, ex.data.rows(), ex.data.values.cols()));
    data.push_back(ex.data);
  }

  std::vector<const MultimodalGraph*> pointers;
  for (const MultimodalGraph& g : graphs) pointers.push_back(&g);
  FlowDraw draw;
  draw.batch = make_batch(pointers);
  const FlowState d0 = concat_states(data);
  draw.node_time.resize(draw.batch.node_count);
  draw.keep.resize(draw.batch.node_count);
  for (Index i = 0; i < draw.batch.node_count; ++i) {
    const auto scene = static_cast<std::size_t>(draw.batch.node_scene[static_cast<std::size_t>(i)]);
    draw.node_time(i) = times[scene];
    draw.keep(i) = keeps[scene];
  }
  Matrix d1(d0.rows(), d0.values.cols());
  Index at = 0;
  for (const Matrix& n : noise) {
    d1.middleRows(at, n.rows()) = n;
    at += n.rows();
  }
  draw.noisy = d0;
  for (Index r = 0; r < d0.rows(); ++r) {
    const double t = draw.node_time(d0.row_node[static_cast<std::size_t>(r)]);
    draw.noisy.values.row(r) = (1.0 - t) * d0.values.row(r) + t * d1.row(r);
  }
  draw.target = d1 - d0.values;
  return draw;
}

Var grf_loss(Tape& tape, const FlowDraw& draw, const VelocityPredictor& predictor) {
  const Var prediction = predictor(tape, draw, tape.constant(draw.noisy.values));
  if (prediction.rows() != draw.target.rows() || prediction.cols() != draw.target.cols()) {
    throw DimensionError("grf_loss: prediction " + shape_string(prediction.value()) + " vs target " +
                         shape_string(draw.target));
  }
  return mse(prediction, tape.constant(draw.target));
}

Var grf_loss(Tape& tape, FlowModel& model, const FlowDraw& draw) {
  return grf_loss(tape, draw, [&model](Tape& tp, const FlowDraw& d, const Var& noisy) {
    return model.velocity(tp, d.batch, d.noisy, noisy, d.node_time, d.keep);
  });
}

FlowTrainer::FlowTrainer(FlowModel& model, std::vector<TrainingExample> data, TrainConfig c)
    : model_(model), data_(std::move(data)), config_(std::move(c)) {
  validate(config_);
  if (data_.empty()) throw ContractError("FlowTrainer: no training examples");
  for (const TrainingExample& ex : data_) {
    if (ex.data.branch != model_.branch()) throw ContractError("FlowTrainer: example of another branch");
  }
  AdamWConfig opt;
  opt.learning_rate = config_.learning_rate;
  opt.weight_decay = config_.weight_decay;
  optimizer_ = AdamW(opt);
}

Rng FlowTrainer::step_rng(std::int64_t step) const {
  return Rng(config_.seed, static_cast<std::uint64_t>(step));
}

double FlowTrainer::step() {
  const std::int64_t index = steps_done();
  const Rng rng = step_rng(index);
  Rng pick = rng.fork(hash_string("batch"));
  std::vector<const TrainingExample*> batch;
  for (Index k = 0; k < config_.batch_size; ++k) batch.push_back(&data_[pick.below(data_.size())]);
  const FlowDraw draw = draw_flow(batch, config_, rng.fork(hash_string("draw")));

  Tape tape;
  const Var loss = grf_loss(tape, model_, draw);
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value)) throw TrainingError("non-finite loss", index + 1);
  tape.backward(loss);
  optimizer_.step(model_.parameters(), learning_rate_at(config_, index));
  return value;
}

void FlowTrainer::run(std::int64_t until, const Logger& log, const Saver& save) {
  while (steps_done() < until) {
    const double loss = step();
    const std::int64_t done = steps_done();
    if (log && config_.log_every > 0 && done % config_.log_every == 0) log(done, loss);
    if (save && config_.checkpoint_every > 0 && done % config_.checkpoint_every == 0) save(done);
  }
}

void validate(const SampleConfig& c) {
  if (c.steps <= 0) throw ContractError("sample.steps must be positive");
  if (!std::isfinite(c.guidance)) throw ContractError("sample.guidance must be finite");
  if (c.guidance_start > c.guidance_end) throw ContractError("sample guidance interval is empty");
}

Matrix guided_velocity(const VelocityField& field, const FlowState& state, double t, const SampleConfig& c) {
  const bool guided = t >= c.guidance_start && t <= c.guidance_end;
  if (!guided || c.guidance == 1.0) return field(state, t, true);
  if (c.guidance == 0.0) return field(state, t, false);
  const Matrix cond = field(state, t, true);
  const Matrix null = field(state, t, false);
  return null + c.guidance * (cond - null);
}

FlowState integrate(const VelocityField& field, FlowState start, const SampleConfig& c, const StepObserver& observer) {
  validate(c);
  const double dt = 1.0 / c.steps;
  FlowState state = std::move(start);
  state.t = 1.0;
  for (int k = c.steps - 1; k >= 0; --k) {
    const double t = (k + 1) * dt;
    const Matrix v = guided_velocity(field, state, t, c);
    if (v.rows() != state.values.rows() || v.cols() != state.values.cols()) {
      throw DimensionError("integrate: velocity " + shape_string(v) + " for state " + shape_string(state.values));
    }
    state.values -= dt * v;
    state.t = k * dt;
    if (observer) observer(c.steps - k, state);
  }
  return state;
}

FlowState empty_state(Branch b, const MultimodalGraph& g, std::span<const VoxelGrid> geometry) {
  switch (b) {
    case Branch::Layout: return layout_state(Matrix::Zero(g.node_count(), state_dim(b)));
    case Branch::Shape: return shape_state(Matrix::Zero(g.node_count(), state_dim(b)));
    case Branch::Texture:
      if (static_cast<Index>(geometry.size()) != g.node_count()) {
        throw ContractError("texture sampling needs one voxel grid per node, got " +
                            std::to_string(geometry.size()) + " for " + std::to_string(g.node_count()));
      }
      return texture_geometry(geometry);
  }
  throw ContractError("unknown branch");
}

std::vector<FlowState> sample(FlowModel& model, std::span<const MultimodalGraph> graphs, const SampleConfig& c,
                              std::span<const std::vector<VoxelGrid>> geometry, std::uint64_t first_index,
                              const StepObserver& observer) {
  validate(c);
  if (graphs.empty()) return {};
  if (model.branch() == Branch::Texture && geometry.size() != graphs.size()) {
    throw ContractError("texture sampling needs geometry for every graph");
  }
  std::vector<FlowState> parts;
  std::vector<Index> counts;
  std::vector<const MultimodalGraph*> pointers;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    std::span<const VoxelGrid> grids;
    if (model.branch() == Branch::Texture) grids = geometry[k];
    FlowState s = empty_state(model.branch(), graphs[k], grids);
    Rng rng(c.seed, first_index + k);
    s.values = randn(rng, s.rows(), s.values.cols());
    parts.push_back(std::move(s));
    counts.push_back(graphs[k].node_count());
    pointers.push_back(&graphs[k]);
  }
  const GraphBatch batch = make_batch(pointers);
  const VelocityField field = [&](const FlowState& state, double t, bool conditional) {
    return model.velocity(batch, state, t, conditional);
  };
  return split_state(integrate(field, concat_states(parts), c, observer), counts);
}

}  // namespace graphflow
