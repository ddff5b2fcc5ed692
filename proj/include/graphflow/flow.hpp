// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

// Rectified-flow training and Euler sampling for one branch.
//
// Data sits at t = 0 and Gaussian noise at t = 1; the model predicts the
// constant velocity d1 - d0 of the straight path between them.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "graphflow/adamw.hpp"
#include "graphflow/exchange.hpp"
#include "graphflow/nn.hpp"
#include "graphflow/state.hpp"

namespace graphflow {

// Per-row MLP over [state | condition | time features (| voxel centre)].
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(Branch branch, const ModelConfig& c, Rng& rng);

  // row_scene groups rows for the optional attention block.
  Var operator()(Tape& tape, const Var& state, const Var& condition, const Vector& row_time,
                 const Matrix& positions, std::span<const Index> row_scene);
  void collect(ParameterList& out);

 private:
  Branch branch_ = Branch::Layout;
  ModelConfig config_;
  std::vector<Linear> layers_;
  Linear query_, key_, value_, attention_out_;
};

class FlowModel {
 public:
  FlowModel(Branch branch, const ModelConfig& c, std::uint64_t seed);
  FlowModel(const FlowModel&) = delete;
  FlowModel& operator=(const FlowModel&) = delete;

  Branch branch() const { return branch_; }
  const ModelConfig& config() const { return config_; }

  // keep[i] = 1 uses node i's condition vector, 0 replaces it with zeros.
  Var velocity(Tape& tape, const GraphBatch& batch, const FlowState& structure, const Var& state,
               const Vector& node_time, const Vector& keep);
  Matrix velocity(const GraphBatch& batch, const FlowState& state, double t, bool conditional);

  ExchangeUnit& exchange() { return exchange_; }
  const ParameterList& parameters() { return parameters_; }

 private:
  Branch branch_;
  ModelConfig config_;
  ExchangeUnit exchange_;
  Denoiser denoiser_;
  ParameterList parameters_;
};

// t = x / (1 + x) with x = exp(1 + z), z standard normal.
double time_from_normal(double z);
double sample_time(Rng& rng);
// (1 - t) d0 + t d1; both states must share structure.
FlowState interpolate(const FlowState& d0, const FlowState& d1, double t);
Matrix velocity_target(const FlowState& d0, const FlowState& d1);

struct TrainConfig {
  std::int64_t steps = 2000;
  Index batch_size = 16;
  double learning_rate = 1e-4;
  // Learning rate is multiplied by decay_factors[k] once decay_fractions[k]
  // of the steps are done.
  std::vector<double> decay_fractions = {0.35, 0.7};
  std::vector<double> decay_factors = {0.5, 0.1};
  double weight_decay = 0.01;
  double mask_ratio = 0.2;
  double condition_dropout = 0.1;
  std::uint64_t seed = 0;
  std::int64_t log_every = 50;
  std::int64_t checkpoint_every = 500;
};

void validate(const TrainConfig& c);
// Learning rate for 0-based step index `step`.
double learning_rate_at(const TrainConfig& c, std::int64_t step);

struct TrainingExample {
  MultimodalGraph graph;
  FlowState data;
};

// One noised minibatch.
struct FlowDraw {
  GraphBatch batch;
  FlowState noisy;
  Vector node_time;
  Vector keep;
  Matrix target;
};

// Example k of the batch draws masking, t, dropout and noise from rng.fork(k).
FlowDraw draw_flow(std::span<const TrainingExample* const> examples, const TrainConfig& c, const Rng& rng);

using VelocityPredictor = std::function<Var(Tape&, const FlowDraw&, const Var& noisy)>;
// Mean squared error against d1 - d0 over all rows and dims.
Var grf_loss(Tape& tape, const FlowDraw& draw, const VelocityPredictor& predictor);
Var grf_loss(Tape& tape, FlowModel& model, const FlowDraw& draw);

class FlowTrainer {
 public:
  FlowTrainer(FlowModel& model, std::vector<TrainingExample> data, TrainConfig c);

  // Runs one optimizer step and returns its loss. Step k draws everything
  // from Rng(seed, k), so resuming from a checkpoint is exact.
  double step();
  using Logger = std::function<void(std::int64_t step, double loss)>;
  using Saver = std::function<void(std::int64_t step)>;
  // Steps until `until` steps are done. log is called every log_every steps,
  // save every checkpoint_every steps.
  void run(std::int64_t until, const Logger& log = {}, const Saver& save = {});

  std::int64_t steps_done() const { return optimizer_.step_count(); }
  AdamW& optimizer() { return optimizer_; }
  FlowModel& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  Rng step_rng(std::int64_t step) const;

 private:
  FlowModel& model_;
  std::vector<TrainingExample> data_;
  TrainConfig config_;
  AdamW optimizer_;
};

struct SampleConfig {
  int steps = 25;
  double guidance = 5.0;
  // Guidance applies for t in [guidance_start, guidance_end]; outside it the
  // conditional velocity is used alone.
  double guidance_start = 0.0;
  double guidance_end = 1.0;
  std::uint64_t seed = 0;
};

void validate(const SampleConfig& c);

using VelocityField = std::function<Matrix(const FlowState& state, double t, bool conditional)>;
using StepObserver = std::function<void(int step, const FlowState& state)>;

// v_null + w (v_cond - v_null), with w = 1 and w = 0 evaluating one branch only.
Matrix guided_velocity(const VelocityField& field, const FlowState& state, double t, const SampleConfig& c);
// Euler steps from t = 1 to t = 0. The observer sees the state after each step.
FlowState integrate(const VelocityField& field, FlowState start, const SampleConfig& c,
                    const StepObserver& observer = {});

// Structure (zero values) of the state for one graph.
FlowState empty_state(Branch b, const MultimodalGraph& g, std::span<const VoxelGrid> geometry = {});

// Samples one branch for several graphs at once. Graph k starts from noise
// drawn with Rng(c.seed, first_index + k). Texture needs geometry per graph.
std::vector<FlowState> sample(FlowModel& model, std::span<const MultimodalGraph> graphs,
                              const SampleConfig& c,
                              std::span<const std::vector<VoxelGrid>> geometry = {},
                              std::uint64_t first_index = 0, const StepObserver& observer = {});

}  // namespace graphflow
