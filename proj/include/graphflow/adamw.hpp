// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "graphflow/tensor.hpp"

namespace graphflow {

struct AdamWConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled-weight-decay Adam. Moments are keyed by parameter name.
class AdamW {
 public:
  struct Moments {
    Matrix first;
    Matrix second;
  };

  AdamW() = default;
  explicit AdamW(AdamWConfig config) : config_(config) {}

  // Applies one update with the given learning rate, then clears the grads.
  // Throws TrainingError (carrying the step index) if any gradient is
  // non-finite; parameters are left untouched in that case.
  void step(std::span<Parameter* const> params, double learning_rate);
  void step(std::span<Parameter* const> params) { step(params, config_.learning_rate); }

  const AdamWConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_count_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }

  // Restores state loaded from a checkpoint.
  void restore(std::int64_t step_count, std::map<std::string, Moments> moments);

 private:
  AdamWConfig config_;
  std::int64_t step_count_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace graphflow
