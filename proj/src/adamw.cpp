// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/adamw.hpp"

#include <cmath>

#include "graphflow/errors.hpp"

namespace graphflow {

void AdamW::step(std::span<Parameter* const> params, double learning_rate) {
  const std::int64_t next = step_count_ + 1;
  for (const Parameter* p : params) {
    if (p->grad.size() != 0 && !p->grad.allFinite()) {
      throw TrainingError("non-finite gradient in parameter '" + p->name + "'", next);
    }
  }
  step_count_ = next;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(next));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(next));
  for (Parameter* p : params) {
    if (p->grad.size() == 0) p->zero_grad();
    auto [it, inserted] = moments_.try_emplace(p->name);
    Moments& m = it->second;
    if (inserted) {
      m.first = Matrix::Zero(p->value.rows(), p->value.cols());
      m.second = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    m.first = b1 * m.first + (1.0 - b1) * p->grad;
    m.second = b2 * m.second + (1.0 - b2) * p->grad.cwiseAbs2();
    p->value *= 1.0 - learning_rate * config_.weight_decay;
    p->value.array() -= learning_rate * (m.first.array() / correction1) /
                        ((m.second.array() / correction2).sqrt() + config_.epsilon);
    p->zero_grad();
  }
}

void AdamW::restore(std::int64_t step_count, std::map<std::string, Moments> moments) {
  step_count_ = step_count;
  moments_ = std::move(moments);
}

}  // namespace graphflow
