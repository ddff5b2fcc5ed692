// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

// GFCK checkpoint files: "GFCK", u32 version, u64 fingerprint, a string
// metadata table, named tensors, optimizer moments, RNG state and the step
// counter. Little-endian throughout.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "graphflow/adamw.hpp"
#include "graphflow/nn.hpp"
#include "graphflow/rng.hpp"

namespace graphflow {

class FlowTrainer;

struct Checkpoint {
  std::uint64_t fingerprint = 0;
  std::map<std::string, std::string> metadata;
  std::map<std::string, Matrix> tensors;
  std::int64_t optimizer_steps = 0;
  std::map<std::string, AdamW::Moments> moments;
  Rng::State rng;
  std::int64_t step = 0;
};

// Bitwise comparison of every field.
bool identical(const Checkpoint& a, const Checkpoint& b);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws ValidationError when the fingerprints differ, unless force is set.
void check_fingerprint(const Checkpoint& c, std::uint64_t expected, bool force);
// Throws ValidationError unless metadata[key] == value.
void check_metadata(const Checkpoint& c, const std::string& key, const std::string& value);

void store_parameters(Checkpoint& c, std::span<Parameter* const> params);
// Names and shapes must match exactly; throws ValidationError otherwise.
void load_parameters(const Checkpoint& c, std::span<Parameter* const> params);

// Full training state: parameters, optimizer, RNG of the next step, step count.
Checkpoint training_checkpoint(FlowTrainer& trainer, std::uint64_t fingerprint);
void resume_training(FlowTrainer& trainer, const Checkpoint& c);

}  // namespace graphflow
