// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

// Glue between datasets, models, codecs and checkpoints used by the command
// line tool and the end-to-end tests.

#pragma once

#include <memory>
#include <span>
#include <vector>

#include "graphflow/branches.hpp"
#include "graphflow/checkpoint.hpp"
#include "graphflow/config.hpp"
#include "graphflow/evaluation.hpp"
#include "graphflow/flow.hpp"
#include "graphflow/oracle.hpp"

namespace graphflow {

// Data states per sample: normalized layout rows, encoded shapes, or oracle
// features.
std::vector<TrainingExample> training_examples(std::span<const SceneSample> samples, Branch branch,
                                               const ShapeCodec* codec = nullptr);

// Samples are mapped back through denormalize_layout.
LayoutGenerator model_layouts(FlowModel& model, const SampleConfig& c);
ShapeGenerator model_shapes(FlowModel& model, const ShapeCodec& codec, const SampleConfig& c);

Checkpoint codec_checkpoint(ShapeCodec& codec);
Checkpoint codec_checkpoint(TextureCodec& codec);
// Throw ValidationError if the checkpoint holds something else.
void load_codec(const Checkpoint& c, ShapeCodec& codec);
void load_codec(const Checkpoint& c, TextureCodec& codec);

// Flow checkpoint without optimizer state, e.g. for sampling.
Checkpoint model_checkpoint(FlowModel& model);
// Builds the model described by the checkpoint and loads its weights.
// With `expected` set, the architecture comes from it and the fingerprint
// must match unless `force`.
std::unique_ptr<FlowModel> load_model(const Checkpoint& c, Branch branch, const ModelConfig* expected = nullptr,
                                      bool force = false);

// Mean IoU of thresholded reconstructions.
double reconstruction_iou(const ShapeCodec& codec, std::span<const VoxelGrid> grids);

}  // namespace graphflow
