// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "graphflow/branches.hpp"
#include "graphflow/constraints.hpp"
#include "graphflow/exchange.hpp"
#include "graphflow/flow.hpp"
#include "graphflow/oracle.hpp"

namespace graphflow {

// Every setting of a run. The JSON form has one object per section:
// oracle, thresholds, model, train, sample, shape_codec, texture_codec.
// Missing keys keep their defaults; unknown keys are rejected.
struct RunConfig {
  OracleConfig oracle;
  ConstraintThresholds thresholds;
  ModelConfig model;
  TrainConfig train;
  SampleConfig sample;
  CodecTrainConfig shape_codec;
  CodecTrainConfig texture_codec;
};

RunConfig default_config();
// Throws ParseError on malformed JSON, unknown keys or wrong value types and
// ContractError on out-of-range values.
RunConfig parse_config(std::string_view json);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& c);

// The model section alone, as stored in checkpoint metadata.
std::string model_config_json(const ModelConfig& c);
ModelConfig parse_model_config(std::string_view json);

// Hash of the model section and the branch; stored in flow checkpoints.
std::uint64_t model_fingerprint(const ModelConfig& c, Branch branch);
// Architecture tag of a codec ("shape" or "texture"); stored in codec checkpoints.
std::uint64_t codec_fingerprint(std::string_view kind);

}  // namespace graphflow
