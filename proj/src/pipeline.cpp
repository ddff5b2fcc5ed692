// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/pipeline.hpp"

#include "graphflow/errors.hpp"

namespace graphflow {

std::vector<TrainingExample> training_examples(std::span<const SceneSample> samples, Branch branch,
                                               const ShapeCodec* codec) {
  if (branch == Branch::Shape && codec == nullptr) {
    throw ContractError("shape training examples need a pretrained shape codec");
  }
  std::vector<TrainingExample> out;
  out.reserve(samples.size());
  for (const SceneSample& s : samples) {
    switch (branch) {
      case Branch::Layout: out.push_back({s.graph, layout_state(normalize_layout(s.layout))}); break;
      case Branch::Shape: out.push_back({s.graph, shape_state(codec->encode(s.shapes))}); break;
      case Branch::Texture: out.push_back({s.graph, texture_state(s.shapes, s.features)}); break;
    }
  }
  return out;
}

LayoutGenerator model_layouts(FlowModel& model, const SampleConfig& c) {
  if (model.branch() != Branch::Layout) throw ContractError("model_layouts needs a layout model");
  return [&model, c](std::span<const MultimodalGraph> graphs) {
    std::vector<Matrix> out;
    for (const FlowState& s : sample(model, graphs, c)) out.push_back(denormalize_layout(s.values));
    return out;
  };
}

ShapeGenerator model_shapes(FlowModel& model, const ShapeCodec& codec, const SampleConfig& c) {
  if (model.branch() != Branch::Shape) throw ContractError("model_shapes needs a shape model");
  return [&model, &codec, c](std::span<const MultimodalGraph> graphs) {
    std::vector<std::vector<VoxelGrid>> out;
    for (const FlowState& s : sample(model, graphs, c)) {
      std::vector<VoxelGrid> grids;
      for (const ShapeCodec::Decoded& d : codec.decode(s.values)) grids.push_back(d.grid);
      out.push_back(std::move(grids));
    }
    return out;
  };
}

namespace {

Checkpoint codec_checkpoint(const std::string& kind, std::span<Parameter* const> params) {
  Checkpoint c;
  c.fingerprint = codec_fingerprint(kind);
  c.metadata["kind"] = "codec";
  c.metadata["codec"] = kind;
  store_parameters(c, params);
  return c;
}

void load_codec(const Checkpoint& c, const std::string& kind, std::span<Parameter* const> params) {
  check_metadata(c, "kind", "codec");
  check_metadata(c, "codec", kind);
  check_fingerprint(c, codec_fingerprint(kind), false);
  load_parameters(c, params);
}

}  // namespace

Checkpoint codec_checkpoint(ShapeCodec& codec) { return codec_checkpoint("shape", codec.parameters()); }
Checkpoint codec_checkpoint(TextureCodec& codec) { return codec_checkpoint("texture", codec.parameters()); }
void load_codec(const Checkpoint& c, ShapeCodec& codec) { load_codec(c, "shape", codec.parameters()); }
void load_codec(const Checkpoint& c, TextureCodec& codec) { load_codec(c, "texture", codec.parameters()); }

Checkpoint model_checkpoint(FlowModel& model) {
  Checkpoint c;
  c.fingerprint = model_fingerprint(model.config(), model.branch());
  c.metadata["kind"] = "flow";
  c.metadata["branch"] = std::string(to_string(model.branch()));
  c.metadata["model"] = model_config_json(model.config());
  store_parameters(c, model.parameters());
  return c;
}

std::unique_ptr<FlowModel> load_model(const Checkpoint& c, Branch branch, const ModelConfig* expected, bool force) {
  check_metadata(c, "kind", "flow");
  check_metadata(c, "branch", std::string(to_string(branch)));
  ModelConfig architecture;
  if (expected != nullptr) {
    check_fingerprint(c, model_fingerprint(*expected, branch), force);
    architecture = *expected;
  } else {
    const auto it = c.metadata.find("model");
    if (it == c.metadata.end()) throw ValidationError("checkpoint does not record its model configuration");
    architecture = parse_model_config(it->second);
    check_fingerprint(c, model_fingerprint(architecture, branch), force);
  }
  auto model = std::make_unique<FlowModel>(branch, architecture, 0);
  load_parameters(c, model->parameters());
  return model;
}

double reconstruction_iou(const ShapeCodec& codec, std::span<const VoxelGrid> grids) {
  if (grids.empty()) return 1.0;
  const std::vector<ShapeCodec::Decoded> decoded = codec.decode(codec.encode(grids));
  double total = 0.0;
  for (std::size_t i = 0; i < grids.size(); ++i) total += iou(grids[i], decoded[i].grid);
  return total / static_cast<double>(grids.size());
}

}  // namespace graphflow
