// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "graphflow/nn.hpp"
#include "graphflow/oracle.hpp"
#include "graphflow/state.hpp"
#include "graphflow/voxel.hpp"

namespace graphflow {

inline constexpr double kMinHalfExtent = 0.02;

// Layout rows [t(3) | s(3) | cos | sin] after clamping t to [-1, 1], s to
// [0.02, 1] and normalizing the rotation pair.
struct DecodedLayout {
  Matrix rows;
  Vector yaw;

  Index node_count() const { return rows.rows(); }
};

DecodedLayout decode_layout(const Matrix& raw);

// Fixed per-column centre and scale of oracle layouts. The layout branch is
// trained on (row - centre) / scale so every column is about unit variance.
inline constexpr std::array<double, 8> kLayoutCentre = {0.0, -0.74, 0.0, 0.18, 0.26, 0.14, 0.0, 0.0};
inline constexpr std::array<double, 8> kLayoutScale = {0.5, 0.11, 0.5, 0.09, 0.11, 0.1, 0.7, 0.7};

Matrix normalize_layout(const Matrix& layout);
Matrix denormalize_layout(const Matrix& normalized);

struct CodecTrainConfig {
  int steps = 3000;
  Index batch_size = 32;
  double learning_rate = 3e-3;
  std::uint64_t seed = 0;
};

void validate(const CodecTrainConfig& c);

// Prototype motifs, a few perturbations of each, the empty grid and the full cube.
std::vector<VoxelGrid> shape_library(int perturbations_per_prototype = 4, std::uint64_t seed = 0);

// Voxel autoencoder: 512 -> 128 -> 16 (tanh) and back to 512 logits.
class ShapeCodec {
 public:
  explicit ShapeCodec(std::uint64_t seed = 0);
  ShapeCodec(const ShapeCodec&) = delete;
  ShapeCodec& operator=(const ShapeCodec&) = delete;

  Vector encode(const VoxelGrid& grid) const;
  Matrix encode(std::span<const VoxelGrid> grids) const;
  Matrix decode_logits(const Matrix& latents) const;

  struct Decoded {
    VoxelGrid grid;
    // Set when no voxel survives thresholding.
    bool degenerate = false;
  };
  std::vector<Decoded> decode(const Matrix& latents) const;

  // Reconstruction training with binary cross-entropy; returns the last loss.
  double pretrain(std::span<const VoxelGrid> library, const CodecTrainConfig& c);

  const ParameterList& parameters() { return parameters_; }
  std::uint64_t checksum() const;

 private:
  Var encode(Tape& tape, const Var& occupancy) const;
  Var decode(Tape& tape, const Var& latents) const;

  mutable Mlp encoder_;
  mutable Mlp decoder_;
  ParameterList parameters_;
};

// Training pairs for the texture decoder: oracle voxel features and the
// color of their (category, style).
struct TexturePairs {
  Matrix features;
  Matrix colors;
};

TexturePairs texture_pairs(std::uint64_t embed_seed = kDefaultEmbedSeed);

// Per-voxel color decoder: 8 -> 64 -> 64 -> 3 with a sigmoid output.
class TextureCodec {
 public:
  explicit TextureCodec(std::uint64_t seed = 0);
  TextureCodec(const TextureCodec&) = delete;
  TextureCodec& operator=(const TextureCodec&) = delete;

  Matrix decode(const Matrix& features) const;
  // features must have one row per active voxel of geometry.
  Matrix decode(const Matrix& features, const VoxelGrid& geometry) const;

  // Mean squared error training; returns the last loss.
  double pretrain(const TexturePairs& pairs, const CodecTrainConfig& c);

  const ParameterList& parameters() { return parameters_; }
  std::uint64_t checksum() const;

 private:
  mutable Mlp decoder_;
  ParameterList parameters_;
};

std::uint64_t parameter_checksum(std::span<Parameter* const> params);

struct AssembledNode {
  int category = -1;
  Vector3 location = Vector3::Zero();
  Vector3 size = Vector3::Ones();
  double yaw = 0.0;
  VoxelGrid grid;
  bool degenerate = false;
  // World-space voxel centers and their colors, one row per active voxel.
  Matrix points;
  Matrix colors;

  friend bool operator==(const AssembledNode&, const AssembledNode&) = default;
};

struct AssembledScene {
  std::vector<AssembledNode> nodes;

  int degenerate_count() const;
  friend bool operator==(const AssembledScene&, const AssembledScene&) = default;
};

inline constexpr double kDefaultGray = 0.5;

// World position of an object-frame point in a box: scale by s, yaw about y,
// translate by t.
Vector3 place_point(const Vector3& local, const Vector3& location, const Vector3& size, double yaw);

// Empty grids become the full cube and are flagged degenerate. With no shapes
// every node gets the full cube. Missing colors default to gray.
AssembledScene assemble(const DecodedLayout& layout, std::span<const VoxelGrid> shapes,
                        std::span<const Matrix> colors);
AssembledScene assemble(const MultimodalGraph& graph, const DecodedLayout& layout,
                        std::span<const VoxelGrid> shapes, std::span<const Matrix> colors);

// GFAS scene file: "GFAS", u32 version, u64 scene count, length-prefixed records.
void write_scenes(const std::filesystem::path& path, std::span<const AssembledScene> scenes);
std::vector<AssembledScene> read_scenes(const std::filesystem::path& path);

}  // namespace graphflow
