// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural indoor scenes with ground-truth layout, voxel shapes and
// per-voxel features. Relations are read off the generated geometry with the
// same rules the evaluator uses, so every emitted edge holds by construction.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "graphflow/constraints.hpp"
#include "graphflow/rng.hpp"
#include "graphflow/scene_graph.hpp"
#include "graphflow/voxel.hpp"

namespace graphflow {

inline constexpr Index kFeatureDim = 8;

struct OracleConfig {
  int min_nodes = 2;
  int max_nodes = 6;
  int style_count = kStylesPerCategory;
  double room_half_extent = 1.0;
  int max_edges_per_node = 3;
  // Probability that a new node copies an earlier node's object (same-as).
  double same_as_probability = 0.3;
  // Probability that a new node is placed as the mirror twin of an earlier one.
  double symmetric_pair_probability = 0.2;
  // Modality draw for oracle nodes; the remainder is image-only.
  double both_modalities_probability = 0.7;
  double text_only_probability = 0.15;
  int max_attempts = 1000;
  std::uint64_t embed_seed = kDefaultEmbedSeed;
  ConstraintThresholds thresholds;
};

// Throws ValidationError on inconsistent settings.
void validate(const OracleConfig& config);

struct SceneSample {
  MultimodalGraph graph;
  Matrix layout;                  // N x 8
  std::vector<VoxelGrid> shapes;  // N
  std::vector<Matrix> features;   // N, each (active voxels) x 8, ascending voxel order

  Index node_count() const { return graph.node_count(); }
  friend bool operator==(const SceneSample&, const SceneSample&) = default;
};

// Hand-authored occupancy motif for (category, style).
const VoxelGrid& prototype(int category, int style);
// Flips at most two boundary voxels of `base`, chosen by `seed`.
VoxelGrid perturb(const VoxelGrid& base, std::uint64_t seed);

// Ground-truth feature of one voxel of a (category, style) object.
Vector voxel_feature(int category, int style, int voxel_index,
                     std::uint64_t embed_seed = kDefaultEmbedSeed);
// Per-active-voxel features of a grid (rows follow ascending voxel index).
Matrix object_features(int category, int style, const VoxelGrid& grid,
                       std::uint64_t embed_seed = kDefaultEmbedSeed);
// Surface color of a (category, style) object, in [0,1]^3.
Vector3 style_color(int category, int style);

// True when edge e holds in the sample: layout rules for spatial predicates,
// identical voxel grids for same-as.
bool relation_holds(const SceneSample& sample, const Edge& e,
                    const ConstraintThresholds& thresholds = {});

// Throws GenerationError when rejection sampling exhausts max_attempts.
SceneSample generate_scene(const OracleConfig& config, Rng& rng);

// Scene `index` of a dataset drawn with `seed`; independent of other scenes.
// Retries with fewer nodes when placement fails.
SceneSample generate_indexed_scene(const OracleConfig& config, std::uint64_t seed,
                                   std::uint64_t index);
std::vector<SceneSample> generate_dataset(const OracleConfig& config, std::uint64_t seed,
                                          std::size_t count, std::uint64_t first_index = 0);

// GFSD dataset file: "GFSD", u32 version, u64 record count, then one
// length-prefixed record per sample. Little-endian throughout.
void write_dataset(const std::filesystem::path& path, std::span<const SceneSample> samples);
std::vector<SceneSample> read_dataset(const std::filesystem::path& path);

}  // namespace graphflow
