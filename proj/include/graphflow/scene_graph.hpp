// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "graphflow/rng.hpp"
#include "graphflow/tensor.hpp"

namespace graphflow {

enum class Predicate : std::uint8_t {
  LeftOf,
  RightOf,
  FrontOf,
  Behind,
  SmallerThan,
  BiggerThan,
  TallerThan,
  ShorterThan,
  CloseBy,
  SymmetricalTo,
  SameAs,
};
inline constexpr int kPredicateCount = 11;

// Relation families; a family holds a predicate and its inverse.
enum class Family : std::uint8_t {
  LeftRight,
  FrontBehind,
  SmallerLarger,
  TallerShorter,
  CloseBy,
  Symmetrical,
  SameAs,
};
inline constexpr int kFamilyCount = 7;
// The six families scored by the constraint report (same-as is scored by
// shape consistency instead).
inline constexpr std::array<Family, 6> kConstraintFamilies = {
    Family::LeftRight, Family::FrontBehind, Family::SmallerLarger,
    Family::TallerShorter, Family::CloseBy, Family::Symmetrical};

Predicate inverse(Predicate p);
Family family_of(Predicate p);
std::string_view to_string(Predicate p);
std::string_view to_string(Family f);
std::optional<Predicate> parse_predicate(std::string_view s);

inline constexpr int kCategoryCount = 6;
inline constexpr int kStylesPerCategory = 4;
std::string_view category_name(int category);
// Throws VocabularyError for unknown names.
int parse_category(std::string_view name);

inline constexpr Index kCategoryEmbedDim = 16;
inline constexpr Index kTextDim = 32;
inline constexpr Index kVisionDim = 32;
inline constexpr Index kNodeFeatureDim = kTextDim + kVisionDim;
inline constexpr std::uint64_t kDefaultEmbedSeed = 0x5EEDF00Dull;

struct Modality {
  bool text = true;
  bool image = true;

  friend bool operator==(const Modality&, const Modality&) = default;
};
// "text" | "image" | "both" | "none"
std::string_view to_string(Modality m);
std::optional<Modality> parse_modality(std::string_view s);

// One object node. `text`/`vision` hold the foundation-feature stand-ins and
// are exactly zero when the corresponding modality is absent. The category
// embedding itself is learned inside each exchange unit and looked up by id.
struct NodeSpec {
  int category = 0;
  int style = 0;
  Modality modality;
  Vector text = Vector::Zero(kTextDim);
  Vector vision = Vector::Zero(kVisionDim);

  friend bool operator==(const NodeSpec& a, const NodeSpec& b) {
    return a.category == b.category && a.style == b.style && a.modality == b.modality &&
           a.text == b.text && a.vision == b.vision;
  }
};

struct Edge {
  int source = 0;
  int target = 0;
  Predicate predicate = Predicate::LeftOf;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Graph with predicate-labelled directed edges. A normalized graph stores
// every relation in both directions, keeps at most one predicate per family
// per ordered pair, closes same-as transitively and sorts its edges.
struct MultimodalGraph {
  std::vector<NodeSpec> nodes;
  std::vector<Edge> edges;

  Index node_count() const { return static_cast<Index>(nodes.size()); }
  friend bool operator==(const MultimodalGraph&, const MultimodalGraph&) = default;
};

struct SynthEmbedding {
  Vector text;
  Vector vision;
};

// Hash-seeded unit vectors: text depends on (category, seed), vision on
// (category, style, seed).
SynthEmbedding synth_embed(int category, int style, std::uint64_t seed = kDefaultEmbedSeed);

// Builds a node with features filled from synth_embed and zeroed per modality.
NodeSpec make_node(int category, int style, Modality modality,
                   std::uint64_t seed = kDefaultEmbedSeed);

// Zeroes each present text / vision slot independently with probability
// `ratio`. Category ids are never touched.
MultimodalGraph mask_modalities(const MultimodalGraph& g, double ratio, Rng& rng);

// Throws ValidationError naming the violated rule.
void validate(const MultimodalGraph& g);
// Completes inverse edges, closes same-as, sorts; then validates.
MultimodalGraph normalized(MultimodalGraph g);

// Adds p(source, target) and its inverse, replacing any predicate of the same
// family on that pair. The graph stays normalized.
void set_relation(MultimodalGraph& g, int source, int target, Predicate p);

// Replaces the relation on an existing edge (and its inverse) with `p`.
MultimodalGraph change_relationship(const MultimodalGraph& g, const Edge& existing, Predicate p);
// Appends `node` and the given relations; one endpoint of each edge must be
// the new node's index (g.nodes.size()).
MultimodalGraph add_node(const MultimodalGraph& g, NodeSpec node, const std::vector<Edge>& edges);

// Scene-graph JSON: {"nodes":[{"category":..,"style":..,"modality":..}],
//                    "edges":[[src,dst,"predicate"],...]}
std::string graph_to_json(const MultimodalGraph& g);
MultimodalGraph graph_from_json(std::string_view text,
                                std::uint64_t embed_seed = kDefaultEmbedSeed);
void write_graph(const std::filesystem::path& path, const MultimodalGraph& g);
MultimodalGraph read_graph(const std::filesystem::path& path,
                           std::uint64_t embed_seed = kDefaultEmbedSeed);

}  // namespace graphflow
