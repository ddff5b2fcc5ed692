// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/scene_graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "graphflow/errors.hpp"

namespace graphflow {

namespace {

constexpr std::array<std::string_view, kPredicateCount> kPredicateNames = {
    "left-of",      "right-of",    "front-of", "behind",         "smaller-than", "bigger-than",
    "taller-than",  "shorter-than", "close-by", "symmetrical-to", "same-as"};

constexpr std::array<std::string_view, kFamilyCount> kFamilyNames = {
    "left/right", "front/behind", "smaller/larger", "taller/shorter",
    "close-by",   "symmetrical",  "same-as"};

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "bed", "chair", "table", "lamp", "wardrobe", "shelf"};

}  // namespace

Predicate inverse(Predicate p) {
  switch (p) {
    case Predicate::LeftOf: return Predicate::RightOf;
    case Predicate::RightOf: return Predicate::LeftOf;
    case Predicate::FrontOf: return Predicate::Behind;
    case Predicate::Behind: return Predicate::FrontOf;
    case Predicate::SmallerThan: return Predicate::BiggerThan;
    case Predicate::BiggerThan: return Predicate::SmallerThan;
    case Predicate::TallerThan: return Predicate::ShorterThan;
    case Predicate::ShorterThan: return Predicate::TallerThan;
    case Predicate::CloseBy:
    case Predicate::SymmetricalTo:
    case Predicate::SameAs: return p;
  }
  return p;
}

Family family_of(Predicate p) {
  switch (p) {
    case Predicate::LeftOf:
    case Predicate::RightOf: return Family::LeftRight;
    case Predicate::FrontOf:
    case Predicate::Behind: return Family::FrontBehind;
    case Predicate::SmallerThan:
    case Predicate::BiggerThan: return Family::SmallerLarger;
    case Predicate::TallerThan:
    case Predicate::ShorterThan: return Family::TallerShorter;
    case Predicate::CloseBy: return Family::CloseBy;
    case Predicate::SymmetricalTo: return Family::Symmetrical;
    case Predicate::SameAs: return Family::SameAs;
  }
  return Family::SameAs;
}

std::string_view to_string(Predicate p) { return kPredicateNames[static_cast<std::size_t>(p)]; }
std::string_view to_string(Family f) { return kFamilyNames[static_cast<std::size_t>(f)]; }

std::optional<Predicate> parse_predicate(std::string_view s) {
  for (std::size_t i = 0; i < kPredicateNames.size(); ++i) {
    if (kPredicateNames[i] == s) return static_cast<Predicate>(i);
  }
  return std::nullopt;
}

std::string_view category_name(int category) {
  if (category < 0 || category >= kCategoryCount) {
    throw VocabularyError("unknown category id " + std::to_string(category));
  }
  return kCategoryNames[static_cast<std::size_t>(category)];
}

int parse_category(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<int>(i);
  }
  throw VocabularyError("unknown category '" + std::string(name) + "'");
}

std::string_view to_string(Modality m) {
  if (m.text && m.image) return "both";
  if (m.text) return "text";
  if (m.image) return "image";
  return "none";
}

std::optional<Modality> parse_modality(std::string_view s) {
  if (s == "both") return Modality{true, true};
  if (s == "text") return Modality{true, false};
  if (s == "image") return Modality{false, true};
  if (s == "none") return Modality{false, false};
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Embeddings and masking

namespace {

Vector unit_gaussian(std::uint64_t seed, std::uint64_t stream, Index dim) {
  Rng rng(seed, stream);
  Vector v = randn(rng, dim, 1);
  return v / v.norm();
}

}  // namespace

SynthEmbedding synth_embed(int category, int style, std::uint64_t seed) {
  if (category < 0 || category >= kCategoryCount) {
    throw VocabularyError("unknown category id " + std::to_string(category));
  }
  if (style < 0 || style >= kStylesPerCategory) {
    throw VocabularyError("unknown style id " + std::to_string(style) + " for category '" +
                          std::string(category_name(category)) + "'");
  }
  const std::uint64_t text_stream = hash_combine(hash_string("text"), category);
  const std::uint64_t vision_stream =
      hash_combine(hash_combine(hash_string("vision"), category), style);
  return {unit_gaussian(seed, text_stream, kTextDim), unit_gaussian(seed, vision_stream, kVisionDim)};
}

NodeSpec make_node(int category, int style, Modality modality, std::uint64_t seed) {
  const SynthEmbedding e = synth_embed(category, style, seed);
  NodeSpec n;
  n.category = category;
  n.style = style;
  n.modality = modality;
  n.text = modality.text ? e.text : Vector::Zero(kTextDim);
  n.vision = modality.image ? e.vision : Vector::Zero(kVisionDim);
  return n;
}

MultimodalGraph mask_modalities(const MultimodalGraph& g, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw ContractError("mask ratio must lie in [0, 1], got " + std::to_string(ratio));
  }
  MultimodalGraph out = g;
  for (NodeSpec& n : out.nodes) {
    // Two draws per node regardless of which slots are present.
    const bool drop_text = rng.uniform() < ratio;
    const bool drop_image = rng.uniform() < ratio;
    if (drop_text && n.modality.text) {
      n.modality.text = false;
      n.text.setZero();
    }
    if (drop_image && n.modality.image) {
      n.modality.image = false;
      n.vision.setZero();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization and validation

namespace {

using RelationKey = std::tuple<int, int, Family>;

void check_endpoints(const MultimodalGraph& g, const Edge& e) {
  const int n = static_cast<int>(g.nodes.size());
  if (e.source < 0 || e.source >= n || e.target < 0 || e.target >= n) {
    throw ValidationError("edge-index-range: edge (" + std::to_string(e.source) + ", " +
                          std::to_string(e.target) + ") references a node outside [0, " +
                          std::to_string(n) + ")");
  }
  if (e.source == e.target) {
    throw ValidationError("no-self-edge: edge on node " + std::to_string(e.source) +
                          " has source == target");
  }
}

std::string describe(const Edge& e) {
  return "(" + std::to_string(e.source) + ", " + std::to_string(e.target) + ", " +
         std::string(to_string(e.predicate)) + ")";
}

void insert_relation(std::map<RelationKey, Predicate>& rel, const Edge& e) {
  const RelationKey key{e.source, e.target, family_of(e.predicate)};
  auto [it, inserted] = rel.emplace(key, e.predicate);
  if (!inserted && it->second != e.predicate) {
    throw ValidationError("one-predicate-per-family: pair (" + std::to_string(e.source) + ", " +
                          std::to_string(e.target) + ") has both " +
                          std::string(to_string(it->second)) + " and " +
                          std::string(to_string(e.predicate)));
  }
}

std::vector<Edge> close_and_sort(const MultimodalGraph& g, std::map<RelationKey, Predicate> rel) {
  const int n = static_cast<int>(g.nodes.size());
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (const auto& [key, p] : rel) {
    if (p != Predicate::SameAs) continue;
    const int a = find(std::get<0>(key));
    const int b = find(std::get<1>(key));
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && find(i) == find(j)) rel[{i, j, Family::SameAs}] = Predicate::SameAs;
    }
  }
  std::vector<Edge> edges;
  edges.reserve(rel.size());
  for (const auto& [key, p] : rel) edges.push_back({std::get<0>(key), std::get<1>(key), p});
  std::sort(edges.begin(), edges.end());
  return edges;
}

std::map<RelationKey, Predicate> relations_with_inverses(const MultimodalGraph& g) {
  std::map<RelationKey, Predicate> rel;
  for (const Edge& e : g.edges) {
    check_endpoints(g, e);
    insert_relation(rel, e);
    insert_relation(rel, {e.target, e.source, inverse(e.predicate)});
  }
  return rel;
}

void check_node(const NodeSpec& n, std::size_t index) {
  const std::string where = "node " + std::to_string(index);
  if (n.category < 0 || n.category >= kCategoryCount) {
    throw ValidationError("category-range: " + where + " has category " +
                          std::to_string(n.category));
  }
  if (n.style < 0 || n.style >= kStylesPerCategory) {
    throw ValidationError("style-range: " + where + " has style " + std::to_string(n.style));
  }
  if (n.text.size() != kTextDim || n.vision.size() != kVisionDim) {
    throw ValidationError("feature-dims: " + where + " has malformed feature slots");
  }
  if (!n.modality.text && !n.text.isZero(0.0)) {
    throw ValidationError("zero-padding: " + where + " has no text modality but nonzero text");
  }
  if (!n.modality.image && !n.vision.isZero(0.0)) {
    throw ValidationError("zero-padding: " + where + " has no image modality but nonzero vision");
  }
}

}  // namespace

void validate(const MultimodalGraph& g) {
  if (g.nodes.empty()) throw ValidationError("non-empty: graph has no nodes");
  for (std::size_t i = 0; i < g.nodes.size(); ++i) check_node(g.nodes[i], i);
  std::map<RelationKey, Predicate> stored;
  for (const Edge& e : g.edges) {
    check_endpoints(g, e);
    insert_relation(stored, e);
  }
  for (const Edge& e : g.edges) {
    const auto it = stored.find({e.target, e.source, family_of(e.predicate)});
    if (it == stored.end() || it->second != inverse(e.predicate)) {
      throw ValidationError("inverse-edge: " + describe(e) + " lacks its inverse");
    }
  }
  if (close_and_sort(g, stored) != g.edges) {
    throw ValidationError("same-as-closure: edges are not closed under same-as or not sorted");
  }
}

MultimodalGraph normalized(MultimodalGraph g) {
  if (g.nodes.empty()) throw ValidationError("non-empty: graph has no nodes");
  g.edges = close_and_sort(g, relations_with_inverses(g));
  validate(g);
  return g;
}

void set_relation(MultimodalGraph& g, int source, int target, Predicate p) {
  const Edge e{source, target, p};
  check_endpoints(g, e);
  const Family f = family_of(p);
  std::erase_if(g.edges, [&](const Edge& x) {
    const bool pair = (x.source == source && x.target == target) ||
                      (x.source == target && x.target == source);
    return pair && family_of(x.predicate) == f;
  });
  g.edges.push_back(e);
  g = normalized(std::move(g));
}

MultimodalGraph change_relationship(const MultimodalGraph& g, const Edge& existing, Predicate p) {
  if (std::find(g.edges.begin(), g.edges.end(), existing) == g.edges.end()) {
    throw ValidationError("dangling-edge: " + describe(existing) + " is not in the graph");
  }
  MultimodalGraph out = g;
  const Edge inv{existing.target, existing.source, inverse(existing.predicate)};
  std::erase_if(out.edges, [&](const Edge& x) { return x == existing || x == inv; });
  set_relation(out, existing.source, existing.target, p);
  return out;
}

MultimodalGraph add_node(const MultimodalGraph& g, NodeSpec node, const std::vector<Edge>& edges) {
  MultimodalGraph out = g;
  const int index = static_cast<int>(out.nodes.size());
  out.nodes.push_back(std::move(node));
  check_node(out.nodes.back(), out.nodes.size() - 1);
  for (const Edge& e : edges) {
    if (e.source != index && e.target != index) {
      throw ValidationError("dangling-edge: " + describe(e) + " does not touch the new node " +
                            std::to_string(index));
    }
    set_relation(out, e.source, e.target, e.predicate);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

std::string graph_to_json(const MultimodalGraph& g) {
  nlohmann::ordered_json doc;
  doc["nodes"] = nlohmann::ordered_json::array();
  for (const NodeSpec& n : g.nodes) {
    nlohmann::ordered_json node;
    node["category"] = std::string(category_name(n.category));
    node["style"] = n.style;
    node["modality"] = std::string(to_string(n.modality));
    doc["nodes"].push_back(std::move(node));
  }
  doc["edges"] = nlohmann::ordered_json::array();
  for (const Edge& e : g.edges) {
    doc["edges"].push_back({e.source, e.target, std::string(to_string(e.predicate))});
  }
  return doc.dump(1) + "\n";
}

namespace {

std::string line_context(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

}  // namespace

MultimodalGraph graph_from_json(std::string_view text, std::uint64_t embed_seed) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("scene graph JSON, " + line_context(text, e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError("scene graph JSON: top level must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "nodes" && key != "edges") throw ParseError("scene graph JSON: unknown field '" + key + "'");
  }
  MultimodalGraph g;
  const nlohmann::json& nodes = require(doc, "nodes", "scene graph JSON");
  if (!nodes.is_array()) throw ParseError("nodes: expected an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = "nodes[" + std::to_string(i) + "]";
    const nlohmann::json& n = nodes[i];
    const nlohmann::json& cat = require(n, "category", where);
    const nlohmann::json& style = require(n, "style", where);
    if (!cat.is_string()) throw ParseError(where + ".category: expected a string");
    if (!style.is_number_integer()) throw ParseError(where + ".style: expected an integer");
    Modality modality;
    if (n.contains("modality")) {
      const nlohmann::json& m = n.at("modality");
      const auto parsed = m.is_string() ? parse_modality(m.get<std::string>()) : std::nullopt;
      if (!parsed) throw ParseError(where + ".modality: expected text|image|both|none");
      modality = *parsed;
    }
    int category = 0;
    try {
      category = parse_category(cat.get<std::string>());
    } catch (const VocabularyError& e) {
      throw ParseError(where + ".category: " + e.what());
    }
    const int style_id = style.get<int>();
    if (style_id < 0 || style_id >= kStylesPerCategory) {
      throw ParseError(where + ".style: " + std::to_string(style_id) + " is outside [0, " +
                       std::to_string(kStylesPerCategory) + ")");
    }
    g.nodes.push_back(make_node(category, style_id, modality, embed_seed));
  }
  if (doc.contains("edges")) {
    const nlohmann::json& edges = doc.at("edges");
    if (!edges.is_array()) throw ParseError("edges: expected an array");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string where = "edges[" + std::to_string(i) + "]";
      const nlohmann::json& e = edges[i];
      if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() ||
          !e[1].is_number_integer() || !e[2].is_string()) {
        throw ParseError(where + ": expected [source, target, \"predicate\"]");
      }
      const std::string token = e[2].get<std::string>();
      const auto p = parse_predicate(token);
      if (!p) throw ParseError(where + ": unknown predicate '" + token + "'");
      g.edges.push_back({e[0].get<int>(), e[1].get<int>(), *p});
    }
  }
  return normalized(std::move(g));
}

void write_graph(const std::filesystem::path& path, const MultimodalGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << graph_to_json(g);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

MultimodalGraph read_graph(const std::filesystem::path& path, std::uint64_t embed_seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return graph_from_json(buffer.str(), embed_seed);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace graphflow
