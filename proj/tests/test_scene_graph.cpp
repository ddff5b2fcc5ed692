#include "doctest.h"

#include <set>

#include "graphflow/errors.hpp"
#include "graphflow/scene_graph.hpp"
#include "support.hpp"

using namespace graphflow;
using graphflow::testing::random_graph;

namespace {

// Symmetric and transitive over the same-as edges.
bool same_as_is_equivalence(const MultimodalGraph& g) {
  std::set<std::pair<int, int>> rel;
  for (const Edge& e : g.edges) {
    if (e.predicate == Predicate::SameAs) rel.insert({e.source, e.target});
  }
  for (const auto& [a, b] : rel) {
    if (!rel.contains({b, a})) return false;
    for (const auto& [c, d] : rel) {
      if (c == b && d != a && !rel.contains({a, d})) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("predicate inverses and families") {
  for (int k = 0; k < kPredicateCount; ++k) {
    const auto p = static_cast<Predicate>(k);
    CHECK(inverse(inverse(p)) == p);
    CHECK(family_of(inverse(p)) == family_of(p));
    CHECK(parse_predicate(to_string(p)) == p);
  }
  CHECK(inverse(Predicate::LeftOf) == Predicate::RightOf);
  CHECK(inverse(Predicate::SmallerThan) == Predicate::BiggerThan);
  CHECK(inverse(Predicate::CloseBy) == Predicate::CloseBy);
  CHECK_FALSE(parse_predicate("above").has_value());
}

TEST_CASE("category vocabulary") {
  for (int c = 0; c < kCategoryCount; ++c) CHECK(parse_category(category_name(c)) == c);
  CHECK_THROWS_AS(parse_category("spaceship"), VocabularyError);
}

TEST_CASE("graph json round-trips for 500 random graphs") {
  Rng rng(3, 0);
  for (int k = 0; k < 500; ++k) {
    const MultimodalGraph g = random_graph(rng, 1 + static_cast<int>(rng.below(6)), 0.5);
    const MultimodalGraph back = graph_from_json(graph_to_json(g));
    REQUIRE(back == g);
  }
}

TEST_CASE("normalized graphs hold both directions and sorted edges") {
  MultimodalGraph g;
  g.nodes = {make_node(0, 0, {}), make_node(1, 1, {}), make_node(2, 0, {})};
  g.edges = {{0, 1, Predicate::LeftOf}, {1, 2, Predicate::SameAs}, {0, 2, Predicate::SameAs}};
  const MultimodalGraph n = normalized(g);
  CHECK(std::is_sorted(n.edges.begin(), n.edges.end()));
  CHECK(std::find(n.edges.begin(), n.edges.end(), Edge{1, 0, Predicate::RightOf}) != n.edges.end());
  CHECK(std::find(n.edges.begin(), n.edges.end(), Edge{0, 1, Predicate::SameAs}) != n.edges.end());
  CHECK(same_as_is_equivalence(n));
}

TEST_CASE("validation names the violated rule") {
  MultimodalGraph g;
  g.nodes = {make_node(0, 0, {}), make_node(1, 0, {})};
  CHECK_THROWS_WITH_AS(normalized(MultimodalGraph{}), doctest::Contains("non-empty"), ValidationError);

  MultimodalGraph self = g;
  self.edges = {{1, 1, Predicate::CloseBy}};
  CHECK_THROWS_WITH_AS(normalized(self), doctest::Contains("no-self-edge"), ValidationError);

  MultimodalGraph range = g;
  range.edges = {{0, 5, Predicate::CloseBy}};
  CHECK_THROWS_WITH_AS(normalized(range), doctest::Contains("edge-index-range"), ValidationError);

  MultimodalGraph conflict = g;
  conflict.edges = {{0, 1, Predicate::LeftOf}, {0, 1, Predicate::RightOf}};
  CHECK_THROWS_WITH_AS(normalized(conflict), doctest::Contains("one-predicate-per-family"), ValidationError);

  MultimodalGraph padding = g;
  padding.nodes[0].modality.text = false;
  CHECK_THROWS_WITH_AS(validate(padding), doctest::Contains("zero-padding"), ValidationError);

  MultimodalGraph missing = normalized(g);
  missing.edges = {{0, 1, Predicate::LeftOf}};
  CHECK_THROWS_WITH_AS(validate(missing), doctest::Contains("inverse-edge"), ValidationError);
}

TEST_CASE("masking keeps categories and pads with exact zeros") {
  Rng rng(8, 1);
  for (int k = 0; k < 50; ++k) {
    const MultimodalGraph g = random_graph(rng, 5, 0.3);
    const MultimodalGraph m = mask_modalities(g, 0.5, rng);
    REQUIRE(m.nodes.size() == g.nodes.size());
    CHECK(m.edges == g.edges);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      CHECK(m.nodes[i].category == g.nodes[i].category);
      CHECK(m.nodes[i].style == g.nodes[i].style);
      if (!m.nodes[i].modality.text) CHECK(m.nodes[i].text.isZero(0.0));
      if (!m.nodes[i].modality.image) CHECK(m.nodes[i].vision.isZero(0.0));
      if (m.nodes[i].modality.text) CHECK(m.nodes[i].text == g.nodes[i].text);
      if (m.nodes[i].modality.image) CHECK(m.nodes[i].vision == g.nodes[i].vision);
      CHECK((!m.nodes[i].modality.text || g.nodes[i].modality.text));
    }
    CHECK_NOTHROW(validate(m));
  }
}

TEST_CASE("same-as stays an equivalence under edits") {
  Rng rng(12, 0);
  for (int k = 0; k < 200; ++k) {
    MultimodalGraph g = random_graph(rng, 5, 0.6);
    REQUIRE(same_as_is_equivalence(g));
    if (!g.edges.empty()) {
      const Edge e = g.edges[rng.below(g.edges.size())];
      const auto p = static_cast<Predicate>(rng.below(kPredicateCount));
      g = change_relationship(g, e, p);
      CHECK(same_as_is_equivalence(g));
    }
    const int n = static_cast<int>(g.nodes.size());
    g = add_node(g, make_node(1, 2, {}), {{n, static_cast<int>(rng.below(n)), Predicate::SameAs}});
    CHECK(same_as_is_equivalence(g));
    CHECK_NOTHROW(validate(g));
  }
}

TEST_CASE("edits reject dangling edges") {
  MultimodalGraph g;
  g.nodes = {make_node(0, 0, {}), make_node(1, 0, {})};
  g = normalized(g);
  CHECK_THROWS_AS(change_relationship(g, {0, 1, Predicate::LeftOf}, Predicate::RightOf), ValidationError);
  CHECK_THROWS_AS(add_node(g, make_node(2, 0, {}), {{0, 1, Predicate::CloseBy}}), ValidationError);
}

TEST_CASE("json errors name the offending field") {
  CHECK_THROWS_WITH_AS(graph_from_json(R"({"nodes":[{"category":"bed","style":0,"modality":"smell"}]})"),
                       doctest::Contains("modality"), ParseError);
  CHECK_THROWS_WITH_AS(graph_from_json(R"({"nodes":[{"category":"sofa","style":0}]})"),
                       doctest::Contains("category"), ParseError);
  CHECK_THROWS_AS(graph_from_json(R"({"nodes":[],"extra":1})"), ParseError);
  CHECK_THROWS_AS(graph_from_json("{"), ParseError);
}

TEST_CASE("synthetic embeddings are unit vectors and deterministic") {
  const SynthEmbedding a = synth_embed(2, 1);
  const SynthEmbedding b = synth_embed(2, 1);
  CHECK(a.text == b.text);
  CHECK(a.vision == b.vision);
  CHECK(std::abs(a.text.norm() - 1.0) < 1e-12);
  CHECK(std::abs(a.vision.norm() - 1.0) < 1e-12);
  CHECK(synth_embed(2, 2).text == a.text);
  CHECK(synth_embed(2, 2).vision != a.vision);
}
