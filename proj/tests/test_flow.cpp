#include "doctest.h"

#include <cstring>
#include <limits>

#include "graphflow/errors.hpp"
#include "graphflow/flow.hpp"
#include "graphflow/oracle.hpp"
#include "graphflow/pipeline.hpp"
#include "support.hpp"

using namespace graphflow;
using graphflow::testing::param_grad_check;
using graphflow::testing::random_graph;
using graphflow::testing::random_matrix;

namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.gcn_layers = 2;
  c.gcn_hidden = 16;
  c.edge_dim = 4;
  c.condition_dim = 8;
  c.projector_dim = 6;
  c.time_dim = 6;
  c.denoiser_hidden = 16;
  c.denoiser_depth = 3;
  return c;
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

std::vector<TrainingExample> small_data(Branch branch, std::size_t n, const ShapeCodec* codec = nullptr) {
  return training_examples(generate_dataset(OracleConfig{}, 31, n), branch, codec);
}

// States for every branch over the same random scene.
std::vector<FlowState> branch_states(const SceneSample& s) {
  return {layout_state(s.layout), shape_state(random_matrix(s.node_count(), kShapeLatentDim, 4)),
          texture_state(s.shapes, s.features)};
}

}  // namespace

TEST_CASE("time schedule is logistic of a shifted normal") {
  CHECK(time_from_normal(-1.0) == doctest::Approx(0.5));
  CHECK(time_from_normal(0.0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  Rng rng(1, 1);
  for (int i = 0; i < 1000; ++i) {
    const double t = sample_time(rng);
    CHECK(t > 0.0);
    CHECK(t < 1.0);
  }
}

TEST_CASE("interpolation endpoints and target") {
  const FlowState d0 = layout_state(random_matrix(3, 8, 1));
  const FlowState d1 = layout_state(random_matrix(3, 8, 2));
  CHECK(interpolate(d0, d1, 0.0).values == d0.values);
  CHECK(interpolate(d0, d1, 1.0).values == d1.values);
  CHECK(velocity_target(d0, d1) == d1.values - d0.values);
  CHECK_THROWS_AS(interpolate(d0, layout_state(random_matrix(2, 8, 2)), 0.5), DimensionError);
}

TEST_CASE("euler recovers data under the constant oracle field") {
  const SceneSample s = generate_indexed_scene(OracleConfig{}, 3, 0);
  for (const FlowState& d0 : branch_states(s)) {
    FlowState d1 = d0;
    Rng rng(5, 0);
    d1.values = randn(rng, d0.rows(), d0.values.cols());
    const Matrix v = velocity_target(d0, d1);
    const VelocityField field = [&](const FlowState&, double, bool) { return v; };
    for (int k : {1, 5, 25}) {
      SampleConfig c;
      c.steps = k;
      const FlowState out = integrate(field, d1, c);
      CHECK((out.values - d0.values).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(out.t == 0.0);
      CHECK(out.same_geometry(d0));
    }
  }
}

TEST_CASE("observer sees every step in order") {
  const FlowState start = layout_state(Matrix::Ones(2, 8));
  SampleConfig c;
  c.steps = 4;
  std::vector<int> seen;
  std::vector<double> times;
  integrate([](const FlowState& s, double, bool) { return Matrix::Zero(s.rows(), 8).eval(); }, start, c,
            [&](int step, const FlowState& s) {
              seen.push_back(step);
              times.push_back(s.t);
            });
  CHECK(seen == std::vector<int>{1, 2, 3, 4});
  CHECK(times == std::vector<double>{0.75, 0.5, 0.25, 0.0});
}

TEST_CASE("guidance algebra") {
  const FlowState s = layout_state(random_matrix(2, 8, 3));
  const Matrix cond = random_matrix(2, 8, 4);
  const Matrix null = random_matrix(2, 8, 5);
  int calls = 0;
  const VelocityField field = [&](const FlowState&, double, bool conditional) {
    ++calls;
    return conditional ? cond : null;
  };
  SampleConfig c;
  c.guidance = 1.0;
  CHECK(same_bits(guided_velocity(field, s, 0.5, c), cond));
  CHECK(calls == 1);
  c.guidance = 0.0;
  CHECK(same_bits(guided_velocity(field, s, 0.5, c), null));
  c.guidance = 5.0;
  CHECK(guided_velocity(field, s, 0.5, c).isApprox(null + 5.0 * (cond - null)));
  c.guidance_start = 0.6;
  CHECK(same_bits(guided_velocity(field, s, 0.5, c), cond));
  c.steps = 0;
  CHECK_THROWS_AS(validate(c), ContractError);
}

TEST_CASE("grf loss is non-negative and zero for the exact velocity") {
  auto data = small_data(Branch::Layout, 4);
  std::vector<const TrainingExample*> batch;
  for (const auto& ex : data) batch.push_back(&ex);
  const FlowDraw draw = draw_flow(batch, TrainConfig{}, Rng(1, 2));
  Tape tape;
  const Var exact = grf_loss(tape, draw, [](Tape& tp, const FlowDraw& d, const Var&) { return tp.constant(d.target); });
  CHECK(exact.value()(0, 0) == 0.0);
  const Var off =
      grf_loss(tape, draw, [](Tape& tp, const FlowDraw& d, const Var&) { return tp.constant(d.target * 1.1); });
  CHECK(off.value()(0, 0) > 0.0);
}

TEST_CASE("draw_flow shares time and dropout within a scene") {
  auto data = small_data(Branch::Texture, 5);
  std::vector<const TrainingExample*> batch;
  for (const auto& ex : data) batch.push_back(&ex);
  TrainConfig c;
  c.condition_dropout = 0.5;
  const FlowDraw draw = draw_flow(batch, c, Rng(4, 4));
  for (Index i = 0; i < draw.batch.node_count; ++i) {
    const Index scene = draw.batch.node_scene[static_cast<std::size_t>(i)];
    const Index first = std::find(draw.batch.node_scene.begin(), draw.batch.node_scene.end(), scene) -
                        draw.batch.node_scene.begin();
    CHECK(draw.node_time(i) == draw.node_time(first));
    CHECK(draw.keep(i) == draw.keep(first));
    CHECK((draw.keep(i) == 0.0 || draw.keep(i) == 1.0));
  }
  const FlowDraw again = draw_flow(batch, c, Rng(4, 4));
  CHECK(same_bits(again.noisy.values, draw.noisy.values));
}

TEST_CASE("full grf loss passes finite differences for every branch") {
  const SceneSample s = generate_indexed_scene(OracleConfig{}, 8, 2);
  for (const FlowState& state : branch_states(s)) {
    CAPTURE(to_string(state.branch));
    FlowModel model(state.branch, small_model(), 3);
    const TrainingExample ex{s.graph, state};
    const TrainingExample* batch[] = {&ex};
    TrainConfig tc;
    tc.condition_dropout = 0.0;
    const FlowDraw draw = draw_flow(batch, tc, Rng(2, 9));
    const double err = param_grad_check([&](Tape& tape) { return grf_loss(tape, model, draw); },
                                        model.parameters(), 3, 17);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("learning rate schedule is piecewise constant") {
  TrainConfig c;
  c.steps = 100;
  c.learning_rate = 1.0;
  CHECK(learning_rate_at(c, 0) == 1.0);
  CHECK(learning_rate_at(c, 34) == 1.0);
  CHECK(learning_rate_at(c, 35) == 0.5);
  CHECK(learning_rate_at(c, 70) == doctest::Approx(0.1));
  c.decay_factors = {0.5};
  CHECK_THROWS_AS(validate(c), ContractError);
}

TEST_CASE("training is bitwise reproducible") {
  auto run = [] {
    FlowModel model(Branch::Layout, small_model(), 7);
    TrainConfig c;
    c.batch_size = 4;
    c.learning_rate = 1e-3;
    FlowTrainer trainer(model, small_data(Branch::Layout, 10), c);
    std::vector<double> losses;
    for (int i = 0; i < 3; ++i) losses.push_back(trainer.step());
    std::vector<Matrix> params;
    for (Parameter* p : model.parameters()) params.push_back(p->value);
    return std::pair(losses, params);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  REQUIRE(a.second.size() == b.second.size());
  for (std::size_t i = 0; i < a.second.size(); ++i) CHECK(same_bits(a.second[i], b.second[i]));
}

TEST_CASE("a non-finite loss stops training with the step index") {
  FlowModel model(Branch::Layout, small_model(), 1);
  auto data = small_data(Branch::Layout, 2);
  TrainConfig c;
  c.batch_size = 2;
  FlowTrainer good(model, data, c);
  good.step();
  data[0].data.values(0, 0) = std::numeric_limits<double>::quiet_NaN();
  data[1].data.values(0, 0) = std::numeric_limits<double>::quiet_NaN();
  FlowModel fresh(Branch::Layout, small_model(), 1);
  FlowTrainer bad(fresh, data, c);
  try {
    bad.step();
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.step() == 1);
  }
}

TEST_CASE("sampling is deterministic and keeps texture geometry") {
  const auto scenes = generate_dataset(OracleConfig{}, 12, 3);
  std::vector<MultimodalGraph> graphs;
  std::vector<std::vector<VoxelGrid>> geometry;
  for (const auto& s : scenes) {
    graphs.push_back(s.graph);
    geometry.push_back(s.shapes);
  }
  FlowModel model(Branch::Texture, small_model(), 5);
  SampleConfig c;
  c.steps = 6;
  std::vector<FlowState> starts;
  for (std::size_t k = 0; k < graphs.size(); ++k) starts.push_back(empty_state(Branch::Texture, graphs[k], geometry[k]));
  const FlowState structure = concat_states(starts);
  int steps = 0;
  const auto out = sample(model, graphs, c, geometry, 0, [&](int, const FlowState& s) {
    ++steps;
    CHECK(s.same_geometry(structure));
  });
  CHECK(steps == 6);
  const auto again = sample(model, graphs, c, geometry);
  REQUIRE(out.size() == 3);
  for (std::size_t k = 0; k < out.size(); ++k) {
    CHECK(same_bits(out[k].values, again[k].values));
    CHECK(out[k].same_geometry(starts[k]));
  }
}

TEST_CASE("batched sampling matches per-graph sampling") {
  const auto scenes = generate_dataset(OracleConfig{}, 13, 3);
  std::vector<MultimodalGraph> graphs;
  for (const auto& s : scenes) graphs.push_back(s.graph);
  FlowModel model(Branch::Layout, small_model(), 5);
  SampleConfig c;
  c.steps = 5;
  const auto all = sample(model, graphs, c);
  const auto one = sample(model, std::span(graphs).subspan(1, 1), c, {}, 1);
  CHECK((all[1].values - one[0].values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("concat and split are inverse") {
  const auto scenes = generate_dataset(OracleConfig{}, 14, 3);
  std::vector<FlowState> parts;
  std::vector<Index> counts;
  for (const auto& s : scenes) {
    parts.push_back(texture_state(s.shapes, s.features));
    counts.push_back(s.node_count());
  }
  const auto back = split_state(concat_states(parts), counts);
  REQUIRE(back.size() == parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    CHECK(back[k].values == parts[k].values);
    CHECK(back[k].same_geometry(parts[k]));
  }
}

TEST_CASE("state constructors check their inputs") {
  CHECK_THROWS_AS(layout_state(Matrix::Zero(2, 7)), DimensionError);
  CHECK_THROWS_AS(shape_state(Matrix::Zero(2, 8)), DimensionError);
  const VoxelGrid g = VoxelGrid::full();
  const Matrix f = Matrix::Zero(3, kFeatureDim);
  CHECK_THROWS_AS(texture_state(std::span(&g, 1), std::span(&f, 1)), ContractError);
  CHECK(parse_branch("shape") == Branch::Shape);
  CHECK_THROWS_AS(parse_branch("colour"), ParseError);
}

TEST_CASE("time schedule median and reference value") {
  CHECK(time_from_normal(0.0) == doctest::Approx(std::exp(1.0) / (1.0 + std::exp(1.0))).epsilon(1e-12));
  CHECK(time_from_normal(0.0) == doctest::Approx(0.73106).epsilon(1e-5));
  Rng rng(2, 7);
  std::vector<double> ts(100000);
  for (double& t : ts) t = sample_time(rng);
  std::nth_element(ts.begin(), ts.begin() + 50000, ts.end());
  CHECK(std::abs(ts[50000] - 0.7311) < 0.005);
}

TEST_CASE("interpolation identities") {
  const FlowState zero = layout_state(Matrix::Zero(2, 8));
  const FlowState two = layout_state(Matrix::Constant(2, 8, 2.0));
  CHECK(interpolate(zero, two, 0.5).values == Matrix::Ones(2, 8));
  const FlowState d0 = layout_state(random_matrix(4, 8, 7));
  const FlowState d1 = layout_state(random_matrix(4, 8, 8));
  const Matrix v = velocity_target(d0, d1);
  for (double t : {0.1, 0.37, 0.9}) {
    CHECK((interpolate(d0, d1, t).values - t * v - d0.values).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("unit offset prediction gives unit loss") {
  auto data = small_data(Branch::Layout, 3);
  std::vector<const TrainingExample*> batch;
  for (const auto& ex : data) batch.push_back(&ex);
  const FlowDraw draw = draw_flow(batch, TrainConfig{}, Rng(3, 3));
  Tape tape;
  const Var loss = grf_loss(tape, draw, [](Tape& tp, const FlowDraw& d, const Var&) {
    return tp.constant((d.target.array() + 1.0).matrix());
  });
  CHECK(loss.value()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero training steps leave parameters unchanged") {
  FlowModel model(Branch::Layout, small_model(), 3);
  std::vector<Matrix> before;
  for (Parameter* p : model.parameters()) before.push_back(p->value);
  FlowTrainer trainer(model, small_data(Branch::Layout, 4), TrainConfig{});
  trainer.run(0);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(same_bits(before[i], model.parameters()[i]->value));
}

TEST_CASE("loss falls on a one-category two-node dataset") {
  // Two beds, placed by one of two fixed layouts depending on which is left.
  Matrix left_first(2, 8), right_first(2, 8);
  left_first << -0.5, -0.7, 0.1, 0.2, 0.25, 0.15, 1, 0,
                 0.4, -0.7, -0.2, 0.2, 0.25, 0.15, 0, 1;
  right_first = left_first.colwise().reverse();
  Rng rng(21, 0);
  std::vector<TrainingExample> data;
  for (int k = 0; k < 400; ++k) {
    MultimodalGraph g;
    g.nodes = {make_node(0, 0, {}), make_node(0, 0, {})};
    const bool first_left = rng.below(2) == 0;
    set_relation(g, 0, 1, first_left ? Predicate::LeftOf : Predicate::RightOf);
    data.push_back({normalized(g), layout_state(first_left ? left_first : right_first)});
  }
  FlowModel model(Branch::Layout, small_model(), 2);
  TrainConfig c;
  c.steps = 2000;
  c.learning_rate = 1e-3;
  c.log_every = 1;
  FlowTrainer trainer(model, data, c);
  std::vector<double> losses;
  trainer.run(c.steps, [&](std::int64_t, double loss) { losses.push_back(loss); });
  auto window = [&](std::size_t from) {
    double s = 0.0;
    for (std::size_t k = from; k < from + 100; ++k) s += losses[k];
    return s / 100.0;
  };
  CHECK(window(losses.size() - 100) < 0.25 * window(0));
}
