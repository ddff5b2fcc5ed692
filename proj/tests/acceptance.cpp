// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "graphflow/branches.hpp"
#include "graphflow/checkpoint.hpp"
#include "graphflow/evaluation.hpp"
#include "graphflow/exchange.hpp"
#include "graphflow/flow.hpp"
#include "graphflow/oracle.hpp"
#include "graphflow/pipeline.hpp"
#include "support.hpp"

using namespace graphflow;
using namespace graphflow::testing;

namespace {

constexpr std::size_t kTrainScenes = 3000;
constexpr std::size_t kHeldOut = 200;
constexpr std::uint64_t kDataSeed = 1;
constexpr std::uint64_t kHeldOutFirst = 1000000;
constexpr std::int64_t kLayoutSteps = 8000;
constexpr std::int64_t kShapeSteps = 4000;
constexpr double kLearningRate = 1e-3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

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

std::vector<MultimodalGraph> graphs_of(std::span<const SceneSample> samples) {
  std::vector<MultimodalGraph> out;
  for (const SceneSample& s : samples) out.push_back(s.graph);
  return out;
}

std::vector<FlowState> branch_states(const SceneSample& s) {
  return {layout_state(s.layout), shape_state(random_matrix(s.node_count(), kShapeLatentDim, 4)),
          texture_state(s.shapes, s.features)};
}

std::vector<int> random_permutation(Rng& rng, int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(p[i], p[rng.below(static_cast<std::uint64_t>(i + 1))]);
  return p;
}

// Shared by criteria 5, 8 and 11.
struct LayoutRun {
  std::vector<SceneSample> train;
  std::vector<SceneSample> held_out;
  std::unique_ptr<FlowModel> model;
};

LayoutRun& layout_run() {
  static LayoutRun run = [] {
    LayoutRun r;
    r.train = generate_dataset(OracleConfig{}, kDataSeed, kTrainScenes);
    r.held_out = generate_dataset(OracleConfig{}, kDataSeed, kHeldOut, kHeldOutFirst);
    r.model = std::make_unique<FlowModel>(Branch::Layout, ModelConfig{}, 7);
    TrainConfig c;
    c.steps = kLayoutSteps;
    c.learning_rate = kLearningRate;
    c.seed = 3;
    c.log_every = 500;
    FlowTrainer trainer(*r.model, training_examples(r.train, Branch::Layout), c);
    double window = 0.0;
    trainer.run(c.steps, [&](std::int64_t step, double loss) {
      window = loss;
      std::printf("  layout step %lld loss %.4f\n", static_cast<long long>(step), window);
      std::fflush(stdout);
    });
    return r;
  }();
  return run;
}

// ---- 1 ---------------------------------------------------------------------

Outcome gradients() {
  double worst = 0.0;
  std::string worst_name;
  std::uint64_t seed = 1;
  for (const OpCase& op : op_cases()) {
    const double e = op_grad_error(op, 10, seed++);
    if (e > worst) {
      worst = e;
      worst_name = op.name;
    }
  }
  double loss_worst = 0.0;
  const SceneSample s = generate_indexed_scene(OracleConfig{}, 8, 2);
  for (const FlowState& state : branch_states(s)) {
    FlowModel model(state.branch, small_model(), 3);
    const TrainingExample ex{s.graph, state};
    const TrainingExample* batch[] = {&ex};
    TrainConfig tc;
    tc.condition_dropout = 0.0;
    const FlowDraw draw = draw_flow(batch, tc, Rng(2, 9));
    loss_worst = std::max(loss_worst, param_grad_check([&](Tape& tape) { return grf_loss(tape, model, draw); },
                                                       model.parameters(), 4, 17));
  }
  return {worst < 1e-4 && loss_worst < 1e-4,
          fmt("%zu ops, max rel-err %.2e (%s); grf-loss max rel-err %.2e", op_cases().size(), worst,
              worst_name.c_str(), loss_worst)};
}

// ---- 2 ---------------------------------------------------------------------

Outcome oracle_field() {
  double worst = 0.0;
  for (std::uint64_t index = 0; index < 5; ++index) {
    const SceneSample s = generate_indexed_scene(OracleConfig{}, 3, index);
    for (const FlowState& d0 : branch_states(s)) {
      FlowState d1 = d0;
      Rng rng(5, index);
      d1.values = randn(rng, d0.rows(), d0.values.cols());
      const Matrix v = velocity_target(d0, d1);
      const VelocityField field = [&](const FlowState&, double, bool) { return v; };
      for (int k : {1, 5, 25}) {
        SampleConfig c;
        c.steps = k;
        worst = std::max(worst, (integrate(field, d1, c).values - d0.values).cwiseAbs().maxCoeff());
      }
    }
  }
  return {worst <= 1e-10, fmt("max |error| %.2e over 3 branches, K in {1,5,25}", worst)};
}

// ---- 3 ---------------------------------------------------------------------

Outcome equivariance() {
  Rng init(2, 0);
  ExchangeUnit unit(Branch::Layout, ModelConfig{}, init);
  Rng rng(3, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const MultimodalGraph g = random_graph(rng, n, 0.5);
    const std::vector<int> perm = random_permutation(rng, n);
    const MultimodalGraph pg = permute_graph(g, perm);
    const Matrix state = random_matrix(n, 8, 100 + trial);
    Matrix pstate(n, 8);
    Vector time(n), ptime(n);
    for (int i = 0; i < n; ++i) {
      time(i) = rng.uniform();
      pstate.row(perm[i]) = state.row(i);
      ptime(perm[i]) = time(i);
    }
    const Matrix out = unit(make_batch(g), layout_state(state), time).vectors;
    const Matrix pout = unit(make_batch(pg), layout_state(pstate), ptime).vectors;
    for (int i = 0; i < n; ++i) worst = std::max(worst, (out.row(i) - pout.row(perm[i])).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, fmt("max deviation %.2e over 100 graphs", worst)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome coupling() {
  Rng init(6, 0);
  ExchangeUnit unit(Branch::Layout, ModelConfig{}, init);
  Rng rng(4, 0);
  int pairs = 0;
  int live = 0;
  double weakest = std::numeric_limits<double>::infinity();
  while (pairs < 100) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const MultimodalGraph g = random_graph(rng, n, 0.4);
    if (g.edges.empty()) continue;
    const Edge& e = g.edges[rng.below(g.edges.size())];
    const Index i = e.source, j = e.target;
    const Matrix state = randn(rng, n, 8);
    Matrix moved = state;
    moved.row(j) += randn(rng, 1, 8);
    const Vector time = Vector::Constant(n, rng.uniform());
    const GraphBatch batch = make_batch(g);
    const Matrix a = unit(batch, layout_state(state), time).vectors;
    const Matrix b = unit(batch, layout_state(moved), time).vectors;
    const double change = (a.row(i) - b.row(i)).cwiseAbs().maxCoeff();
    weakest = std::min(weakest, change);
    ++pairs;
    if (change > 1e-8) ++live;
  }
  return {live == pairs, fmt("%d/%d pairs live, smallest change %.2e", live, pairs, weakest)};
}

// ---- 5 ---------------------------------------------------------------------

Outcome layout_constraints() {
  const auto start = std::chrono::steady_clock::now();
  LayoutRun& run = layout_run();
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  const std::vector<MultimodalGraph> graphs = graphs_of(run.held_out);
  const SampleConfig sc;

  FlowModel untrained(Branch::Layout, ModelConfig{}, 7);
  const EvalReport baseline = eval_mode(model_layouts(untrained, sc), graphs, EvalMode::GenerationOnly, 0);
  const EvalReport gen = eval_mode(model_layouts(*run.model, sc), graphs, EvalMode::GenerationOnly, 0);
  const EvalReport change = eval_mode(model_layouts(*run.model, sc), graphs, EvalMode::RelationshipChange, 0);
  const EvalReport reports[] = {gen, change};
  std::printf("%s", report_table(reports).c_str());

  const double lr = gen.family(Family::LeftRight).rate();
  const double fb = gen.family(Family::FrontBehind).rate();
  const double sl = gen.family(Family::SmallerLarger).rate();
  const double ts = gen.family(Family::TallerShorter).rate();
  const double flipped = change.flipped.rate();
  const bool pass = lr >= 0.85 && fb >= 0.85 && sl >= 0.75 && ts >= 0.75 && flipped >= 0.75;
  return {pass, fmt("left/right %.3f front/behind %.3f smaller/larger %.3f taller/shorter %.3f flipped %.3f; "
                    "untrained left/right %.3f; %lld steps in %.1f min",
                    lr, fb, sl, ts, flipped, baseline.family(Family::LeftRight).rate(),
                    static_cast<long long>(kLayoutSteps), minutes)};
}

// ---- 6 ---------------------------------------------------------------------

Outcome shape_consistency() {
  const auto start = std::chrono::steady_clock::now();
  ShapeCodec codec(0);
  codec.pretrain(shape_library(), CodecTrainConfig{});
  std::vector<VoxelGrid> prototypes;
  for (int k = 0; k < kCategoryCount; ++k) {
    for (int s = 0; s < kStylesPerCategory; ++s) prototypes.push_back(prototype(k, s));
  }
  const double codec_iou = reconstruction_iou(codec, prototypes);

  const auto train = generate_dataset(OracleConfig{}, kDataSeed, kTrainScenes);
  const auto held_out = generate_dataset(OracleConfig{}, kDataSeed, kHeldOut, kHeldOutFirst);
  FlowModel model(Branch::Shape, ModelConfig{}, 11);
  TrainConfig c;
  c.steps = kShapeSteps;
  c.learning_rate = kLearningRate;
  c.seed = 5;
  c.log_every = 500;
  FlowTrainer trainer(model, training_examples(train, Branch::Shape, &codec), c);
  trainer.run(c.steps, [](std::int64_t step, double loss) {
    std::printf("  shape step %lld loss %.4f\n", static_cast<long long>(step), loss);
    std::fflush(stdout);
  });
  const ConsistencyReport r = same_as_consistency(model_shapes(model, codec, SampleConfig{}), graphs_of(held_out), 0);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  const bool pass = codec_iou >= 0.95 && r.same_as_mean <= r.control_mean / 5.0;
  return {pass, fmt("codec IoU %.3f; same-as chamfer %.5f vs control %.5f (ratio %.3f) over %zu pairs, "
                    "%d degenerate; %.1f min",
                    codec_iou, r.same_as_mean, r.control_mean, r.same_as_mean / r.control_mean, r.pairs,
                    r.degenerate_count, minutes)};
}

// ---- 7 ---------------------------------------------------------------------

Outcome texture_anchoring() {
  const auto scenes = generate_dataset(OracleConfig{}, 21, 100);
  FlowModel model(Branch::Texture, small_model(), 5);
  TrainConfig tc;
  tc.learning_rate = kLearningRate;
  FlowTrainer trainer(model, training_examples(scenes, Branch::Texture), tc);
  trainer.run(50);
  int steps = 0;
  int broken = 0;
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    const std::vector<VoxelGrid> geometry[] = {scenes[k].shapes};
    const MultimodalGraph graphs[] = {scenes[k].graph};
    const FlowState structure = empty_state(Branch::Texture, graphs[0], geometry[0]);
    SampleConfig c;
    c.seed = k;
    const auto out = sample(model, graphs, c, geometry, 0, [&](int, const FlowState& s) {
      ++steps;
      if (!s.same_geometry(structure)) ++broken;
    });
    if (!out[0].same_geometry(structure)) ++broken;
  }
  return {broken == 0 && steps == 100 * SampleConfig{}.steps,
          fmt("%d Euler steps over 100 samplings, %d with a changed voxel set", steps, broken)};
}

// ---- 8 ---------------------------------------------------------------------

Outcome straightness() {
  LayoutRun& run = layout_run();
  const std::vector<MultimodalGraph> graphs = graphs_of(run.held_out);
  auto displacement = [&](double guidance) {
    SampleConfig coarse;
    coarse.guidance = guidance;
    SampleConfig fine = coarse;
    fine.steps = 200;
    const auto a = model_layouts(*run.model, coarse)(graphs);
    const auto b = model_layouts(*run.model, fine)(graphs);
    double total = 0.0;
    Index nodes = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      total += (a[k] - b[k]).rowwise().norm().sum();
      nodes += a[k].rows();
    }
    return total / static_cast<double>(nodes);
  };
  const double guided = displacement(SampleConfig{}.guidance);
  const double plain = displacement(1.0);
  return {guided < 0.05, fmt("mean per-node displacement K=25 vs K=200: %.4f at w=%.1f, %.4f at w=1", guided,
                             SampleConfig{}.guidance, plain)};
}

// ---- 9 ---------------------------------------------------------------------

Outcome metrics() {
  bool exact = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<Matrix> gen, ref;
    for (int k = 0; k < 10; ++k) {
      gen.push_back(random_matrix(6 + k % 3, 3, 100 * seed + k));
      ref.push_back((random_matrix(5 + k % 4, 3, 100 * seed + 50 + k).array() + 0.2).matrix());
    }
    for (std::size_t k = 0; k < gen.size(); ++k) exact = exact && chamfer(gen[k], ref[k]) == brute_chamfer(gen[k], ref[k]);
    const DistributionMetrics m = distribution_metrics(gen, ref);
    const BruteMetrics b = brute_metrics(gen, ref);
    exact = exact && m.mmd == b.mmd && m.cov == b.cov && m.nna == b.nna;
  }

  // One population of jittered object clouds, split three ways into disjoint halves.
  std::vector<Matrix> population;
  Rng rng(9, 0);
  for (int k = 0; k < 600; ++k) {
    const VoxelGrid& g = prototype(static_cast<int>(rng.below(kCategoryCount)),
                                   static_cast<int>(rng.below(kStylesPerCategory)));
    const Matrix pts = g.points();
    Matrix cloud(16, 3);
    for (Index r = 0; r < 16; ++r) cloud.row(r) = pts.row(static_cast<Index>(rng.below(pts.rows())));
    population.push_back(cloud + 0.05 * randn(rng, 16, 3));
  }
  bool in_range = true;
  std::string nnas;
  for (std::uint64_t split = 0; split < 3; ++split) {
    Rng shuffle(10, split);
    const std::vector<int> order = random_permutation(shuffle, 600);
    std::vector<Matrix> a, b;
    for (int k = 0; k < 600; ++k) (k < 300 ? a : b).push_back(population[static_cast<std::size_t>(order[k])]);
    const double nna = distribution_metrics(a, b).nna;
    in_range = in_range && nna >= 0.45 && nna <= 0.55;
    nnas += fmt(" %.3f", nna);
  }
  return {exact && in_range, fmt("brute-force match on 5 instances of 10x10: %s; i.i.d. 1-NNA%s",
                                 exact ? "exact" : "MISMATCH", nnas.c_str())};
}

// ---- 10 --------------------------------------------------------------------

Outcome persistence() {
  const auto dir = std::filesystem::temp_directory_path() / "graphflow_acceptance";
  std::filesystem::create_directories(dir);
  const auto scenes = generate_dataset(OracleConfig{}, 31, 24);
  const auto data = training_examples(scenes, Branch::Layout);
  TrainConfig tc;
  tc.batch_size = 4;
  tc.steps = 20;
  tc.learning_rate = kLearningRate;
  const std::uint64_t fp = model_fingerprint(small_model(), Branch::Layout);

  auto train = [&](std::int64_t steps) {
    auto model = std::make_unique<FlowModel>(Branch::Layout, small_model(), 2);
    FlowTrainer trainer(*model, data, tc);
    trainer.run(steps);
    return std::pair(std::move(model), training_checkpoint(trainer, fp));
  };
  auto [model_a, full_a] = train(20);
  auto [model_b, full_b] = train(20);
  const bool train_repro = identical(full_a, full_b);

  const std::vector<MultimodalGraph> graphs = graphs_of(scenes);
  const auto sa = sample(*model_a, graphs, SampleConfig{});
  const auto sb = sample(*model_b, graphs, SampleConfig{});
  bool sample_repro = true;
  for (std::size_t k = 0; k < sa.size(); ++k) sample_repro = sample_repro && same_bits(sa[k].values, sb[k].values);

  FlowModel half_model(Branch::Layout, small_model(), 2);
  FlowTrainer half(half_model, data, tc);
  half.run(10);
  save_checkpoint(dir / "half.gfck", training_checkpoint(half, fp));
  FlowModel resumed_model(Branch::Layout, small_model(), 77);
  FlowTrainer resumed(resumed_model, data, tc);
  resume_training(resumed, load_checkpoint(dir / "half.gfck"));
  resumed.run(20);
  const bool resume_exact = identical(training_checkpoint(resumed, fp), full_a);

  write_dataset(dir / "data.gfsd", scenes);
  const bool dataset_rt = read_dataset(dir / "data.gfsd") == scenes;
  std::vector<AssembledScene> assembled;
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    assembled.push_back(assemble(scenes[k].graph, decode_layout(sa[k].values), scenes[k].shapes, {}));
  }
  write_scenes(dir / "scenes.gfas", assembled);
  const bool scene_rt = read_scenes(dir / "scenes.gfas") == assembled;
  save_checkpoint(dir / "full.gfck", full_a);
  const bool ckpt_rt = identical(load_checkpoint(dir / "full.gfck"), full_a);
  std::filesystem::remove_all(dir);

  const bool pass = train_repro && sample_repro && resume_exact && dataset_rt && scene_rt && ckpt_rt;
  auto yn = [](bool b) { return b ? "yes" : "NO"; };
  return {pass, fmt("train %s, sample %s, resume %s, dataset %s, scenes %s, checkpoint %s", yn(train_repro),
                    yn(sample_repro), yn(resume_exact), yn(dataset_rt), yn(scene_rt), yn(ckpt_rt))};
}

// ---- 11 --------------------------------------------------------------------

// Euler with a single branch of the model, written out here so the sampler's
// guidance path is checked against something independent of it.
std::vector<Matrix> single_branch(FlowModel& model, std::span<const MultimodalGraph> graphs, const SampleConfig& c,
                                  bool conditional) {
  std::vector<FlowState> parts;
  std::vector<Index> counts;
  std::vector<const MultimodalGraph*> pointers;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    FlowState s = empty_state(Branch::Layout, graphs[k]);
    Rng rng(c.seed, k);
    s.values = randn(rng, s.rows(), s.values.cols());
    parts.push_back(s);
    counts.push_back(graphs[k].node_count());
    pointers.push_back(&graphs[k]);
  }
  const GraphBatch batch = make_batch(pointers);
  FlowState state = concat_states(parts);
  const double dt = 1.0 / c.steps;
  for (int k = c.steps; k >= 1; --k) state.values -= dt * model.velocity(batch, state, k * dt, conditional);
  std::vector<Matrix> out;
  for (const FlowState& s : split_state(state, counts)) out.push_back(s.values);
  return out;
}

Outcome guidance() {
  LayoutRun& run = layout_run();
  const std::vector<MultimodalGraph> graphs = graphs_of(std::span(run.held_out).first(50));
  auto sampled = [&](double w) {
    SampleConfig c;
    c.guidance = w;
    std::vector<Matrix> out;
    for (const FlowState& s : sample(*run.model, graphs, c)) out.push_back(s.values);
    return out;
  };
  auto all_same = [](const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (!same_bits(a[k], b[k])) return false;
    }
    return true;
  };
  const auto w0 = sampled(0.0);
  const auto w1 = sampled(1.0);
  const auto w5 = sampled(5.0);
  const bool cond_exact = all_same(w1, single_branch(*run.model, graphs, SampleConfig{}, true));
  const bool null_exact = all_same(w0, single_branch(*run.model, graphs, SampleConfig{}, false));
  auto distance = [&](const std::vector<Matrix>& a) {
    double total = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) total += (a[k] - w0[k]).squaredNorm();
    return std::sqrt(total);
  };
  const double d1 = distance(w1);
  const double d5 = distance(w5);
  return {cond_exact && null_exact,
          fmt("w=1 conditional-only %s, w=0 unconditional-only %s; distance from w=0: %.4f at w=1, %.4f at w=5 (%s)",
              cond_exact ? "exact" : "DIFFERS", null_exact ? "exact" : "DIFFERS", d1, d5,
              d1 <= d5 ? "monotone" : "not monotone")};
}

}  // namespace

// Optional arguments select criteria by number.
int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, gradients},     {2, oracle_field}, {3, equivariance},   {4, coupling},
      {7, texture_anchoring}, {9, metrics},  {10, persistence},   {5, layout_constraints},
      {8, straightness},  {11, guidance},    {6, shape_consistency},
  };
  std::vector<std::pair<int, Outcome>> results;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d: %s  %s  [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds);
    std::fflush(stdout);
    results.emplace_back(id, o);
  }
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::printf("\nsummary\n");
  bool all = true;
  for (const auto& [id, o] : results) {
    std::printf("%2d %s\n", id, o.pass ? "PASS" : "FAIL");
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
