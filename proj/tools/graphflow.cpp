// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

// graphflow: data generation, codec pretraining, flow training, sampling,
// evaluation and rendering.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graphflow/branches.hpp"
#include "graphflow/checkpoint.hpp"
#include "graphflow/config.hpp"
#include "graphflow/errors.hpp"
#include "graphflow/evaluation.hpp"
#include "graphflow/flow.hpp"
#include "graphflow/oracle.hpp"
#include "graphflow/pipeline.hpp"
#include "graphflow/render.hpp"

namespace fs = std::filesystem;
using namespace graphflow;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig config_from(const std::string& path) { return path.empty() ? default_config() : load_config(path); }

void print_edge_statistics(std::span<const SceneSample> samples) {
  std::map<Family, std::int64_t> counts;
  for (const SceneSample& s : samples) {
    for (const Edge& e : s.graph.edges) ++counts[family_of(e.predicate)];
  }
  std::cout << "family\tedges\n";
  for (int f = 0; f < kFamilyCount; ++f) {
    std::cout << to_string(static_cast<Family>(f)) << "\t" << counts[static_cast<Family>(f)] << "\n";
  }
}

// ---- gen-data --------------------------------------------------------------

struct GenDataArgs {
  std::string config, out;
  std::size_t count = 1000;
  std::uint64_t seed = 0;
  std::uint64_t first_index = 0;
};

void gen_data(const GenDataArgs& a) {
  const RunConfig cfg = config_from(a.config);
  const std::vector<SceneSample> samples = generate_dataset(cfg.oracle, a.seed, a.count, a.first_index);
  write_dataset(a.out, samples);
  std::cout << "wrote " << samples.size() << " scenes to " << a.out << "\n";
  print_edge_statistics(samples);
}

// ---- pretrain-codec ----------------------------------------------------------

struct CodecArgs {
  std::string kind, config, out;
};

void pretrain_codec(const CodecArgs& a) {
  const RunConfig cfg = config_from(a.config);
  if (a.kind == "shape") {
    ShapeCodec codec(cfg.shape_codec.seed);
    const std::vector<VoxelGrid> library = shape_library();
    const double loss = codec.pretrain(library, cfg.shape_codec);
    std::vector<VoxelGrid> prototypes;
    for (int c = 0; c < kCategoryCount; ++c) {
      for (int s = 0; s < kStylesPerCategory; ++s) prototypes.push_back(prototype(c, s));
    }
    std::printf("shape codec: final loss %.6f, prototype IoU %.4f\n", loss, reconstruction_iou(codec, prototypes));
    save_checkpoint(a.out, codec_checkpoint(codec));
  } else if (a.kind == "texture") {
    TextureCodec codec(cfg.texture_codec.seed);
    const TexturePairs pairs = texture_pairs(cfg.oracle.embed_seed);
    const double loss = codec.pretrain(pairs, cfg.texture_codec);
    const double err = (codec.decode(pairs.features) - pairs.colors).cwiseAbs().mean();
    std::printf("texture codec: final loss %.6f, mean RGB error %.4f\n", loss, err);
    save_checkpoint(a.out, codec_checkpoint(codec));
  } else {
    throw UsageError("--kind must be shape or texture");
  }
  std::cout << "wrote " << a.out << "\n";
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string branch, data, config, out, codec, resume, loss_out;
  bool force = false;
};

void train(const TrainArgs& a) {
  const RunConfig cfg = config_from(a.config);
  const Branch branch = parse_branch(a.branch);
  const std::vector<SceneSample> samples = read_dataset(a.data);

  std::unique_ptr<ShapeCodec> shape_codec;
  if (branch != Branch::Layout) {
    if (a.codec.empty()) {
      throw ValidationError(std::string(to_string(branch)) +
                            " training needs a pretrained codec: run `graphflow pretrain-codec --kind " +
                            std::string(to_string(branch)) + " --out <file>` and pass it with --codec");
    }
    const Checkpoint c = load_checkpoint(a.codec);
    if (branch == Branch::Shape) {
      shape_codec = std::make_unique<ShapeCodec>();
      load_codec(c, *shape_codec);
    } else {
      TextureCodec texture_codec;
      load_codec(c, texture_codec);
    }
  }

  FlowModel model(branch, cfg.model, cfg.train.seed);
  FlowTrainer trainer(model, training_examples(samples, branch, shape_codec.get()), cfg.train);
  const std::uint64_t fingerprint = model_fingerprint(cfg.model, branch);
  if (!a.resume.empty()) {
    const Checkpoint c = load_checkpoint(a.resume);
    check_fingerprint(c, fingerprint, a.force);
    resume_training(trainer, c);
    std::cout << "resumed at step " << trainer.steps_done() << "\n";
  }

  const std::string loss_path = a.loss_out.empty() ? a.out + ".loss.tsv" : a.loss_out;
  std::ofstream loss_file(loss_path, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!loss_file) throw IoError("cannot open '" + loss_path + "' for writing");
  auto save = [&](std::int64_t) { save_checkpoint(a.out, training_checkpoint(trainer, fingerprint)); };
  trainer.run(
      cfg.train.steps,
      [&](std::int64_t step, double loss) {
        loss_file << step << "\t" << loss << "\n";
        loss_file.flush();
        std::printf("%lld\t%.6f\n", static_cast<long long>(step), loss);
        std::fflush(stdout);
      },
      save);
  save(trainer.steps_done());
  std::cout << "wrote " << a.out << " at step " << trainer.steps_done() << "\n";
}

// ---- sample ----------------------------------------------------------------

struct SampleArgs {
  std::string graph, config, out;
  std::string layout_ckpt, shape_ckpt, shape_codec, texture_ckpt, texture_codec;
  std::optional<int> k;
  std::optional<double> cfg;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

std::unique_ptr<FlowModel> model_from(const std::string& path, Branch branch, const RunConfig& cfg, bool has_config,
                                      bool force) {
  return load_model(load_checkpoint(path), branch, has_config ? &cfg.model : nullptr, force);
}

void sample_cmd(const SampleArgs& a) {
  const RunConfig cfg = config_from(a.config);
  SampleConfig sc = cfg.sample;
  if (a.k) sc.steps = *a.k;
  if (a.cfg) sc.guidance = *a.cfg;
  if (a.seed) sc.seed = *a.seed;
  validate(sc);
  const MultimodalGraph graph = read_graph(a.graph, cfg.oracle.embed_seed);
  const std::vector<MultimodalGraph> graphs = {graph};
  const bool has_config = !a.config.empty();

  auto layout_model = model_from(a.layout_ckpt, Branch::Layout, cfg, has_config, a.force);
  const DecodedLayout layout = decode_layout(denormalize_layout(sample(*layout_model, graphs, sc).front().values));

  std::vector<VoxelGrid> shapes;
  std::vector<Matrix> colors;
  if (!a.shape_ckpt.empty()) {
    if (a.shape_codec.empty()) throw UsageError("--shape-ckpt needs --shape-codec");
    ShapeCodec codec;
    load_codec(load_checkpoint(a.shape_codec), codec);
    auto shape_model = model_from(a.shape_ckpt, Branch::Shape, cfg, has_config, a.force);
    for (const ShapeCodec::Decoded& d : codec.decode(sample(*shape_model, graphs, sc).front().values)) {
      shapes.push_back(d.grid.empty() ? VoxelGrid::full() : d.grid);
    }
  }
  if (!a.texture_ckpt.empty()) {
    if (shapes.empty()) throw UsageError("--texture-ckpt needs --shape-ckpt");
    if (a.texture_codec.empty()) throw UsageError("--texture-ckpt needs --texture-codec");
    TextureCodec codec;
    load_codec(load_checkpoint(a.texture_codec), codec);
    auto texture_model = model_from(a.texture_ckpt, Branch::Texture, cfg, has_config, a.force);
    const std::vector<std::vector<VoxelGrid>> geometry = {shapes};
    const FlowState features = sample(*texture_model, graphs, sc, geometry).front();
    for (Index i = 0; i < graph.node_count(); ++i) {
      colors.push_back(codec.decode(node_rows(features, i), shapes[static_cast<std::size_t>(i)]));
    }
  }

  const AssembledScene scene = assemble(graph, layout, shapes, colors);
  const std::vector<AssembledScene> scenes = {scene};
  write_scenes(a.out, scenes);

  int satisfied = 0;
  int checked = 0;
  std::cout << "source\ttarget\tpredicate\tholds\n";
  for (const Edge& e : graph.edges) {
    if (e.predicate == Predicate::SameAs) continue;
    const bool ok = check_constraint(e.predicate, layout.rows, e.source, e.target, cfg.thresholds);
    ++checked;
    satisfied += ok ? 1 : 0;
    std::cout << e.source << "\t" << e.target << "\t" << to_string(e.predicate) << "\t" << (ok ? "yes" : "no")
              << "\n";
  }
  std::cout << "satisfied " << satisfied << "/" << checked << " spatial edges; wrote " << a.out << "\n";
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> modes;
  std::string data, config, out, layout_ckpt, shape_ckpt, shape_codec;
  bool oracle = false;
  bool force = false;
  std::optional<std::size_t> count;
};

void eval_cmd(const EvalArgs& a) {
  const RunConfig cfg = config_from(a.config);
  std::vector<SceneSample> samples = read_dataset(a.data);
  if (a.count && *a.count < samples.size()) samples.resize(*a.count);
  std::vector<MultimodalGraph> graphs;
  for (const SceneSample& s : samples) graphs.push_back(s.graph);
  const bool has_config = !a.config.empty();

  std::unique_ptr<FlowModel> layout_model;
  LayoutGenerator generate;
  if (a.oracle) {
    generate = [&samples](std::span<const MultimodalGraph> gs) {
      if (gs.size() != samples.size()) throw UsageError("--oracle layouts exist only for unedited graphs");
      std::vector<Matrix> out;
      for (std::size_t i = 0; i < gs.size(); ++i) {
        if (gs[i].node_count() != samples[i].node_count() || gs[i].edges != samples[i].graph.edges) {
          throw UsageError("--oracle supports only generation-only mode");
        }
        out.push_back(samples[i].layout);
      }
      return out;
    };
  } else {
    if (a.layout_ckpt.empty()) throw UsageError("eval needs --layout-ckpt or --oracle");
    layout_model = model_from(a.layout_ckpt, Branch::Layout, cfg, has_config, a.force);
    generate = model_layouts(*layout_model, cfg.sample);
  }

  std::vector<EvalReport> reports;
  for (const std::string& m : a.modes) {
    reports.push_back(eval_mode(generate, graphs, parse_eval_mode(m), cfg.sample.seed, cfg.thresholds));
  }
  std::string text = report_table(reports);

  if (!a.shape_ckpt.empty()) {
    if (a.shape_codec.empty()) throw UsageError("--shape-ckpt needs --shape-codec");
    ShapeCodec codec;
    load_codec(load_checkpoint(a.shape_codec), codec);
    auto shape_model = model_from(a.shape_ckpt, Branch::Shape, cfg, has_config, a.force);
    const ShapeGenerator shapes = model_shapes(*shape_model, codec, cfg.sample);
    const ConsistencyReport consistency = same_as_consistency(shapes, graphs, cfg.sample.seed);
    std::vector<VoxelGrid> generated;
    std::vector<VoxelGrid> reference;
    for (const auto& scene : shapes(graphs)) {
      for (const VoxelGrid& g : scene) generated.push_back(g.empty() ? VoxelGrid::full() : g);
    }
    for (const SceneSample& s : samples) reference.insert(reference.end(), s.shapes.begin(), s.shapes.end());
    const DistributionMetrics dm = distribution_metrics(generated, reference);
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "\nmetric\tvalue\nsame-as-chamfer\t%.6f\ncontrol-chamfer\t%.6f\nsame-as-pairs\t%zu\n"
                  "degenerate-shapes\t%d\nmmd\t%.6f\ncov\t%.6f\n1-nna\t%.6f\n",
                  consistency.same_as_mean, consistency.control_mean, consistency.pairs,
                  consistency.degenerate_count, dm.mmd, dm.cov, dm.nna);
    text += buf;
  }

  std::cout << text;
  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + a.out + "' for writing");
    out << text;
  }
}

// ---- render ----------------------------------------------------------------

struct RenderArgs {
  std::string scene, out;
  std::size_t index = 0;
};

void render_cmd(const RenderArgs& a) {
  const std::vector<AssembledScene> scenes = read_scenes(a.scene);
  if (a.index >= scenes.size()) {
    throw UsageError("scene index " + std::to_string(a.index) + " out of range (" + std::to_string(scenes.size()) +
                     " scenes)");
  }
  write_svg(a.out, scenes[a.index]);
  std::cout << "wrote " << a.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-conditioned rectified flow for 3D indoor scenes"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic scene dataset");
  gen_cmd->add_option("--config", gen.config, "Run configuration (JSON)");
  gen_cmd->add_option("--out", gen.out, "Dataset file to write")->required();
  gen_cmd->add_option("--count", gen.count, "Number of scenes");
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed");
  gen_cmd->add_option("--first-index", gen.first_index, "Index of the first scene");

  CodecArgs codec;
  auto* codec_cmd = app.add_subcommand("pretrain-codec", "Pretrain the shape or texture codec");
  codec_cmd->add_option("--kind", codec.kind, "shape|texture")->required();
  codec_cmd->add_option("--config", codec.config, "Run configuration (JSON)");
  codec_cmd->add_option("--out", codec.out, "Checkpoint to write")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one flow branch");
  train_cmd->add_option("--branch", tr.branch, "layout|shape|texture")->required();
  train_cmd->add_option("--data", tr.data, "Dataset file")->required();
  train_cmd->add_option("--config", tr.config, "Run configuration (JSON)");
  train_cmd->add_option("--out", tr.out, "Checkpoint to write")->required();
  train_cmd->add_option("--codec", tr.codec, "Pretrained codec checkpoint (shape and texture)");
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to resume from");
  train_cmd->add_option("--loss-out", tr.loss_out, "Loss curve file (default <out>.loss.tsv)");
  train_cmd->add_flag("--force", tr.force, "Ignore a configuration fingerprint mismatch");

  SampleArgs sa;
  auto* sample_sub = app.add_subcommand("sample", "Generate a scene for a graph");
  sample_sub->add_option("--graph", sa.graph, "Scene graph (JSON)")->required();
  sample_sub->add_option("--config", sa.config, "Run configuration (JSON)");
  sample_sub->add_option("--layout-ckpt", sa.layout_ckpt, "Layout checkpoint")->required();
  sample_sub->add_option("--shape-ckpt", sa.shape_ckpt, "Shape checkpoint");
  sample_sub->add_option("--shape-codec", sa.shape_codec, "Shape codec checkpoint");
  sample_sub->add_option("--texture-ckpt", sa.texture_ckpt, "Texture checkpoint");
  sample_sub->add_option("--texture-codec", sa.texture_codec, "Texture codec checkpoint");
  sample_sub->add_option("--k", sa.k, "Euler steps");
  sample_sub->add_option("--cfg", sa.cfg, "Guidance weight");
  sample_sub->add_option("--seed", sa.seed, "Sampling seed");
  sample_sub->add_option("--out", sa.out, "Scene file to write")->required();
  sample_sub->add_flag("--force", sa.force, "Ignore a configuration fingerprint mismatch");

  EvalArgs ev;
  auto* eval_sub = app.add_subcommand("eval", "Evaluate constraint satisfaction and shape metrics");
  eval_sub->add_option("--mode", ev.modes, "generation-only|relationship-change|node-addition (repeatable)")
      ->required();
  eval_sub->add_option("--data", ev.data, "Held-out dataset file")->required();
  eval_sub->add_option("--config", ev.config, "Run configuration (JSON)");
  eval_sub->add_option("--layout-ckpt", ev.layout_ckpt, "Layout checkpoint");
  eval_sub->add_option("--shape-ckpt", ev.shape_ckpt, "Shape checkpoint");
  eval_sub->add_option("--shape-codec", ev.shape_codec, "Shape codec checkpoint");
  eval_sub->add_option("--count", ev.count, "Use only the first N scenes");
  eval_sub->add_option("--out", ev.out, "Report file (TSV)");
  eval_sub->add_flag("--oracle", ev.oracle, "Use the dataset's own layouts");
  eval_sub->add_flag("--force", ev.force, "Ignore a configuration fingerprint mismatch");

  RenderArgs re;
  auto* render_sub = app.add_subcommand("render", "Render a scene file to SVG");
  render_sub->add_option("--scene", re.scene, "Scene file")->required();
  render_sub->add_option("--index", re.index, "Scene index within the file");
  render_sub->add_option("--out", re.out, "SVG file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen_cmd->parsed()) gen_data(gen);
    if (codec_cmd->parsed()) pretrain_codec(codec);
    if (train_cmd->parsed()) train(tr);
    if (sample_sub->parsed()) sample_cmd(sa);
    if (eval_sub->parsed()) eval_cmd(ev);
    if (render_sub->parsed()) render_cmd(re);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const TrainingError& e) {
    std::cerr << "error: training failed at step " << e.step() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
