// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/branches.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "binary_io.hpp"
#include "graphflow/adamw.hpp"
#include "graphflow/errors.hpp"

namespace graphflow {

Matrix normalize_layout(const Matrix& layout) {
  if (layout.cols() != kLayoutDim) throw DimensionError("normalize_layout: " + shape_string(layout));
  Matrix out(layout.rows(), kLayoutDim);
  for (Index c = 0; c < kLayoutDim; ++c) {
    out.col(c) = (layout.col(c).array() - kLayoutCentre[c]) / kLayoutScale[c];
  }
  return out;
}

Matrix denormalize_layout(const Matrix& normalized) {
  if (normalized.cols() != kLayoutDim) throw DimensionError("denormalize_layout: " + shape_string(normalized));
  Matrix out(normalized.rows(), kLayoutDim);
  for (Index c = 0; c < kLayoutDim; ++c) {
    out.col(c) = normalized.col(c).array() * kLayoutScale[c] + kLayoutCentre[c];
  }
  return out;
}

DecodedLayout decode_layout(const Matrix& raw) {
  if (raw.cols() != kLayoutDim) {
    throw DimensionError("decode_layout: expected 8 columns, got " + shape_string(raw));
  }
  DecodedLayout out;
  out.rows.resize(raw.rows(), kLayoutDim);
  out.yaw.resize(raw.rows());
  for (Index i = 0; i < raw.rows(); ++i) {
    for (Index c = 0; c < 3; ++c) {
      out.rows(i, c) = std::clamp(raw(i, c), -1.0, 1.0);
      out.rows(i, 3 + c) = std::clamp(raw(i, 3 + c), kMinHalfExtent, 1.0);
    }
    double cs = raw(i, 6);
    double sn = raw(i, 7);
    const double norm = std::hypot(cs, sn);
    if (norm < 1e-8) {
      cs = 1.0;
      sn = 0.0;
    } else {
      cs /= norm;
      sn /= norm;
    }
    out.rows(i, 6) = cs;
    out.rows(i, 7) = sn;
    out.yaw(i) = std::atan2(sn, cs);
  }
  return out;
}

void validate(const CodecTrainConfig& c) {
  if (c.steps < 0) throw ContractError("codec.steps must be non-negative");
  if (c.batch_size <= 0) throw ContractError("codec.batch_size must be positive");
  if (!(c.learning_rate > 0)) throw ContractError("codec.learning_rate must be positive");
}

std::vector<VoxelGrid> shape_library(int perturbations_per_prototype, std::uint64_t seed) {
  std::vector<VoxelGrid> out;
  for (int cat = 0; cat < kCategoryCount; ++cat) {
    for (int style = 0; style < kStylesPerCategory; ++style) {
      const VoxelGrid& base = prototype(cat, style);
      out.push_back(base);
      for (int k = 0; k < perturbations_per_prototype; ++k) {
        const std::uint64_t key = hash_combine(seed, static_cast<std::uint64_t>((cat * kStylesPerCategory + style) * 1000 + k));
        out.push_back(perturb(base, key));
      }
    }
  }
  out.push_back(VoxelGrid{});
  out.push_back(VoxelGrid::full());
  return out;
}

std::uint64_t parameter_checksum(std::span<Parameter* const> params) {
  std::uint64_t h = hash_string("parameters");
  for (const Parameter* p : params) {
    h = hash_combine(h, hash_string(p->name));
    for (Index i = 0; i < p->value.size(); ++i) {
      h = hash_combine(h, std::bit_cast<std::uint64_t>(p->value.data()[i]));
    }
  }
  return h;
}

namespace {

Matrix occupancy_rows(std::span<const VoxelGrid> grids) {
  Matrix m = Matrix::Zero(static_cast<Index>(grids.size()), kVoxelCount);
  for (std::size_t r = 0; r < grids.size(); ++r) {
    for (const int v : grids[r].active()) m(static_cast<Index>(r), v) = 1.0;
  }
  return m;
}

template <class Loss>
double train_loop(ParameterList& params, const CodecTrainConfig& c, Index rows, Loss&& loss_fn) {
  validate(c);
  if (rows == 0) throw ContractError("codec pretraining needs at least one example");
  AdamWConfig opt;
  opt.learning_rate = c.learning_rate;
  opt.weight_decay = 0.0;
  AdamW optimizer(opt);
  double last = 0.0;
  for (int step = 0; step < c.steps; ++step) {
    Rng rng(c.seed, static_cast<std::uint64_t>(step));
    std::vector<Index> batch(static_cast<std::size_t>(c.batch_size));
    for (Index& b : batch) b = static_cast<Index>(rng.below(static_cast<std::uint64_t>(rows)));
    Tape tape;
    const Var loss = loss_fn(tape, batch);
    last = loss.value()(0, 0);
    if (!std::isfinite(last)) throw TrainingError("non-finite codec loss", step + 1);
    tape.backward(loss);
    optimizer.step(params);
  }
  return last;
}

Matrix gather(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

}  // namespace

ShapeCodec::ShapeCodec(std::uint64_t seed) {
  Rng rng(seed, hash_string("shape-codec"));
  encoder_ = Mlp("shape_codec.encoder", {kVoxelCount, 128, kShapeLatentDim}, rng);
  decoder_ = Mlp("shape_codec.decoder", {kShapeLatentDim, 128, kVoxelCount}, rng);
  encoder_.collect(parameters_);
  decoder_.collect(parameters_);
}

Var ShapeCodec::encode(Tape& tape, const Var& occupancy) const { return tanh(encoder_(tape, occupancy)); }
Var ShapeCodec::decode(Tape& tape, const Var& latents) const { return decoder_(tape, latents); }

Matrix ShapeCodec::encode(std::span<const VoxelGrid> grids) const {
  Tape tape;
  tape.set_grad_enabled(false);
  return encode(tape, tape.constant(occupancy_rows(grids))).value();
}

Vector ShapeCodec::encode(const VoxelGrid& grid) const {
  return encode(std::span<const VoxelGrid>(&grid, 1)).row(0).transpose();
}

Matrix ShapeCodec::decode_logits(const Matrix& latents) const {
  if (latents.cols() != kShapeLatentDim) {
    throw DimensionError("ShapeCodec: latents need 16 columns, got " + shape_string(latents));
  }
  Tape tape;
  tape.set_grad_enabled(false);
  return decode(tape, tape.constant(latents)).value();
}

std::vector<ShapeCodec::Decoded> ShapeCodec::decode(const Matrix& latents) const {
  const Matrix logits = decode_logits(latents);
  std::vector<Decoded> out(static_cast<std::size_t>(logits.rows()));
  for (Index r = 0; r < logits.rows(); ++r) {
    Decoded& d = out[static_cast<std::size_t>(r)];
    // sigmoid(x) > 0.5 exactly when x > 0
    for (int v = 0; v < kVoxelCount; ++v) {
      if (logits(r, v) > 0.0) d.grid.set(v);
    }
    d.degenerate = d.grid.empty();
  }
  return out;
}

double ShapeCodec::pretrain(std::span<const VoxelGrid> library, const CodecTrainConfig& c) {
  const Matrix occupancy = occupancy_rows(library);
  return train_loop(parameters_, c, occupancy.rows(), [&](Tape& tape, std::span<const Index> batch) {
    const Matrix x = gather(occupancy, batch);
    return bce_with_logits(decode(tape, encode(tape, tape.constant(x))), x);
  });
}

std::uint64_t ShapeCodec::checksum() const { return parameter_checksum(parameters_); }

TexturePairs texture_pairs(std::uint64_t embed_seed) {
  std::vector<Matrix> features;
  std::vector<Vector3> colors;
  Index rows = 0;
  for (int cat = 0; cat < kCategoryCount; ++cat) {
    for (int style = 0; style < kStylesPerCategory; ++style) {
      const Matrix f = object_features(cat, style, VoxelGrid::full(), embed_seed);
      rows += f.rows();
      features.push_back(f);
      colors.push_back(style_color(cat, style));
    }
  }
  TexturePairs out{Matrix(rows, kFeatureDim), Matrix(rows, 3)};
  Index at = 0;
  for (std::size_t k = 0; k < features.size(); ++k) {
    out.features.middleRows(at, features[k].rows()) = features[k];
    out.colors.middleRows(at, features[k].rows()).rowwise() = colors[k].transpose();
    at += features[k].rows();
  }
  return out;
}

TextureCodec::TextureCodec(std::uint64_t seed) {
  Rng rng(seed, hash_string("texture-codec"));
  decoder_ = Mlp("texture_codec.decoder", {kFeatureDim, 64, 64, 3}, rng);
  decoder_.collect(parameters_);
}

Matrix TextureCodec::decode(const Matrix& features) const {
  if (features.cols() != kFeatureDim) {
    throw DimensionError("TextureCodec: features need 8 columns, got " + shape_string(features));
  }
  Tape tape;
  tape.set_grad_enabled(false);
  return sigmoid(decoder_(tape, tape.constant(features))).value();
}

Matrix TextureCodec::decode(const Matrix& features, const VoxelGrid& geometry) const {
  if (features.rows() != geometry.count()) {
    throw ContractError("TextureCodec: " + std::to_string(features.rows()) + " feature rows for " +
                        std::to_string(geometry.count()) + " active voxels");
  }
  return decode(features);
}

double TextureCodec::pretrain(const TexturePairs& pairs, const CodecTrainConfig& c) {
  if (pairs.features.rows() != pairs.colors.rows()) throw ContractError("texture pairs differ in length");
  return train_loop(parameters_, c, pairs.features.rows(), [&](Tape& tape, std::span<const Index> batch) {
    const Var rgb = sigmoid(decoder_(tape, tape.constant(gather(pairs.features, batch))));
    return mse(rgb, tape.constant(gather(pairs.colors, batch)));
  });
}

std::uint64_t TextureCodec::checksum() const { return parameter_checksum(parameters_); }

int AssembledScene::degenerate_count() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const AssembledNode& n) { return n.degenerate; }));
}

Vector3 place_point(const Vector3& local, const Vector3& location, const Vector3& size, double yaw) {
  const Vector3 scaled = local.cwiseProduct(size);
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return location + Vector3(c * scaled.x() + s * scaled.z(), scaled.y(), -s * scaled.x() + c * scaled.z());
}

AssembledScene assemble(const DecodedLayout& layout, std::span<const VoxelGrid> shapes,
                        std::span<const Matrix> colors) {
  const auto n = static_cast<std::size_t>(layout.node_count());
  if (!shapes.empty() && shapes.size() != n) {
    throw ContractError("assemble: " + std::to_string(shapes.size()) + " shapes for " + std::to_string(n) + " boxes");
  }
  if (!colors.empty() && colors.size() != n) {
    throw ContractError("assemble: " + std::to_string(colors.size()) + " color sets for " + std::to_string(n) + " boxes");
  }
  AssembledScene scene;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Index>(i);
    AssembledNode node;
    node.location = layout.rows.row(row).head<3>().transpose();
    node.size = layout.rows.row(row).segment<3>(3).transpose();
    node.yaw = layout.yaw(row);
    bool use_colors = !colors.empty();
    if (shapes.empty()) {
      node.grid = VoxelGrid::full();
      use_colors = false;
    } else if (shapes[i].empty()) {
      node.grid = VoxelGrid::full();
      node.degenerate = true;
      use_colors = false;
    } else {
      node.grid = shapes[i];
    }
    const Matrix local = node.grid.points();
    node.points.resize(local.rows(), 3);
    for (Index r = 0; r < local.rows(); ++r) {
      node.points.row(r) = place_point(local.row(r).transpose(), node.location, node.size, node.yaw).transpose();
    }
    if (use_colors) {
      if (colors[i].rows() != local.rows() || colors[i].cols() != 3) {
        throw ContractError("assemble: node " + std::to_string(i) + " has colors " + shape_string(colors[i]) +
                            " for " + std::to_string(local.rows()) + " voxels");
      }
      node.colors = colors[i];
    } else {
      node.colors = Matrix::Constant(local.rows(), 3, kDefaultGray);
    }
    scene.nodes.push_back(std::move(node));
  }
  return scene;
}

AssembledScene assemble(const MultimodalGraph& graph, const DecodedLayout& layout,
                        std::span<const VoxelGrid> shapes, std::span<const Matrix> colors) {
  if (graph.node_count() != layout.node_count()) {
    throw ContractError("assemble: graph has " + std::to_string(graph.node_count()) + " nodes, layout " +
                        std::to_string(layout.node_count()));
  }
  AssembledScene scene = assemble(layout, shapes, colors);
  for (std::size_t i = 0; i < scene.nodes.size(); ++i) scene.nodes[i].category = graph.nodes[i].category;
  return scene;
}

namespace {

constexpr std::string_view kSceneMagic = "GFAS";
constexpr std::uint32_t kSceneVersion = 1;

std::string encode_scene(const AssembledScene& scene) {
  binary::Writer w;
  w.u32(static_cast<std::uint32_t>(scene.nodes.size()));
  for (const AssembledNode& n : scene.nodes) {
    w.u32(static_cast<std::uint32_t>(n.category));
    for (Index k = 0; k < 3; ++k) w.f64(n.location(k));
    for (Index k = 0; k < 3; ++k) w.f64(n.size(k));
    w.f64(n.yaw);
    w.u8(n.degenerate ? 1 : 0);
    w.grid(n.grid);
    w.matrix(n.points);
    w.matrix(n.colors);
  }
  return w.take();
}

AssembledScene decode_scene(binary::Reader& r) {
  AssembledScene scene;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    AssembledNode n;
    n.category = static_cast<int>(r.u32());
    for (Index k = 0; k < 3; ++k) n.location(k) = r.f64();
    for (Index k = 0; k < 3; ++k) n.size(k) = r.f64();
    n.yaw = r.f64();
    n.degenerate = r.u8() != 0;
    n.grid = r.grid();
    n.points = r.matrix();
    n.colors = r.matrix();
    if (n.points.rows() != n.grid.count() || n.colors.rows() != n.grid.count()) {
      r.fail("node " + std::to_string(i) + " point count does not match its grid");
    }
    scene.nodes.push_back(std::move(n));
  }
  return scene;
}

}  // namespace

void write_scenes(const std::filesystem::path& path, std::span<const AssembledScene> scenes) {
  binary::Writer w;
  w.bytes(kSceneMagic);
  w.u32(kSceneVersion);
  w.u64(scenes.size());
  for (const AssembledScene& s : scenes) {
    const std::string record = encode_scene(s);
    w.u64(record.size());
    w.bytes(record);
  }
  binary::write_file(path, w.data());
}

std::vector<AssembledScene> read_scenes(const std::filesystem::path& path) {
  const std::string data = binary::read_file(path);
  binary::Reader r(data, path.string());
  if (r.bytes(4) != kSceneMagic) r.fail("not a GFAS scene file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kSceneVersion) r.fail("unsupported GFAS version " + std::to_string(version));
  const std::uint64_t count = r.u64();
  std::vector<AssembledScene> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t length = r.u64();
    const std::size_t start = r.position();
    out.push_back(decode_scene(r));
    if (r.position() - start != length) r.fail("record " + std::to_string(i) + " length mismatch");
  }
  if (!r.done()) r.fail("trailing bytes after the last record");
  return out;
}

}  // namespace graphflow
