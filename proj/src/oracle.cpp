// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "binary_io.hpp"
#include "graphflow/errors.hpp"

namespace graphflow {

void validate(const OracleConfig& c) {
  if (c.min_nodes < 1 || c.max_nodes < c.min_nodes) {
    throw ValidationError("oracle: node range must satisfy 1 <= min_nodes <= max_nodes");
  }
  if (c.style_count < 1 || c.style_count > kStylesPerCategory) {
    throw ValidationError("oracle: style_count must lie in [1, 4]");
  }
  if (c.room_half_extent <= 0.0 || c.room_half_extent > 1.0) {
    throw ValidationError("oracle: room_half_extent must lie in (0, 1]");
  }
  if (c.max_edges_per_node < 0) throw ValidationError("oracle: max_edges_per_node must be >= 0");
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError(std::string("oracle: ") + name + " must lie in [0, 1]");
    }
  };
  prob(c.same_as_probability, "same_as_probability");
  prob(c.symmetric_pair_probability, "symmetric_pair_probability");
  prob(c.both_modalities_probability, "both_modalities_probability");
  prob(c.text_only_probability, "text_only_probability");
  if (c.both_modalities_probability + c.text_only_probability > 1.0) {
    throw ValidationError("oracle: modality probabilities sum above 1");
  }
  if (c.max_attempts < 1) throw ValidationError("oracle: max_attempts must be >= 1");
}

// ---------------------------------------------------------------------------
// Shape library

namespace {

void legs(VoxelGrid& g, int top) {
  g.fill(0, 0, 0, top, 0, 0);
  g.fill(7, 7, 0, top, 0, 0);
  g.fill(0, 0, 0, top, 7, 7);
  g.fill(7, 7, 0, top, 7, 7);
}

VoxelGrid make_prototype(int category, int style) {
  VoxelGrid g;
  switch (category) {
    case 0:  // bed
      switch (style) {
        case 0: g.fill(0, 7, 0, 2, 0, 7); break;
        case 1: g.fill(0, 7, 0, 2, 0, 7); g.fill(0, 7, 3, 6, 0, 0); break;
        case 2: g.fill(0, 7, 2, 3, 0, 7); legs(g, 6); break;
        default: g.fill(0, 7, 0, 2, 0, 7); g.fill(0, 7, 3, 7, 0, 1); g.fill(0, 7, 3, 4, 7, 7); break;
      }
      break;
    case 1:  // chair
      switch (style) {
        case 0: g.fill(0, 7, 3, 4, 0, 7); g.fill(0, 7, 5, 7, 0, 1); legs(g, 2); break;
        case 1: g.fill(0, 7, 0, 3, 0, 7); g.fill(0, 7, 4, 7, 0, 2); break;
        case 2: g.fill(0, 7, 4, 5, 0, 7); legs(g, 3); break;
        default:
          g.fill(0, 7, 0, 3, 0, 7); g.fill(0, 7, 4, 7, 0, 1);
          g.fill(0, 1, 4, 5, 0, 7); g.fill(6, 7, 4, 5, 0, 7);
          break;
      }
      break;
    case 2:  // table
      switch (style) {
        case 0: g.fill(0, 7, 6, 7, 0, 7); legs(g, 5); break;
        case 1: g.fill(0, 7, 6, 7, 0, 7); g.fill(3, 4, 1, 5, 3, 4); g.fill(1, 6, 0, 0, 1, 6); break;
        case 2: g.fill(0, 7, 4, 7, 0, 7); g.fill(2, 5, 0, 3, 2, 5); break;
        default: g.fill(0, 7, 6, 7, 0, 7); g.fill(0, 0, 0, 5, 0, 7); g.fill(7, 7, 0, 5, 0, 7); break;
      }
      break;
    case 3:  // lamp
      switch (style) {
        case 0: g.fill(3, 4, 0, 5, 3, 4); g.fill(1, 6, 6, 7, 1, 6); break;
        case 1: g.fill(3, 4, 1, 7, 3, 4); g.fill(1, 6, 0, 0, 1, 6); break;
        case 2:
          g.fill(0, 7, 0, 1, 0, 7); g.fill(1, 6, 2, 3, 1, 6);
          g.fill(2, 5, 4, 5, 2, 5); g.fill(3, 4, 6, 7, 3, 4);
          break;
        default: g.fill(2, 5, 0, 7, 2, 5); g.fill(1, 6, 0, 7, 3, 4); g.fill(3, 4, 0, 7, 1, 6); break;
      }
      break;
    case 4:  // wardrobe
      switch (style) {
        case 0: g = VoxelGrid::full(); break;
        case 1: g = VoxelGrid::full(); g.fill(1, 6, 1, 6, 6, 7, false); break;
        case 2: g.fill(0, 2, 0, 7, 0, 7); g.fill(5, 7, 0, 7, 0, 7); g.fill(0, 7, 7, 7, 0, 7); break;
        default: g.fill(0, 7, 0, 7, 0, 3); g.fill(0, 3, 0, 7, 4, 7); break;
      }
      break;
    default:  // shelf
      switch (style) {
        case 0:
          g.fill(0, 0, 0, 7, 0, 7); g.fill(7, 7, 0, 7, 0, 7);
          g.fill(0, 7, 0, 0, 0, 7); g.fill(0, 7, 3, 3, 0, 7); g.fill(0, 7, 7, 7, 0, 7);
          break;
        case 1:
          g.fill(0, 0, 0, 7, 3, 4); g.fill(7, 7, 0, 7, 3, 4);
          for (int y = 1; y < 8; y += 2) g.fill(0, 7, y, y, 3, 4);
          break;
        case 2: g.fill(0, 7, 0, 7, 0, 7); g.fill(1, 6, 1, 6, 1, 7, false); break;
        default: g.fill(0, 7, 0, 7, 0, 1); break;
      }
      break;
  }
  return g;
}

struct PrototypeLibrary {
  std::array<VoxelGrid, kCategoryCount * kStylesPerCategory> grids;
  PrototypeLibrary() {
    for (int c = 0; c < kCategoryCount; ++c) {
      for (int s = 0; s < kStylesPerCategory; ++s) grids[static_cast<std::size_t>(c * kStylesPerCategory + s)] = make_prototype(c, s);
    }
  }
};

}  // namespace

const VoxelGrid& prototype(int category, int style) {
  static const PrototypeLibrary library;
  if (category < 0 || category >= kCategoryCount || style < 0 || style >= kStylesPerCategory) {
    throw VocabularyError("no prototype for category " + std::to_string(category) + ", style " +
                          std::to_string(style));
  }
  return library.grids[static_cast<std::size_t>(category * kStylesPerCategory + style)];
}

VoxelGrid perturb(const VoxelGrid& base, std::uint64_t seed) {
  std::vector<int> boundary;
  for (int i = 0; i < kVoxelCount; ++i) {
    const int x = i % kGridSize;
    const int y = (i / kGridSize) % kGridSize;
    const int z = i / (kGridSize * kGridSize);
    const bool self = base.test(i);
    const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    bool differs = false;
    for (const auto& d : nb) {
      // Outside the grid counts as empty.
      if (base.at(x + d[0], y + d[1], z + d[2]) != self) differs = true;
    }
    if (differs) boundary.push_back(i);
  }
  VoxelGrid out = base;
  Rng rng(seed, hash_string("perturb"));
  const int flips = static_cast<int>(rng.below(3));
  for (int k = 0; k < flips && !boundary.empty(); ++k) {
    const std::size_t pick = rng.below(boundary.size());
    out.flip(boundary[pick]);
    boundary.erase(boundary.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Appearance ground truth

namespace {

Vector style_code(int category, int style, std::uint64_t embed_seed) {
  const Vector head = synth_embed(category, style, embed_seed).vision.head(kFeatureDim);
  return head * (std::sqrt(static_cast<double>(kFeatureDim)) / head.norm());
}

}  // namespace

Vector voxel_feature(int category, int style, int voxel_index, std::uint64_t embed_seed) {
  Vector f = style_code(category, style, embed_seed);
  Rng rng(embed_seed, hash_combine(hash_string("voxel-position"), static_cast<std::uint64_t>(voxel_index)));
  for (Index k = 0; k < kFeatureDim; ++k) f(k) += 0.1 * (2.0 * rng.uniform() - 1.0);
  return f;
}

Matrix object_features(int category, int style, const VoxelGrid& grid, std::uint64_t embed_seed) {
  const std::vector<int> idx = grid.active();
  Matrix out(static_cast<Index>(idx.size()), kFeatureDim);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.row(static_cast<Index>(r)) = voxel_feature(category, style, idx[r], embed_seed).transpose();
  }
  return out;
}

Vector3 style_color(int category, int style) {
  Rng rng(0xC0102u, hash_combine(static_cast<std::uint64_t>(category), static_cast<std::uint64_t>(style)));
  Vector3 c;
  for (int k = 0; k < 3; ++k) c(k) = 0.15 + 0.7 * rng.uniform();
  return c;
}

bool relation_holds(const SceneSample& sample, const Edge& e, const ConstraintThresholds& th) {
  if (e.predicate == Predicate::SameAs) {
    const auto n = sample.shapes.size();
    if (e.source < 0 || e.target < 0 || static_cast<std::size_t>(e.source) >= n ||
        static_cast<std::size_t>(e.target) >= n) {
      throw ContractError("relation_holds: edge endpoints out of range");
    }
    return sample.shapes[static_cast<std::size_t>(e.source)] ==
           sample.shapes[static_cast<std::size_t>(e.target)];
  }
  return check_constraint(e.predicate, sample.layout, e.source, e.target, th);
}

// ---------------------------------------------------------------------------
// Scene generation

namespace {

struct SizeRange {
  double lo[3];
  double hi[3];
};

constexpr std::array<SizeRange, kCategoryCount> kSizes = {{
    {{0.25, 0.12, 0.30}, {0.35, 0.20, 0.40}},  // bed
    {{0.08, 0.15, 0.08}, {0.12, 0.22, 0.12}},  // chair
    {{0.15, 0.12, 0.12}, {0.30, 0.18, 0.20}},  // table
    {{0.05, 0.25, 0.05}, {0.08, 0.40, 0.08}},  // lamp
    {{0.20, 0.35, 0.10}, {0.30, 0.50, 0.15}},  // wardrobe
    {{0.12, 0.25, 0.06}, {0.20, 0.40, 0.10}},  // shelf
}};

struct Placed {
  int category;
  int style;
  VoxelGrid shape;
  Vector3 t;
  Vector3 s;
  double yaw;
};

// Half extents of the yaw-rotated footprint along x and z.
std::pair<double, double> footprint(const Vector3& s, double yaw) {
  const double c = std::abs(std::cos(yaw));
  const double n = std::abs(std::sin(yaw));
  return {c * s.x() + n * s.z(), n * s.x() + c * s.z()};
}

bool collides(const Placed& a, const std::vector<Placed>& others) {
  const auto [ax, az] = footprint(a.s, a.yaw);
  for (const Placed& b : others) {
    const auto [bx, bz] = footprint(b.s, b.yaw);
    const bool apart_x = std::abs(a.t.x() - b.t.x()) >= ax + bx;
    const bool apart_z = std::abs(a.t.z() - b.t.z()) >= az + bz;
    if (!apart_x && !apart_z) return true;
  }
  return false;
}

bool inside_room(const Placed& a, double room) {
  const auto [ex, ez] = footprint(a.s, a.yaw);
  return std::abs(a.t.x()) + ex <= room && std::abs(a.t.z()) + ez <= room;
}

double snap_yaw(std::uint64_t quarter) {
  // Exact values for the four cardinal headings.
  constexpr std::array<double, 4> kYaw = {0.0, std::numbers::pi / 2, std::numbers::pi,
                                          -std::numbers::pi / 2};
  return kYaw[quarter % 4];
}

// Heading of the mirror image; stays on the four cardinal values.
double mirrored_yaw(double yaw, int axis) {
  const bool quarter = std::abs(std::abs(yaw) - std::numbers::pi / 2) < 1e-12;
  if (axis == 0) {
    if (quarter) return yaw;
    return yaw == 0.0 ? std::numbers::pi : 0.0;
  }
  if (quarter) return -yaw;
  return yaw;
}

}  // namespace

SceneSample generate_scene(const OracleConfig& config, Rng& rng) {
  validate(config);
  const double room = config.room_half_extent;
  const int n = config.min_nodes +
                static_cast<int>(rng.below(static_cast<std::uint64_t>(config.max_nodes - config.min_nodes + 1)));
  std::vector<Placed> placed;
  std::vector<bool> twinned;
  int attempts = 0;

  auto place_randomly = [&](Placed obj) {
    const auto [ex, ez] = footprint(obj.s, obj.yaw);
    while (true) {
      if (++attempts > config.max_attempts) {
        throw GenerationError("rejection sampling exceeded " + std::to_string(config.max_attempts) +
                              " attempts placing " + std::to_string(n) + " objects");
      }
      obj.t = {(2.0 * rng.uniform() - 1.0) * (room - ex), -room + obj.s.y(),
               (2.0 * rng.uniform() - 1.0) * (room - ez)};
      if (inside_room(obj, room) && !collides(obj, placed)) return obj;
    }
  };

  for (int k = 0; k < n; ++k) {
    const double kind = rng.uniform();
    const double twin_cut = config.symmetric_pair_probability;
    const double copy_cut = twin_cut + config.same_as_probability;
    if (k > 0 && kind < copy_cut) {
      const std::size_t src = rng.below(placed.size());
      Placed obj = placed[src];
      bool done = false;
      if (kind < twin_cut && !twinned[src]) {
        Placed twin = obj;
        twin.t(config.thresholds.symmetry_axis) = -obj.t(config.thresholds.symmetry_axis);
        twin.yaw = mirrored_yaw(obj.yaw, config.thresholds.symmetry_axis);
        if (inside_room(twin, room) && !collides(twin, placed)) {
          placed.push_back(twin);
          twinned[src] = true;
          twinned.push_back(true);
          done = true;
        }
      }
      if (!done) {
        obj.yaw = snap_yaw(rng.below(4));
        placed.push_back(place_randomly(obj));
        twinned.push_back(false);
      }
      continue;
    }
    Placed obj;
    obj.category = static_cast<int>(rng.below(kCategoryCount));
    obj.style = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.style_count)));
    obj.shape = perturb(prototype(obj.category, obj.style), rng.next_u64());
    const SizeRange& range = kSizes[static_cast<std::size_t>(obj.category)];
    for (int a = 0; a < 3; ++a) obj.s(a) = range.lo[a] + (range.hi[a] - range.lo[a]) * rng.uniform();
    obj.yaw = snap_yaw(rng.below(4));
    placed.push_back(place_randomly(obj));
    twinned.push_back(false);
  }

  SceneSample sample;
  sample.layout.resize(n, kLayoutDim);
  for (int i = 0; i < n; ++i) {
    const Placed& p = placed[static_cast<std::size_t>(i)];
    sample.layout.row(i) << p.t.x(), p.t.y(), p.t.z(), p.s.x(), p.s.y(), p.s.z(), std::cos(p.yaw),
        std::sin(p.yaw);
    const double m = rng.uniform();
    Modality modality{true, true};
    if (m >= config.both_modalities_probability) {
      modality = m < config.both_modalities_probability + config.text_only_probability
                     ? Modality{true, false}
                     : Modality{false, true};
    }
    sample.graph.nodes.push_back(make_node(p.category, p.style, modality, config.embed_seed));
    sample.shapes.push_back(p.shape);
    sample.features.push_back(object_features(p.category, p.style, p.shape, config.embed_seed));
  }

  // Relations read off the geometry, then thinned to the per-node budget.
  constexpr std::array<Predicate, 10> kSpatial = {
      Predicate::LeftOf,      Predicate::RightOf,     Predicate::FrontOf,    Predicate::Behind,
      Predicate::SmallerThan, Predicate::BiggerThan,  Predicate::TallerThan, Predicate::ShorterThan,
      Predicate::CloseBy,     Predicate::SymmetricalTo};
  std::vector<Edge> candidates;
  std::vector<Edge> same_as;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (sample.shapes[static_cast<std::size_t>(i)] == sample.shapes[static_cast<std::size_t>(j)]) {
        same_as.push_back({i, j, Predicate::SameAs});
      }
      for (const Predicate p : kSpatial) {
        if (check_constraint(p, sample.layout, i, j, config.thresholds)) candidates.push_back({i, j, p});
      }
    }
  }
  for (std::size_t k = candidates.size(); k > 1; --k) {
    std::swap(candidates[k - 1], candidates[rng.below(k)]);
  }
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  sample.graph.edges = same_as;
  for (const Edge& e : candidates) {
    auto& ds = degree[static_cast<std::size_t>(e.source)];
    auto& dt = degree[static_cast<std::size_t>(e.target)];
    if (ds < config.max_edges_per_node && dt < config.max_edges_per_node) {
      sample.graph.edges.push_back(e);
      ++ds;
      ++dt;
    }
  }
  sample.graph = normalized(std::move(sample.graph));
  return sample;
}

SceneSample generate_indexed_scene(const OracleConfig& config, std::uint64_t seed,
                                   std::uint64_t index) {
  OracleConfig attempt = config;
  for (int retry = 0;; ++retry) {
    Rng rng(seed, hash_combine(index, static_cast<std::uint64_t>(retry)));
    try {
      return generate_scene(attempt, rng);
    } catch (const GenerationError&) {
      if (attempt.max_nodes <= 1) throw;
      attempt.max_nodes -= 1;
      attempt.min_nodes = std::min(attempt.min_nodes, attempt.max_nodes);
    }
  }
}

std::vector<SceneSample> generate_dataset(const OracleConfig& config, std::uint64_t seed,
                                          std::size_t count, std::uint64_t first_index) {
  std::vector<SceneSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_indexed_scene(config, seed, first_index + i));
  return out;
}

// ---------------------------------------------------------------------------
// GFSD files

namespace {

constexpr std::string_view kDatasetMagic = "GFSD";
constexpr std::uint32_t kDatasetVersion = 1;

std::string encode_sample(const SceneSample& s) {
  binary::Writer w;
  w.graph(s.graph);
  for (Index i = 0; i < s.node_count(); ++i) {
    for (Index k = 0; k < kLayoutDim; ++k) w.f64(s.layout(i, k));
  }
  for (const VoxelGrid& g : s.shapes) w.grid(g);
  for (const Matrix& f : s.features) {
    w.u32(static_cast<std::uint32_t>(f.rows()));
    for (Index r = 0; r < f.rows(); ++r) {
      for (Index k = 0; k < kFeatureDim; ++k) w.f64(f(r, k));
    }
  }
  return w.take();
}

SceneSample decode_sample(binary::Reader& r) {
  SceneSample s;
  s.graph = r.graph();
  const Index n = s.graph.node_count();
  s.layout.resize(n, kLayoutDim);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < kLayoutDim; ++k) s.layout(i, k) = r.f64();
  }
  for (Index i = 0; i < n; ++i) s.shapes.push_back(r.grid());
  for (Index i = 0; i < n; ++i) {
    const std::uint32_t rows = r.u32();
    if (static_cast<int>(rows) != s.shapes[static_cast<std::size_t>(i)].count()) {
      r.fail("feature rows do not match the active voxel count of node " + std::to_string(i));
    }
    Matrix f(rows, kFeatureDim);
    for (Index row = 0; row < f.rows(); ++row) {
      for (Index k = 0; k < kFeatureDim; ++k) f(row, k) = r.f64();
    }
    s.features.push_back(std::move(f));
  }
  return s;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, std::span<const SceneSample> samples) {
  binary::Writer w;
  w.bytes(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u64(samples.size());
  for (const SceneSample& s : samples) {
    const std::string record = encode_sample(s);
    w.u64(record.size());
    w.bytes(record);
  }
  binary::write_file(path, w.data());
}

std::vector<SceneSample> read_dataset(const std::filesystem::path& path) {
  const std::string data = binary::read_file(path);
  binary::Reader r(data, path.string());
  if (r.bytes(4) != kDatasetMagic) r.fail("not a GFSD dataset (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) r.fail("unsupported GFSD version " + std::to_string(version));
  const std::uint64_t count = r.u64();
  std::vector<SceneSample> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t length = r.u64();
    const std::size_t start = r.position();
    out.push_back(decode_sample(r));
    if (r.position() - start != length) r.fail("record " + std::to_string(i) + " length mismatch");
  }
  if (!r.done()) r.fail("trailing bytes after the last record");
  return out;
}

}  // namespace graphflow
