// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "binary_io.hpp"
#include "graphflow/config.hpp"
#include "graphflow/errors.hpp"
#include "graphflow/flow.hpp"

namespace graphflow {

namespace {

constexpr std::string_view kCheckpointMagic = "GFCK";
constexpr std::uint32_t kCheckpointVersion = 1;

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

}  // namespace

bool identical(const Checkpoint& a, const Checkpoint& b) {
  if (a.fingerprint != b.fingerprint || a.metadata != b.metadata || a.optimizer_steps != b.optimizer_steps ||
      !(a.rng == b.rng) || a.step != b.step || a.tensors.size() != b.tensors.size() ||
      a.moments.size() != b.moments.size()) {
    return false;
  }
  for (auto ia = a.tensors.begin(), ib = b.tensors.begin(); ia != a.tensors.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !same_bits(ia->second, ib->second)) return false;
  }
  for (auto ia = a.moments.begin(), ib = b.moments.begin(); ia != a.moments.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !same_bits(ia->second.first, ib->second.first) ||
        !same_bits(ia->second.second, ib->second.second)) {
      return false;
    }
  }
  return true;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  binary::Writer w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u64(c.fingerprint);
  w.u32(static_cast<std::uint32_t>(c.metadata.size()));
  for (const auto& [key, value] : c.metadata) {
    w.str(key);
    w.str(value);
  }
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, m] : c.tensors) {
    w.str(name);
    w.matrix(m);
  }
  w.u64(static_cast<std::uint64_t>(c.optimizer_steps));
  w.u32(static_cast<std::uint32_t>(c.moments.size()));
  for (const auto& [name, m] : c.moments) {
    w.str(name);
    w.matrix(m.first);
    w.matrix(m.second);
  }
  w.u64(c.rng.seed);
  w.u64(c.rng.stream);
  w.u64(c.rng.counter);
  w.u64(static_cast<std::uint64_t>(c.step));
  binary::write_file(path, w.data());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string data = binary::read_file(path);
  binary::Reader r(data, path.string());
  if (r.bytes(4) != kCheckpointMagic) r.fail("not a GFCK checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported GFCK version " + std::to_string(version));
  Checkpoint c;
  c.fingerprint = r.u64();
  const std::uint32_t entries = r.u32();
  for (std::uint32_t i = 0; i < entries; ++i) {
    std::string key = r.str();
    c.metadata[key] = r.str();
  }
  const std::uint32_t tensors = r.u32();
  for (std::uint32_t i = 0; i < tensors; ++i) {
    std::string name = r.str();
    c.tensors[name] = r.matrix();
  }
  c.optimizer_steps = static_cast<std::int64_t>(r.u64());
  const std::uint32_t moments = r.u32();
  for (std::uint32_t i = 0; i < moments; ++i) {
    std::string name = r.str();
    AdamW::Moments m;
    m.first = r.matrix();
    m.second = r.matrix();
    c.moments[name] = std::move(m);
  }
  c.rng.seed = r.u64();
  c.rng.stream = r.u64();
  c.rng.counter = r.u64();
  c.step = static_cast<std::int64_t>(r.u64());
  if (!r.done()) r.fail("trailing bytes after the checkpoint");
  return c;
}

void check_fingerprint(const Checkpoint& c, std::uint64_t expected, bool force) {
  if (c.fingerprint == expected || force) return;
  throw ValidationError("checkpoint fingerprint " + std::to_string(c.fingerprint) +
                        " does not match the configuration (" + std::to_string(expected) +
                        "); pass --force to load anyway");
}

void check_metadata(const Checkpoint& c, const std::string& key, const std::string& value) {
  const auto it = c.metadata.find(key);
  const std::string found = it == c.metadata.end() ? "<missing>" : it->second;
  if (found != value) {
    throw ValidationError("checkpoint " + key + " is '" + found + "', expected '" + value + "'");
  }
}

void store_parameters(Checkpoint& c, std::span<Parameter* const> params) {
  for (const Parameter* p : params) {
    if (!c.tensors.emplace(p->name, p->value).second) {
      throw ContractError("duplicate parameter name '" + p->name + "'");
    }
  }
}

void load_parameters(const Checkpoint& c, std::span<Parameter* const> params) {
  if (c.tensors.size() != params.size()) {
    throw ValidationError("checkpoint holds " + std::to_string(c.tensors.size()) + " tensors, model has " +
                          std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    const auto it = c.tensors.find(p->name);
    if (it == c.tensors.end()) throw ValidationError("checkpoint is missing tensor '" + p->name + "'");
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw ValidationError("tensor '" + p->name + "' has shape " + shape_string(it->second) + ", model expects " +
                            shape_string(p->value));
    }
  }
  for (Parameter* p : params) {
    p->value = c.tensors.at(p->name);
    p->zero_grad();
  }
}

Checkpoint training_checkpoint(FlowTrainer& trainer, std::uint64_t fingerprint) {
  Checkpoint c;
  c.fingerprint = fingerprint;
  c.metadata["kind"] = "flow";
  c.metadata["branch"] = std::string(to_string(trainer.model().branch()));
  c.metadata["model"] = model_config_json(trainer.model().config());
  store_parameters(c, trainer.model().parameters());
  c.optimizer_steps = trainer.optimizer().step_count();
  c.moments = trainer.optimizer().moments();
  c.step = trainer.steps_done();
  c.rng = trainer.step_rng(c.step).state();
  return c;
}

void resume_training(FlowTrainer& trainer, const Checkpoint& c) {
  check_metadata(c, "kind", "flow");
  check_metadata(c, "branch", std::string(to_string(trainer.model().branch())));
  if (c.step != c.optimizer_steps) throw ValidationError("checkpoint step and optimizer step disagree");
  if (!(c.rng == trainer.step_rng(c.step).state())) {
    throw ValidationError("checkpoint RNG state does not match the training seed");
  }
  load_parameters(c, trainer.model().parameters());
  trainer.optimizer().restore(c.optimizer_steps, c.moments);
}

}  // namespace graphflow
