// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "graphflow/errors.hpp"
#include "graphflow/rng.hpp"

namespace graphflow {

namespace {

using Json = nlohmann::ordered_json;

// Each section lists its fields once; the same list drives reading and writing.
template <class Visit>
void fields(Visit& v, OracleConfig& c) {
  v("min_nodes", c.min_nodes);
  v("max_nodes", c.max_nodes);
  v("style_count", c.style_count);
  v("room_half_extent", c.room_half_extent);
  v("max_edges_per_node", c.max_edges_per_node);
  v("same_as_probability", c.same_as_probability);
  v("symmetric_pair_probability", c.symmetric_pair_probability);
  v("both_modalities_probability", c.both_modalities_probability);
  v("text_only_probability", c.text_only_probability);
  v("max_attempts", c.max_attempts);
  v("embed_seed", c.embed_seed);
}

template <class Visit>
void fields(Visit& v, ConstraintThresholds& c) {
  v("margin", c.margin);
  v("volume_margin", c.volume_margin);
  v("close_distance", c.close_distance);
  v("symmetry_margin", c.symmetry_margin);
  v("symmetry_axis", c.symmetry_axis);
}

template <class Visit>
void fields(Visit& v, ModelConfig& c) {
  v("gcn_layers", c.gcn_layers);
  v("gcn_hidden", c.gcn_hidden);
  v("edge_dim", c.edge_dim);
  v("condition_dim", c.condition_dim);
  v("projector_dim", c.projector_dim);
  v("time_dim", c.time_dim);
  v("denoiser_depth", c.denoiser_depth);
  v("denoiser_hidden", c.denoiser_hidden);
  v("node_attention", c.node_attention);
  v("attention_dim", c.attention_dim);
}

template <class Visit>
void fields(Visit& v, TrainConfig& c) {
  v("steps", c.steps);
  v("batch_size", c.batch_size);
  v("learning_rate", c.learning_rate);
  v("decay_fractions", c.decay_fractions);
  v("decay_factors", c.decay_factors);
  v("weight_decay", c.weight_decay);
  v("mask_ratio", c.mask_ratio);
  v("condition_dropout", c.condition_dropout);
  v("seed", c.seed);
  v("log_every", c.log_every);
  v("checkpoint_every", c.checkpoint_every);
}

template <class Visit>
void fields(Visit& v, SampleConfig& c) {
  v("steps", c.steps);
  v("guidance", c.guidance);
  v("guidance_start", c.guidance_start);
  v("guidance_end", c.guidance_end);
  v("seed", c.seed);
}

template <class Visit>
void fields(Visit& v, CodecTrainConfig& c) {
  v("steps", c.steps);
  v("batch_size", c.batch_size);
  v("learning_rate", c.learning_rate);
  v("seed", c.seed);
}

template <class Visit>
void sections(Visit& v, RunConfig& c) {
  v.section("oracle", c.oracle);
  v.section("thresholds", c.thresholds);
  v.section("model", c.model);
  v.section("train", c.train);
  v.section("sample", c.sample);
  v.section("shape_codec", c.shape_codec);
  v.section("texture_codec", c.texture_codec);
}

struct Writer {
  Json doc = Json::object();
  Json* current = nullptr;

  template <class T>
  void operator()(const char* key, const T& value) {
    (*current)[key] = value;
  }
  template <class S>
  void section(const char* name, S& s) {
    doc[name] = Json::object();
    current = &doc[name];
    fields(*this, s);
  }
};

struct Reader {
  const Json* doc = nullptr;
  const Json* current = nullptr;
  std::string where;
  std::set<std::string> seen;

  template <class T>
  void operator()(const char* key, T& value) {
    seen.insert(key);
    const auto it = current->find(key);
    if (it == current->end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ParseError(where + "." + key + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ParseError(where + "." + key + ": expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ParseError(where + "." + key + ": expected a number");
      }
      value = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + "." + key + ": " + e.what());
    }
  }

  template <class S>
  void section(const char* name, S& s) {
    const auto it = doc->find(name);
    if (it == doc->end()) return;
    if (!it->is_object()) throw ParseError(std::string("config section '") + name + "' must be an object");
    current = &*it;
    where = name;
    seen.clear();
    fields(*this, s);
    for (const auto& item : it->items()) {
      if (seen.count(item.key()) == 0) throw ParseError("unknown config key '" + where + "." + item.key() + "'");
    }
  }
};

void validate(const ConstraintThresholds& t) {
  if (t.margin < 0 || t.volume_margin < 0 || t.close_distance <= 0 || t.symmetry_margin <= 0) {
    throw ContractError("thresholds must be non-negative (distances positive)");
  }
  if (t.symmetry_axis != 0 && t.symmetry_axis != 2) throw ContractError("thresholds.symmetry_axis must be 0 or 2");
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

RunConfig parse_config(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("config must be a JSON object");
  static const std::set<std::string> known = {"oracle", "thresholds", "model", "train",
                                              "sample", "shape_codec", "texture_codec"};
  for (const auto& item : doc.items()) {
    if (known.count(item.key()) == 0) throw ParseError("unknown config section '" + item.key() + "'");
  }
  RunConfig c;
  Reader reader;
  reader.doc = &doc;
  sections(reader, c);
  c.oracle.thresholds = c.thresholds;
  validate(c.thresholds);
  validate(c.oracle);
  validate(c.model);
  validate(c.train);
  validate(c.sample);
  validate(c.shape_codec);
  validate(c.texture_codec);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_json(const RunConfig& c) {
  RunConfig copy = c;
  Writer writer;
  sections(writer, copy);
  return writer.doc.dump(2) + "\n";
}

std::string model_config_json(const ModelConfig& c) {
  ModelConfig copy = c;
  Writer writer;
  writer.section("model", copy);
  return writer.doc["model"].dump();
}

ModelConfig parse_model_config(std::string_view json) {
  return parse_config("{\"model\":" + std::string(json) + "}").model;
}

std::uint64_t model_fingerprint(const ModelConfig& c, Branch branch) {
  return hash_combine(hash_string(model_config_json(c)), hash_string(to_string(branch)));
}

std::uint64_t codec_fingerprint(std::string_view kind) {
  return hash_combine(hash_string("codec-v1"), hash_string(kind));
}

}  // namespace graphflow
