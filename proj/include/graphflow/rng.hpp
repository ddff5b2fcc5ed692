// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

#include "graphflow/tensor.hpp"

namespace graphflow {

// Counter-based generator (Philox4x32-10) keyed by (seed, stream).
//
// The whole state is (seed, stream, counter), so a generator can be saved,
// restored and re-derived without replaying earlier draws. Output depends only
// on integer arithmetic plus std::log/std::cos/std::sin for normals.
class Rng {
 public:
  struct State {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t counter = 0;

    friend bool operator==(const State&, const State&) = default;
  };

  Rng() = default;
  Rng(std::uint64_t seed, std::uint64_t stream) : state_{seed, stream, 0} {}
  explicit Rng(State state) : state_(state) {}

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double p) { return uniform() < p; }

  // Independent generator on a derived stream; does not advance this one.
  Rng fork(std::uint64_t tag) const;

  const State& state() const { return state_; }
  std::uint64_t seed() const { return state_.seed; }
  std::uint64_t stream() const { return state_.stream; }

 private:
  State state_;
};

// 64-bit mixing used to derive stream ids and hash-seeded embeddings.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);
std::uint64_t hash_string(std::string_view s);

// Row-major fill.
Matrix randn(Rng& rng, Index rows, Index cols);
Matrix rand_uniform(Rng& rng, Index rows, Index cols);

}  // namespace graphflow
