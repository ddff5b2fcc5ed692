// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "binary_io.hpp"

#include <fstream>
#include <sstream>

namespace graphflow::binary {

void Writer::matrix(const Matrix& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
}

void Writer::grid(const VoxelGrid& g) {
  for (int byte = 0; byte < kVoxelCount / 8; ++byte) {
    std::uint8_t v = 0;
    for (int bit = 0; bit < 8; ++bit) {
      if (g.test(byte * 8 + bit)) v = static_cast<std::uint8_t>(v | (1u << bit));
    }
    u8(v);
  }
}

void Writer::graph(const MultimodalGraph& g) {
  u32(static_cast<std::uint32_t>(g.nodes.size()));
  for (const NodeSpec& n : g.nodes) {
    u32(static_cast<std::uint32_t>(n.category));
    u32(static_cast<std::uint32_t>(n.style));
    u8(static_cast<std::uint8_t>((n.modality.text ? 1u : 0u) | (n.modality.image ? 2u : 0u)));
    for (Index i = 0; i < kTextDim; ++i) f64(n.text(i));
    for (Index i = 0; i < kVisionDim; ++i) f64(n.vision(i));
  }
  u32(static_cast<std::uint32_t>(g.edges.size()));
  for (const Edge& e : g.edges) {
    u32(static_cast<std::uint32_t>(e.source));
    u32(static_cast<std::uint32_t>(e.target));
    u8(static_cast<std::uint8_t>(e.predicate));
  }
}

void Reader::fail(const std::string& what) const {
  throw ParseError(context_ + " at byte " + std::to_string(pos_) + ": " + what);
}

std::string_view Reader::bytes(std::size_t n) {
  if (n > data_.size() - pos_) fail("unexpected end of data (needed " + std::to_string(n) + " bytes)");
  const std::string_view out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t Reader::u32() {
  const std::string_view b = bytes(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

std::uint64_t Reader::u64() {
  const std::string_view b = bytes(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

std::string Reader::str() {
  const std::uint32_t n = u32();
  return std::string(bytes(n));
}

Matrix Reader::matrix() {
  const std::uint64_t rows = u64();
  const std::uint64_t cols = u64();
  if (rows > (1u << 24) || cols > (1u << 24) || rows * cols * 8 > data_.size() - pos_) {
    fail("implausible matrix shape " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
  }
  return m;
}

VoxelGrid Reader::grid() {
  VoxelGrid g;
  for (int byte = 0; byte < kVoxelCount / 8; ++byte) {
    const std::uint8_t v = u8();
    for (int bit = 0; bit < 8; ++bit) {
      if ((v >> bit) & 1u) g.set(byte * 8 + bit);
    }
  }
  return g;
}

MultimodalGraph Reader::graph() {
  MultimodalGraph g;
  const std::uint32_t n = u32();
  if (n > 1'000'000) fail("implausible node count " + std::to_string(n));
  for (std::uint32_t i = 0; i < n; ++i) {
    NodeSpec node;
    node.category = static_cast<int>(u32());
    node.style = static_cast<int>(u32());
    const std::uint8_t m = u8();
    if (m > 3) fail("bad modality bits " + std::to_string(m));
    node.modality = {(m & 1u) != 0, (m & 2u) != 0};
    for (Index k = 0; k < kTextDim; ++k) node.text(k) = f64();
    for (Index k = 0; k < kVisionDim; ++k) node.vision(k) = f64();
    g.nodes.push_back(std::move(node));
  }
  const std::uint32_t e = u32();
  for (std::uint32_t i = 0; i < e; ++i) {
    Edge edge;
    edge.source = static_cast<int>(u32());
    edge.target = static_cast<int>(u32());
    const std::uint8_t p = u8();
    if (p >= kPredicateCount) fail("unknown predicate code " + std::to_string(p));
    edge.predicate = static_cast<Predicate>(p);
    g.edges.push_back(edge);
  }
  try {
    validate(g);
  } catch (const ValidationError& err) {
    fail(std::string("invalid graph: ") + err.what());
  }
  return g;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace graphflow::binary
