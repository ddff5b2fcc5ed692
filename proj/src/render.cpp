// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphflow/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "graphflow/errors.hpp"

namespace graphflow {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  // avoid "-0.0000"
  if (std::string(buf) == "-0.0000") return "0.0000";
  return buf;
}

Vector3 category_color(int category) {
  static const Vector3 palette[kCategoryCount] = {
      {0.55, 0.35, 0.25}, {0.25, 0.45, 0.70}, {0.60, 0.50, 0.30},
      {0.90, 0.80, 0.30}, {0.45, 0.30, 0.55}, {0.35, 0.60, 0.40},
  };
  if (category < 0 || category >= kCategoryCount) return Vector3::Constant(kDefaultGray);
  return palette[category];
}

std::string rgb(const Vector3& c) {
  auto channel = [](double v) { return std::to_string(static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))); };
  return "rgb(" + channel(c.x()) + "," + channel(c.y()) + "," + channel(c.z()) + ")";
}

}  // namespace

std::string render_svg(const AssembledScene& scene, double size_px) {
  const double half = size_px / 2.0;
  auto sx = [&](double x) { return (x + 1.0) * half; };
  auto sy = [&](double z) { return (1.0 - z) * half; };
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + fmt(size_px) + "\" height=\"" +
         fmt(size_px) + "\" viewBox=\"0 0 " + fmt(size_px) + " " + fmt(size_px) + "\">\n";
  out += "  <rect class=\"room\" x=\"0.0000\" y=\"0.0000\" width=\"" + fmt(size_px) + "\" height=\"" + fmt(size_px) +
         "\" fill=\"white\" stroke=\"black\" stroke-width=\"2\"/>\n";
  for (std::size_t i = 0; i < scene.nodes.size(); ++i) {
    const AssembledNode& n = scene.nodes[i];
    const double cx = sx(n.location.x());
    const double cy = sy(n.location.z());
    const double w = 2.0 * n.size.x() * half;
    const double h = 2.0 * n.size.z() * half;
    Vector3 fill = category_color(n.category);
    if (n.colors.rows() > 0) {
      const Vector3 mean = n.colors.colwise().mean().transpose();
      if (!(n.colors.array() == kDefaultGray).all()) fill = mean;
    }
    const double degrees = n.yaw * 180.0 / std::numbers::pi;
    const std::string label =
        n.category >= 0 && n.category < kCategoryCount ? std::string(category_name(n.category)) : "object";
    out += "  <rect class=\"node\" data-node=\"" + std::to_string(i) + "\" x=\"" + fmt(cx - w / 2) + "\" y=\"" +
           fmt(cy - h / 2) + "\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) + "\" fill=\"" + rgb(fill) +
           "\" fill-opacity=\"0.8\" stroke=\"black\" transform=\"rotate(" + fmt(degrees) + " " + fmt(cx) + " " +
           fmt(cy) + ")\"/>\n";
    out += "  <text x=\"" + fmt(cx) + "\" y=\"" + fmt(cy) +
           "\" font-size=\"12\" text-anchor=\"middle\" dominant-baseline=\"middle\">" + label + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

void write_svg(const std::filesystem::path& path, const AssembledScene& scene) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << render_svg(scene);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace graphflow
