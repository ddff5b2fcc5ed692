// Copyright 2026 The graphflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "graphflow/branches.hpp"

namespace graphflow {

// Top-down SVG of a scene: the room square first, then one rotated rect and
// one label per node in node order. +x points right and +z points up.
std::string render_svg(const AssembledScene& scene, double size_px = 512.0);
void write_svg(const std::filesystem::path& path, const AssembledScene& scene);

}  // namespace graphflow
