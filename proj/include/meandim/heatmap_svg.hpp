#pragma once

#include <string>
#include <vector>

#include "meandim/estimator.hpp"

namespace meandim {

/// Grayscale SVG with one rect per cell; 0 is black, 1 is white.
/// Values must lie in [0, 1]. Output bytes depend only on the input.
std::string render_heatmap_svg(const Grid& grid, int cell_px = 8);

/// Row-wise input; rows must all have the same length.
std::string render_heatmap_svg(const std::vector<std::vector<double>>& rows, int cell_px = 8);

void emit_heatmap_svg(const Grid& grid, const std::string& path, int cell_px = 8);

}  // namespace meandim
