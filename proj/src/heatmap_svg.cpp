#include "meandim/heatmap_svg.hpp"

#include <cmath>
#include <cstdio>

#include "meandim/csv.hpp"
#include "meandim/error.hpp"

namespace meandim {

std::string render_heatmap_svg(const Grid& grid, int cell_px) {
  if (grid.width < 1 || grid.height < 1) throw InvalidArgument("heatmap grid is empty");
  if (grid.values.size() != static_cast<std::size_t>(grid.width) * static_cast<std::size_t>(grid.height))
    throw InvalidArgument("heatmap grid is not rectangular: " + std::to_string(grid.values.size()) + " values for " +
                          std::to_string(grid.height) + " x " + std::to_string(grid.width));
  if (cell_px < 1) throw InvalidArgument("cell size must be positive");
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(grid.width * cell_px) +
         "\" height=\"" + std::to_string(grid.height * cell_px) + "\" viewBox=\"0 0 " + std::to_string(grid.width) +
         " " + std::to_string(grid.height) + "\" shape-rendering=\"crispEdges\">\n";
  char buf[96];
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const double v = grid.at(r, c);
      if (!(v >= 0.0 && v <= 1.0))
        throw InvalidArgument("heatmap value at (" + std::to_string(r) + ", " + std::to_string(c) +
                              ") is outside [0, 1]: " + format_double(v));
      const int g = static_cast<int>(std::lround(v * 255.0));
      std::snprintf(buf, sizeof buf, "<rect x=\"%d\" y=\"%d\" width=\"1\" height=\"1\" fill=\"#%02x%02x%02x\"/>\n", c,
                    r, g, g, g);
      out += buf;
    }
  }
  out += "</svg>\n";
  return out;
}

std::string render_heatmap_svg(const std::vector<std::vector<double>>& rows, int cell_px) {
  Grid g;
  g.height = static_cast<int>(rows.size());
  g.width = rows.empty() ? 0 : static_cast<int>(rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size())
      throw InvalidArgument("heatmap rows have different lengths (row " + std::to_string(r) + ")");
    g.values.insert(g.values.end(), rows[r].begin(), rows[r].end());
  }
  return render_heatmap_svg(g, cell_px);
}

void emit_heatmap_svg(const Grid& grid, const std::string& path, int cell_px) {
  write_text_file(path, render_heatmap_svg(grid, cell_px));
}

}  // namespace meandim
