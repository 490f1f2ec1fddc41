#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace advlab {

struct ChartSeries {
  std::string label;
  std::vector<double> xs, ys;
  std::array<uint8_t, 3> color{0, 0, 0};
};

// Minimal raster plotting: white canvas, axes with numeric tick labels,
// one polyline per series with a small legend swatch block.
void render_line_chart(const std::filesystem::path& path,
                       const std::vector<ChartSeries>& series, double y_min,
                       double y_max, int width = 640, int height = 480);

void write_png_rgb(const std::filesystem::path& path,
                   const std::vector<uint8_t>& rgb, int width, int height);

}  // namespace advlab
