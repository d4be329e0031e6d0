// Copyright 2026 The fmlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal raster figures written as PNG: scatter panels and line charts.
// There is no text rendering; captions live in the CSVs next to each image.

#ifndef FMLAB_TOOLS_PLOT_HPP_
#define FMLAB_TOOLS_PLOT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "fmlab/tensor.hpp"

namespace fmlab::plot {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

// Distinct colors for series or class ids.
Rgb palette(std::size_t i);

// One square panel per cloud, laid out left to right over
// [-extent, extent]^2. Rows with a class id are colored by class.
struct ScatterPanel {
  Tensor points;
  std::vector<int> labels;  // empty: one color
};
void scatter_png(const std::string& path, const std::vector<ScatterPanel>& panels,
                 double extent, int panel_px = 320);

struct Series {
  std::vector<double> y;  // x is the index
  Rgb color;
};
// Non-finite and, with log_y, non-positive values leave gaps.
void line_png(const std::string& path, const std::vector<Series>& series, bool log_y,
              int width = 640, int height = 400);

}  // namespace fmlab::plot

#endif  // FMLAB_TOOLS_PLOT_HPP_
