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

#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include <png.h>

#include "fmlab/errors.hpp"

namespace fmlab::plot {
namespace {

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3, 255) {}

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    unsigned char* p = &px_[(static_cast<std::size_t>(y) * w_ + x) * 3];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  void dot(int x, int y, Rgb c) {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (dx * dx + dy * dy <= 1) set(x + dx, y + dy, c);
  }

  // Bresenham.
  void line(int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) err += dy, x0 += sx;
      if (e2 <= dx) err += dx, y0 += sy;
    }
  }

  void frame(int x0, int y0, int x1, int y1, Rgb c) {
    line(x0, y0, x1, y0, c);
    line(x1, y0, x1, y1, c);
    line(x1, y1, x0, y1, c);
    line(x0, y1, x0, y0, c);
  }

  void write(const std::string& path) const {
    std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!f) throw Error("cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw Error("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw Error("libpng failed writing " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, w_, h_, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h_; ++y)
      png_write_row(png, const_cast<png_bytep>(&px_[static_cast<std::size_t>(y) * w_ * 3]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }

 private:
  int w_, h_;
  std::vector<unsigned char> px_;
};

constexpr Rgb kAxis{90, 90, 90};
constexpr Rgb kGrid{225, 225, 225};

}  // namespace

Rgb palette(std::size_t i) {
  static constexpr Rgb kColors[] = {{31, 119, 180}, {214, 39, 40},  {44, 160, 44},
                                    {255, 127, 14}, {148, 103, 189}, {140, 86, 75},
                                    {227, 119, 194}, {23, 190, 207}};
  return kColors[i % std::size(kColors)];
}

void scatter_png(const std::string& path, const std::vector<ScatterPanel>& panels, double extent,
                 int panel_px) {
  if (panels.empty()) throw DomainError("scatter_png: no panels");
  const int pad = 8;
  Canvas canvas(static_cast<int>(panels.size()) * (panel_px + pad) + pad, panel_px + 2 * pad);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const int ox = pad + static_cast<int>(p) * (panel_px + pad), oy = pad;
    const auto to_px = [&](double v) { return (v + extent) / (2.0 * extent) * (panel_px - 1); };
    const int cx = ox + static_cast<int>(to_px(0.0)), cy = oy + static_cast<int>(to_px(0.0));
    canvas.line(ox, cy, ox + panel_px - 1, cy, kGrid);
    canvas.line(cx, oy, cx, oy + panel_px - 1, kGrid);
    const Tensor& pts = panels[p].points;
    if (pts.cols() < 2) throw ShapeError("scatter_png: points need two columns");
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      const double x = pts.at(i, 0), y = pts.at(i, 1);
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      const int label = panels[p].labels.empty() ? 0 : panels[p].labels[i];
      canvas.dot(ox + static_cast<int>(std::lround(to_px(x))),
                 oy + panel_px - 1 - static_cast<int>(std::lround(to_px(y))),
                 palette(label < 0 ? 0 : static_cast<std::size_t>(label)));
    }
    canvas.frame(ox, oy, ox + panel_px - 1, oy + panel_px - 1, kAxis);
  }
  canvas.write(path);
}

void line_png(const std::string& path, const std::vector<Series>& series, bool log_y, int width,
              int height) {
  const auto tf = [&](double v) { return log_y ? std::log10(v) : v; };
  const auto usable = [&](double v) { return std::isfinite(v) && (!log_y || v > 0.0); };
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.y.size());
    for (double v : s.y)
      if (usable(v)) lo = std::min(lo, tf(v)), hi = std::max(hi, tf(v));
  }
  if (!(lo <= hi)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const int pad = 12, x0 = pad, y0 = pad, x1 = width - pad - 1, y1 = height - pad - 1;
  Canvas canvas(width, height);
  if (log_y)
    for (double d = std::ceil(lo); d <= hi; d += 1.0) {
      const int y = y1 - static_cast<int>(std::lround((d - lo) / (hi - lo) * (y1 - y0)));
      canvas.line(x0, y, x1, y, kGrid);
    }
  const double xscale = n > 1 ? static_cast<double>(x1 - x0) / static_cast<double>(n - 1) : 0.0;
  for (const auto& s : series) {
    bool have = false;
    int px = 0, py = 0;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      if (!usable(s.y[i])) {
        have = false;
        continue;
      }
      const int x = x0 + static_cast<int>(std::lround(static_cast<double>(i) * xscale));
      const int y = y1 - static_cast<int>(std::lround((tf(s.y[i]) - lo) / (hi - lo) * (y1 - y0)));
      if (have) canvas.line(px, py, x, y, s.color);
      px = x, py = y, have = true;
    }
  }
  canvas.frame(x0, y0, x1, y1, kAxis);
  canvas.write(path);
}

}  // namespace fmlab::plot
