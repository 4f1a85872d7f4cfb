#pragma once

// Minimal grayscale raster canvas for profile plots and side-by-side panels.

#include <string>
#include <vector>

#include "ivct/tensor.hpp"

namespace ivct {

struct Canvas {
    int64_t width = 0, height = 0;
    std::vector<float> pixels; // [0,1] gray

    Canvas(int64_t w, int64_t h, float bg = 1.0f) : width(w), height(h), pixels(static_cast<size_t>(w * h), bg) {}

    void set(int64_t x, int64_t y, float v);
    void line(int64_t x0, int64_t y0, int64_t x1, int64_t y1, float v);
    void text(int64_t x, int64_t y, const std::string& s, float v, int scale = 1); // 5x7 font
    void blit(int64_t x, int64_t y, const float* img, int64_t h, int64_t w);
    void save_png(const std::string& path) const;
};

// PSNR-vs-setting profile curve written to a PNG file
void render_profile_plot(const std::string& path, const std::string& title,
                         const std::vector<double>& settings, const std::vector<double>& values);

// input | output | target panel with a PSNR caption per tile
void render_panel(const std::string& path, const std::vector<const float*>& images,
                  const std::vector<std::string>& captions, int64_t h, int64_t w);

} // namespace ivct
