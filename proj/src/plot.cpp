#include "ivct/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>

#include "ivct/io.hpp"

namespace ivct {

namespace {

// 5x7 bitmap glyphs, one row per byte (low 5 bits)
const std::map<char, std::array<uint8_t, 7>>& font() {
    static const std::map<char, std::array<uint8_t, 7>> f = {
        {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
        {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
        {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
        {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}}, {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
        {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}}, {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
        {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
        {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
        {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
        {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
        {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
        {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
        {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}}, {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
        {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}}, {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
        {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}}, {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
        {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}}, {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
        {'a', {0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F}}, {'b', {0x10, 0x10, 0x1E, 0x11, 0x11, 0x11, 0x1E}},
        {'c', {0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E}}, {'d', {0x01, 0x01, 0x0F, 0x11, 0x11, 0x11, 0x0F}},
        {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}}, {'g', {0x00, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x0E}},
        {'i', {0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E}}, {'l', {0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'n', {0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11}}, {'o', {0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E}},
        {'p', {0x00, 0x00, 0x1E, 0x11, 0x1E, 0x10, 0x10}}, {'r', {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10}},
        {'s', {0x00, 0x00, 0x0F, 0x10, 0x0E, 0x01, 0x1E}}, {'t', {0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06}},
        {'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0D}}, {'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0A, 0x04}},
        {'w', {0x00, 0x00, 0x11, 0x11, 0x15, 0x15, 0x0A}}, {'x', {0x00, 0x00, 0x11, 0x0A, 0x04, 0x0A, 0x11}},
        {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    };
    return f;
}

} // namespace

void Canvas::set(int64_t x, int64_t y, float v) {
    if (x >= 0 && x < width && y >= 0 && y < height) pixels[static_cast<size_t>(y * width + x)] = v;
}

void Canvas::line(int64_t x0, int64_t y0, int64_t x1, int64_t y1, float v) {
    const int64_t dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int64_t sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int64_t err = dx + dy;
    while (true) {
        set(x0, y0, v);
        if (x0 == x1 && y0 == y1) break;
        const int64_t e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void Canvas::text(int64_t x, int64_t y, const std::string& s, float v, int scale) {
    const auto& f = font();
    for (char ch : s) {
        auto it = f.find(ch);
        if (it == f.end()) it = f.find(' ');
        for (int r = 0; r < 7; ++r)
            for (int c = 0; c < 5; ++c)
                if (it->second[static_cast<size_t>(r)] & (1 << (4 - c)))
                    for (int i = 0; i < scale; ++i)
                        for (int j = 0; j < scale; ++j) set(x + c * scale + j, y + r * scale + i, v);
        x += 6 * scale;
    }
}

void Canvas::blit(int64_t x, int64_t y, const float* img, int64_t h, int64_t w) {
    for (int64_t r = 0; r < h; ++r)
        for (int64_t c = 0; c < w; ++c) set(x + c, y + r, std::clamp(img[r * w + c], 0.0f, 1.0f));
}

void Canvas::save_png(const std::string& path) const { write_png16(path, pixels.data(), height, width); }

void render_profile_plot(const std::string& path, const std::string& title,
                         const std::vector<double>& settings, const std::vector<double>& values) {
    const int64_t W = 640, H = 420, ml = 70, mr = 25, mt = 40, mb = 50;
    Canvas cv(W, H);
    cv.text(ml, 12, title, 0.0f, 2);
    cv.line(ml, H - mb, W - mr, H - mb, 0.0f);
    cv.line(ml, mt, ml, H - mb, 0.0f);
    if (settings.empty()) {
        cv.save_png(path);
        return;
    }
    double x0 = *std::min_element(settings.begin(), settings.end());
    double x1 = *std::max_element(settings.begin(), settings.end());
    double y0 = *std::min_element(values.begin(), values.end());
    double y1 = *std::max_element(values.begin(), values.end());
    if (x1 - x0 < 1e-12) x1 = x0 + 1;
    const double pad = std::max(0.5, 0.05 * (y1 - y0));
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return ml + static_cast<int64_t>((x - x0) / (x1 - x0) * static_cast<double>(W - ml - mr)); };
    auto py = [&](double y) { return H - mb - static_cast<int64_t>((y - y0) / (y1 - y0) * static_cast<double>(H - mt - mb)); };
    char buf[32];
    for (int i = 0; i <= 4; ++i) {
        const double yv = y0 + (y1 - y0) * i / 4.0;
        std::snprintf(buf, sizeof(buf), "%.1f", yv);
        cv.line(ml - 4, py(yv), ml, py(yv), 0.0f);
        cv.text(6, py(yv) - 3, buf, 0.0f);
    }
    for (size_t i = 0; i < settings.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%g", settings[i]);
        cv.line(px(settings[i]), H - mb, px(settings[i]), H - mb + 4, 0.0f);
        cv.text(px(settings[i]) - 8, H - mb + 8, buf, 0.0f);
        if (i > 0)
            cv.line(px(settings[i - 1]), py(values[i - 1]), px(settings[i]), py(values[i]), 0.15f);
        for (int64_t dx = -1; dx <= 1; ++dx)
            for (int64_t dy = -1; dy <= 1; ++dy) cv.set(px(settings[i]) + dx, py(values[i]) + dy, 0.0f);
    }
    cv.save_png(path);
}

void render_panel(const std::string& path, const std::vector<const float*>& images,
                  const std::vector<std::string>& captions, int64_t h, int64_t w) {
    const int64_t gap = 4, caption_h = 14;
    const int64_t n = static_cast<int64_t>(images.size());
    Canvas cv(n * w + (n + 1) * gap, h + caption_h + 2 * gap, 0.25f);
    for (int64_t i = 0; i < n; ++i) {
        cv.blit(gap + i * (w + gap), gap, images[static_cast<size_t>(i)], h, w);
        if (i < static_cast<int64_t>(captions.size()))
            cv.text(gap + i * (w + gap) + 2, gap + h + 3, captions[static_cast<size_t>(i)], 1.0f);
    }
    cv.save_png(path);
}

} // namespace ivct
