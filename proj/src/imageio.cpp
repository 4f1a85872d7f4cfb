#include "ivct/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <png.h>
#include <stdexcept>

namespace ivct {

namespace {

uint16_t to_u16(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<uint16_t>(std::lround(c * 65535.0f));
}

} // namespace

void write_pgm16(const std::string& path, const float* data, int64_t h, int64_t w) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "P5\n" << w << " " << h << "\n65535\n";
    std::vector<uint8_t> row(static_cast<size_t>(w) * 2);
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) {
            const uint16_t v = to_u16(data[r * w + c]);
            row[static_cast<size_t>(2 * c)] = static_cast<uint8_t>(v >> 8); // big-endian per PGM
            row[static_cast<size_t>(2 * c + 1)] = static_cast<uint8_t>(v & 0xFF);
        }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

void write_png16(const std::string& path, const float* data, int64_t h, int64_t w) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw std::runtime_error("png write failed: " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(static_cast<size_t>(w) * 2);
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) {
            const uint16_t v = to_u16(data[r * w + c]);
            row[static_cast<size_t>(2 * c)] = static_cast<uint8_t>(v >> 8);
            row[static_cast<size_t>(2 * c + 1)] = static_cast<uint8_t>(v & 0xFF);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

namespace {

std::vector<float> read_pgm(const std::string& path, int64_t& h, int64_t& w) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw std::runtime_error("unsupported PGM type: " + path);
    int64_t maxval;
    f >> w >> h >> maxval;
    f.get();
    if (w < 1 || h < 1 || (maxval != 255 && maxval != 65535)) throw std::runtime_error("bad PGM header: " + path);
    std::vector<float> out(static_cast<size_t>(h * w));
    if (maxval == 255) {
        std::vector<uint8_t> buf(out.size());
        f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(buf[i]) / 255.0f;
    } else {
        std::vector<uint8_t> buf(out.size() * 2);
        f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        for (size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<float>((buf[2 * i] << 8) | buf[2 * i + 1]) / 65535.0f;
    }
    if (!f) throw std::runtime_error("truncated PGM: " + path);
    return out;
}

std::vector<float> read_png(const std::string& path, int64_t& h, int64_t& w) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("cannot open for reading: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw std::runtime_error("png read failed: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    w = png_get_image_width(png, info);
    h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    // normalize to 16-bit gray
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (depth < 16) png_set_expand_16(png);
    png_read_update_info(png, info);
    std::vector<uint8_t> row(png_get_rowbytes(png, info));
    std::vector<float> out(static_cast<size_t>(h * w));
    for (int64_t r = 0; r < h; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (int64_t c = 0; c < w; ++c) {
            const uint16_t v = static_cast<uint16_t>((row[static_cast<size_t>(2 * c)] << 8) | row[static_cast<size_t>(2 * c + 1)]);
            out[static_cast<size_t>(r * w + c)] = static_cast<float>(v) / 65535.0f;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return out;
}

} // namespace

std::vector<float> read_gray_image(const std::string& path, int64_t& h, int64_t& w) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".pgm") return read_pgm(path, h, w);
    if (ext == ".png") return read_png(path, h, w);
    if (ext == ".ivct") {
        auto img = read_ivct_image(path);
        h = img.data.dim(0);
        w = img.data.dim(1);
        return img.data.values();
    }
    throw std::runtime_error("unsupported image format: " + path);
}

} // namespace ivct
