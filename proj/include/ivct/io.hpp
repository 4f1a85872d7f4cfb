#pragma once

// Binary file formats (.ivct images/sinograms, IVCK checkpoints), 16-bit
// grayscale PGM/PNG export and CSV helpers. All binary data is little-endian,
// payloads are 32-bit floats.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ivct/physics.hpp"
#include "ivct/sampling.hpp"

namespace ivct {

struct IvctHeader {
    uint8_t kind = 0; // 0 = image, 1 = sinogram
    ScanGeometry geometry;
    std::string sampling_rle; // provenance, may be empty
};

void write_ivct_image(const std::string& path, const Image<float>& img, const ScanGeometry& geom,
                      const std::string& sampling_rle = "");
void write_ivct_sinogram(const std::string& path, const Sinogram<float>& sino, const ScanGeometry& geom,
                         const std::string& sampling_rle = "");

IvctHeader read_ivct_header(const std::string& path);
Image<float> read_ivct_image(const std::string& path, IvctHeader* header = nullptr);
Sinogram<float> read_ivct_sinogram(const std::string& path, IvctHeader* header = nullptr);

// ---- checkpoint container ----------------------------------------------

struct NamedParam {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct Checkpoint {
    std::map<std::string, std::string> config; // canonical text section
    std::vector<NamedParam> params;
};

// Throws on magic/version mismatch or checksum failure; never partially loads.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);
uint32_t checkpoint_checksum(const std::string& path);

std::string config_to_text(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> text_to_config(const std::string& text);
std::map<std::string, std::string> load_config_file(const std::string& path);

// ---- image export/import -------------------------------------------------

// linear [0,1] -> 16-bit grayscale, values clamped
void write_pgm16(const std::string& path, const float* data, int64_t h, int64_t w);
void write_png16(const std::string& path, const float* data, int64_t h, int64_t w);

// any 8/16-bit gray or RGB PNG / binary PGM, converted to [0,1] gray
std::vector<float> read_gray_image(const std::string& path, int64_t& h, int64_t& w);

// ---- CSV ------------------------------------------------------------------

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

uint32_t crc32_bytes(const void* data, size_t len, uint32_t seed = 0);

} // namespace ivct
