#include "ivct/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ivct {

namespace {

constexpr char kIvctMagic[4] = {'I', 'V', 'C', 'T'};
constexpr char kCkptMagic[4] = {'I', 'V', 'C', 'K'};
constexpr uint16_t kIvctVersion = 1;
constexpr uint16_t kCkptVersion = 1;

uint32_t crc_table_entry(uint32_t i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    return c;
}

const uint32_t* crc_table() {
    static uint32_t table[256];
    static bool init = [] {
        for (uint32_t i = 0; i < 256; ++i) table[i] = crc_table_entry(i);
        return true;
    }();
    (void)init;
    return table;
}

struct Writer {
    std::ofstream f;
    uint32_t crc = 0xFFFFFFFFu;
    explicit Writer(const std::string& path) : f(path, std::ios::binary) {
        if (!f) throw std::runtime_error("cannot open for writing: " + path);
    }
    void raw(const void* p, size_t n) {
        f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        const auto* b = static_cast<const uint8_t*>(p);
        const uint32_t* t = crc_table();
        for (size_t i = 0; i < n; ++i) crc = t[(crc ^ b[i]) & 0xFF] ^ (crc >> 8);
    }
    template <typename T> void pod(const T& v) { raw(&v, sizeof(T)); }
    void str(const std::string& s) {
        pod(static_cast<uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    uint32_t checksum() const { return crc ^ 0xFFFFFFFFu; }
};

struct Reader {
    std::ifstream f;
    uint32_t crc = 0xFFFFFFFFu;
    explicit Reader(const std::string& path) : f(path, std::ios::binary) {
        if (!f) throw std::runtime_error("cannot open for reading: " + path);
    }
    void raw(void* p, size_t n) {
        f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!f) throw std::runtime_error("truncated file");
        const auto* b = static_cast<const uint8_t*>(p);
        const uint32_t* t = crc_table();
        for (size_t i = 0; i < n; ++i) crc = t[(crc ^ b[i]) & 0xFF] ^ (crc >> 8);
    }
    template <typename T> T pod() {
        T v;
        raw(&v, sizeof(T));
        return v;
    }
    std::string str() {
        const uint32_t n = pod<uint32_t>();
        std::string s(n, '\0');
        if (n) raw(s.data(), n);
        return s;
    }
    uint32_t checksum() const { return crc ^ 0xFFFFFFFFu; }
};

void write_geometry(Writer& w, const ScanGeometry& g) {
    w.pod<int64_t>(g.n_full_views);
    w.pod<int64_t>(g.n_detectors);
    w.pod<double>(g.dist_source_center);
    w.pod<double>(g.dist_detector_center);
    w.pod<double>(g.detector_pitch);
    w.pod<int64_t>(g.image_size);
    w.pod<double>(g.pixel_spacing);
    w.pod<double>(g.angular_span_deg);
    w.pod<double>(g.attenuation_scale);
}

ScanGeometry read_geometry(Reader& r) {
    ScanGeometry g;
    g.n_full_views = r.pod<int64_t>();
    g.n_detectors = r.pod<int64_t>();
    g.dist_source_center = r.pod<double>();
    g.dist_detector_center = r.pod<double>();
    g.detector_pitch = r.pod<double>();
    g.image_size = r.pod<int64_t>();
    g.pixel_spacing = r.pod<double>();
    g.angular_span_deg = r.pod<double>();
    g.attenuation_scale = r.pod<double>();
    return make_geometry(g);
}

void write_ivct(const std::string& path, uint8_t kind, const ScanGeometry& geom, const std::string& rle,
                const Shape& shape, const std::vector<float>& data, const std::vector<int64_t>& views) {
    Writer w(path);
    w.raw(kIvctMagic, 4);
    w.pod<uint16_t>(kIvctVersion);
    w.pod<uint8_t>(0); // dtype f32
    w.pod<uint8_t>(kind);
    write_geometry(w, geom);
    w.str(rle);
    w.pod<uint32_t>(static_cast<uint32_t>(shape.size()));
    for (int64_t d : shape) w.pod<int64_t>(d);
    w.pod<uint32_t>(static_cast<uint32_t>(views.size()));
    for (int64_t v : views) w.pod<int64_t>(v);
    w.raw(data.data(), data.size() * sizeof(float));
    if (!w.f) throw std::runtime_error("write failed: " + path);
}

struct IvctFile {
    IvctHeader header;
    Shape shape;
    std::vector<int64_t> views;
    std::vector<float> data;
};

IvctFile read_ivct(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kIvctMagic, 4) != 0) throw std::runtime_error("not an IVCT file: " + path);
    const auto version = r.pod<uint16_t>();
    if (version != kIvctVersion) throw std::runtime_error("unsupported IVCT version " + std::to_string(version));
    const auto dtype = r.pod<uint8_t>();
    if (dtype != 0) throw std::runtime_error("unsupported IVCT dtype tag");
    IvctFile file;
    file.header.kind = r.pod<uint8_t>();
    file.header.geometry = read_geometry(r);
    file.header.sampling_rle = r.str();
    const auto ndim = r.pod<uint32_t>();
    for (uint32_t i = 0; i < ndim; ++i) file.shape.push_back(r.pod<int64_t>());
    const auto nviews = r.pod<uint32_t>();
    for (uint32_t i = 0; i < nviews; ++i) file.views.push_back(r.pod<int64_t>());
    file.data.resize(static_cast<size_t>(shape_numel(file.shape)));
    r.raw(file.data.data(), file.data.size() * sizeof(float));
    return file;
}

} // namespace

uint32_t crc32_bytes(const void* data, size_t len, uint32_t seed) {
    uint32_t crc = seed ^ 0xFFFFFFFFu;
    const auto* b = static_cast<const uint8_t*>(data);
    const uint32_t* t = crc_table();
    for (size_t i = 0; i < len; ++i) crc = t[(crc ^ b[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

void write_ivct_image(const std::string& path, const Image<float>& img, const ScanGeometry& geom,
                      const std::string& rle) {
    write_ivct(path, 0, geom, rle, img.data.shape(), img.data.values(), {});
}

void write_ivct_sinogram(const std::string& path, const Sinogram<float>& sino, const ScanGeometry& geom,
                         const std::string& rle) {
    write_ivct(path, 1, geom, rle, sino.data.shape(), sino.data.values(), sino.view_indices);
}

IvctHeader read_ivct_header(const std::string& path) { return read_ivct(path).header; }

Image<float> read_ivct_image(const std::string& path, IvctHeader* header) {
    auto file = read_ivct(path);
    if (file.header.kind != 0) throw std::runtime_error("not an image file: " + path);
    if (header) *header = file.header;
    Image<float> img;
    img.data = Tensor<float>::from_data(file.shape, std::move(file.data));
    img.pixel_spacing = file.header.geometry.pixel_spacing;
    return img;
}

Sinogram<float> read_ivct_sinogram(const std::string& path, IvctHeader* header) {
    auto file = read_ivct(path);
    if (file.header.kind != 1) throw std::runtime_error("not a sinogram file: " + path);
    if (header) *header = file.header;
    Sinogram<float> s;
    s.data = Tensor<float>::from_data(file.shape, std::move(file.data));
    s.view_indices = std::move(file.views);
    return s;
}

// ---- checkpoint ------------------------------------------------------------

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    Writer w(path);
    w.raw(kCkptMagic, 4);
    w.crc = 0xFFFFFFFFu; // checksum covers everything after the magic
    w.pod<uint16_t>(kCkptVersion);
    w.str(config_to_text(ck.config));
    w.pod<uint32_t>(static_cast<uint32_t>(ck.params.size()));
    for (const auto& p : ck.params) {
        w.str(p.name);
        w.pod<uint32_t>(static_cast<uint32_t>(p.shape.size()));
        for (int64_t d : p.shape) w.pod<int64_t>(d);
        if (shape_numel(p.shape) != static_cast<int64_t>(p.data.size()))
            throw std::runtime_error("checkpoint: param '" + p.name + "' shape/data mismatch");
        w.raw(p.data.data(), p.data.size() * sizeof(float));
    }
    const uint32_t crc = w.checksum();
    w.f.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
    if (!w.f) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kCkptMagic, 4) != 0) throw std::runtime_error("not an IVCK checkpoint: " + path);
    r.crc = 0xFFFFFFFFu;
    const auto version = r.pod<uint16_t>();
    if (version != kCkptVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.config = text_to_config(r.str());
    const auto n = r.pod<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) {
        NamedParam p;
        p.name = r.str();
        const auto ndim = r.pod<uint32_t>();
        for (uint32_t d = 0; d < ndim; ++d) p.shape.push_back(r.pod<int64_t>());
        p.data.resize(static_cast<size_t>(shape_numel(p.shape)));
        r.raw(p.data.data(), p.data.size() * sizeof(float));
        ck.params.push_back(std::move(p));
    }
    const uint32_t expect = r.checksum();
    uint32_t stored = 0;
    r.f.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    if (!r.f || stored != expect) throw std::runtime_error("checkpoint checksum mismatch: " + path);
    return ck;
}

uint32_t checkpoint_checksum(const std::string& path) {
    const std::string bytes = read_text_file(path);
    if (bytes.size() < 8) throw std::runtime_error("checkpoint too small: " + path);
    uint32_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    return stored;
}

std::string config_to_text(const std::map<std::string, std::string>& kv) {
    std::ostringstream os;
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
    return os.str();
}

std::map<std::string, std::string> text_to_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
    return text_to_config(read_text_file(path));
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

} // namespace ivct
