#include "ivct/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ivct {

int64_t SamplingVector::popcount() const {
    int64_t n = 0;
    for (uint8_t b : bits) n += b ? 1 : 0;
    return n;
}

std::vector<int64_t> SamplingVector::ones() const {
    std::vector<int64_t> idx;
    for (int64_t i = 0; i < size(); ++i)
        if (bits[static_cast<size_t>(i)]) idx.push_back(i);
    return idx;
}

SamplingVector svct_vector(int64_t n_view, int64_t n_full) {
    if (n_view < 1 || n_view > n_full) throw std::invalid_argument("svct_vector: n_view out of [1, n_full]");
    SamplingVector v;
    v.bits.assign(static_cast<size_t>(n_full), 0);
    for (int64_t i = 0; i < n_view; ++i) v.bits[static_cast<size_t>(i * n_full / n_view)] = 1;
    v.tag = ScenarioTag::svct;
    v.params = "n_view=" + std::to_string(n_view);
    return v;
}

SamplingVector lact_vector(double start_deg, double end_deg, int64_t n_full, double span_deg) {
    if (!(start_deg >= 0 && start_deg < end_deg && end_deg <= span_deg))
        throw std::invalid_argument("lact_vector: need 0 <= start < end <= span");
    SamplingVector v;
    v.bits.assign(static_cast<size_t>(n_full), 0);
    const int64_t lo = static_cast<int64_t>(std::floor(start_deg / span_deg * static_cast<double>(n_full)));
    const int64_t hi = static_cast<int64_t>(std::floor(end_deg / span_deg * static_cast<double>(n_full) + 1e-9));
    if (hi <= lo) throw std::invalid_argument("lact_vector: empty range");
    for (int64_t i = lo; i < std::min(hi, n_full); ++i) v.bits[static_cast<size_t>(i)] = 1;
    v.tag = ScenarioTag::lact;
    std::ostringstream os;
    os << "range=[" << start_deg << "," << end_deg << ")";
    v.params = os.str();
    return v;
}

SamplingVector hybrid_vector(const SamplingVector& a, const SamplingVector& b, HybridMode mode, int64_t n_view) {
    if (a.size() != b.size()) throw std::invalid_argument("hybrid_vector: length mismatch");
    SamplingVector v;
    v.bits.assign(a.bits.size(), 0);
    v.tag = ScenarioTag::hybrid;
    switch (mode) {
    case HybridMode::set_union:
        for (size_t i = 0; i < a.bits.size(); ++i) v.bits[i] = (a.bits[i] || b.bits[i]) ? 1 : 0;
        v.params = "union";
        break;
    case HybridMode::set_intersect:
        for (size_t i = 0; i < a.bits.size(); ++i) v.bits[i] = (a.bits[i] && b.bits[i]) ? 1 : 0;
        v.params = "intersect";
        break;
    case HybridMode::svct_within_lact: {
        // equidistant n_view ones inside b's contiguous range, same floor rule
        const auto run = b.ones();
        if (run.empty()) throw std::invalid_argument("hybrid_vector: empty host range");
        const int64_t len = static_cast<int64_t>(run.size());
        if (n_view < 1 || n_view > len) throw std::invalid_argument("hybrid_vector: n_view out of host range");
        for (int64_t i = 0; i < n_view; ++i) v.bits[static_cast<size_t>(run[static_cast<size_t>(i * len / n_view)])] = 1;
        v.params = "svct_within_lact n_view=" + std::to_string(n_view);
        break;
    }
    }
    if (v.popcount() == 0) throw std::invalid_argument("hybrid_vector: empty result");
    return v;
}

std::string to_rle(const SamplingVector& v) {
    std::ostringstream os;
    os << "v1;len=" << v.size() << ";runs=";
    int64_t i = 0;
    bool first = true;
    while (i < v.size()) {
        const uint8_t val = v.bits[static_cast<size_t>(i)];
        int64_t j = i;
        while (j < v.size() && v.bits[static_cast<size_t>(j)] == val) ++j;
        os << (first ? "" : ",") << static_cast<int>(val) << "x" << (j - i);
        first = false;
        i = j;
    }
    return os.str();
}

SamplingVector from_rle(const std::string& text) {
    auto fail = [] { throw std::invalid_argument("sampling vector: malformed run-length text"); };
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) parts.push_back(item);
    if (parts.size() != 3 || parts[0] != "v1" || parts[1].rfind("len=", 0) != 0 || parts[2].rfind("runs=", 0) != 0)
        fail();
    const int64_t len = std::stoll(parts[1].substr(4));
    SamplingVector v;
    v.bits.reserve(static_cast<size_t>(len));
    std::stringstream rs(parts[2].substr(5));
    while (std::getline(rs, item, ',')) {
        const auto x = item.find('x');
        if (x == std::string::npos) fail();
        const int val = std::stoi(item.substr(0, x));
        const int64_t count = std::stoll(item.substr(x + 1));
        if ((val != 0 && val != 1) || count < 1) fail();
        v.bits.insert(v.bits.end(), static_cast<size_t>(count), static_cast<uint8_t>(val));
    }
    if (static_cast<int64_t>(v.bits.size()) != len) fail();
    if (v.popcount() == 0) throw std::invalid_argument("sampling vector: no views sampled");
    return v;
}

template <typename T>
Sinogram<T> reduce_sinogram(const Sinogram<T>& full, const SamplingVector& v) {
    if (full.data.dim(0) != v.size()) throw std::invalid_argument("reduce_sinogram: length mismatch");
    const int64_t nd = full.data.dim(1);
    const auto keep = v.ones();
    std::vector<T> out;
    out.reserve(keep.size() * static_cast<size_t>(nd));
    std::vector<int64_t> views;
    views.reserve(keep.size());
    const T* src = full.data.data();
    for (int64_t row : keep) {
        const int64_t orig = full.view_indices[static_cast<size_t>(row)];
        views.push_back(orig);
        out.insert(out.end(), src + row * nd, src + (row + 1) * nd);
    }
    Sinogram<T> s;
    s.data = Tensor<T>::from_data({static_cast<int64_t>(keep.size()), nd}, std::move(out));
    s.view_indices = std::move(views);
    return s;
}

template <typename T>
Sinogram<T> zero_fill(const Sinogram<T>& reduced, const SamplingVector& v) {
    const int64_t nd = reduced.data.dim(1);
    if (reduced.data.dim(0) != v.popcount()) throw std::invalid_argument("zero_fill: row count != popcount");
    std::vector<T> out(static_cast<size_t>(v.size() * nd), T(0));
    const auto keep = v.ones();
    const T* src = reduced.data.data();
    for (size_t i = 0; i < keep.size(); ++i)
        std::copy(src + static_cast<int64_t>(i) * nd, src + static_cast<int64_t>(i + 1) * nd,
                  out.begin() + keep[i] * nd);
    Sinogram<T> s;
    s.data = Tensor<T>::from_data({v.size(), nd}, std::move(out));
    s.view_indices.resize(static_cast<size_t>(v.size()));
    for (int64_t i = 0; i < v.size(); ++i) s.view_indices[static_cast<size_t>(i)] = i;
    return s;
}

template <typename T>
Tensor<T> mask_matrix(const SamplingVector& v, int64_t n_detectors) {
    std::vector<T> m(static_cast<size_t>(v.size() * n_detectors), T(0));
    for (int64_t i = 0; i < v.size(); ++i)
        if (v.bits[static_cast<size_t>(i)])
            std::fill(m.begin() + i * n_detectors, m.begin() + (i + 1) * n_detectors, T(1));
    return Tensor<T>::from_data({v.size(), n_detectors}, std::move(m));
}

double SettingSpec::difficulty() const {
    if (scenario == 1) {
        const double d = 1.0 - std::log2(std::max(value, 9.0) / 9.0) / std::log2(288.0 / 9.0);
        return std::clamp(d, 0.0, 1.0);
    }
    const double d = 1.0 - (value - 60.0) / 120.0;
    return std::clamp(d, 0.0, 1.0);
}

std::string SettingSpec::label() const {
    std::ostringstream os;
    if (scenario == 1) os << "svct_" << static_cast<int64_t>(value);
    else if (scenario == 2) os << "lact_" << value;
    else os << "hybrid" << scenario << "_" << value;
    return os.str();
}

SamplingVector setting_vector(const SettingSpec& t, const ScanGeometry& geom) {
    if (t.scenario == 1) return svct_vector(static_cast<int64_t>(t.value), geom.n_full_views);
    if (t.scenario == 2) return lact_vector(0.0, t.value, geom.n_full_views, geom.angular_span_deg);
    throw std::invalid_argument("setting_vector: hybrid settings are built explicitly via hybrid_vector");
}

template Sinogram<float> reduce_sinogram<float>(const Sinogram<float>&, const SamplingVector&);
template Sinogram<double> reduce_sinogram<double>(const Sinogram<double>&, const SamplingVector&);
template Sinogram<float> zero_fill<float>(const Sinogram<float>&, const SamplingVector&);
template Sinogram<double> zero_fill<double>(const Sinogram<double>&, const SamplingVector&);
template Tensor<float> mask_matrix<float>(const SamplingVector&, int64_t);
template Tensor<double> mask_matrix<double>(const SamplingVector&, int64_t);

} // namespace ivct
