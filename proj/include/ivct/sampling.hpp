#pragma once

// Incomplete-view protocols: sampling vectors over the full view set, the
// sinogram reduction/zero-fill pair, masks and hybrid scenarios.

#include <string>

#include "ivct/physics.hpp"

namespace ivct {

enum class ScenarioTag { svct, lact, hybrid, custom };

struct SamplingVector {
    std::vector<uint8_t> bits;        // length n_full_views, at least one set
    ScenarioTag tag = ScenarioTag::custom;
    std::string params;               // human-readable scenario parameters

    int64_t size() const { return static_cast<int64_t>(bits.size()); }
    int64_t popcount() const;
    std::vector<int64_t> ones() const;
};

// equidistant views: ones at floor(i*n_full/n_view)
SamplingVector svct_vector(int64_t n_view, int64_t n_full);

// contiguous angular range [start, end) out of span degrees
SamplingVector lact_vector(double start_deg, double end_deg, int64_t n_full, double span_deg = 360.0);

enum class HybridMode { set_union, set_intersect, svct_within_lact };

SamplingVector hybrid_vector(const SamplingVector& a, const SamplingVector& b, HybridMode mode,
                             int64_t n_view = 0);

// run-length text form: "v1;len=720;runs=0x180,1x180,..."
std::string to_rle(const SamplingVector& v);
SamplingVector from_rle(const std::string& text);

template <typename T>
Sinogram<T> reduce_sinogram(const Sinogram<T>& full, const SamplingVector& v);

template <typename T>
Sinogram<T> zero_fill(const Sinogram<T>& reduced, const SamplingVector& v);

template <typename T>
Tensor<T> mask_matrix(const SamplingVector& v, int64_t n_detectors);

// A scenario/setting pair: T=1 SVCT (value = view count), T=2 LACT (value =
// end angle of [0, r]), T>=3 hybrid presets.
struct SettingSpec {
    int scenario = 1;
    double value = 0;

    // in [0,1]; grows as the protocol keeps less data
    double difficulty() const;
    std::string label() const;
};

SamplingVector setting_vector(const SettingSpec& t, const ScanGeometry& geom);

} // namespace ivct
