#pragma once

// Fan-beam acquisition simulation: geometry, analytic phantoms, ray-driven
// projection with its exact transpose, filtered back-projection, and the
// photon noise model.

#include <cstdint>
#include <vector>

#include "ivct/rng.hpp"
#include "ivct/tensor.hpp"

namespace ivct {

// Flat (equidistant) detector fan-beam geometry. Distances in mm. Image
// values are normalized attenuation units; `attenuation_scale` converts a
// value of 1.0 to 1/mm so line integrals land in a physically plausible
// range for the photon statistics.
struct ScanGeometry {
    int64_t n_full_views = 720;
    int64_t n_detectors = 672;
    double dist_source_center = 1075.0;
    double dist_detector_center = 1075.0;
    double detector_pitch = 0.0; // 0 = derive so the fan covers the image diagonal
    int64_t image_size = 256;
    double pixel_spacing = 1.0;
    double angular_span_deg = 360.0;
    double attenuation_scale = 0.02;

    std::vector<double> view_angles; // radians, filled by make_geometry

    double source_detector() const { return dist_source_center + dist_detector_center; }
    double fan_half_angle() const;
    double fov_radius() const;
    double delta_beta() const;      // angular increment in radians
    double iso_pitch() const;       // detector pitch rescaled to the iso line
    bool compatible(const ScanGeometry& o) const;
};

ScanGeometry make_geometry(ScanGeometry config);

template <typename T>
struct Image {
    Tensor<T> data; // [H, W]
    double pixel_spacing = 1.0;
};

template <typename T>
struct Sinogram {
    Tensor<T> data;                     // [rows, detectors]
    std::vector<int64_t> view_indices;  // ascending, rows == view_indices.size()
};

struct NoiseModel {
    double photon_intensity = 1e6;
    double gaussian_std = 0.01;
    bool enabled = true;
};

enum class PhantomKind { shepp_logan, random_ellipses };

template <typename T>
Image<T> make_phantom(PhantomKind kind, int64_t size, double pixel_spacing, RngState& rng);

// Ray-driven line integrals with bilinear interpolation, <= half-pixel steps.
template <typename T>
Sinogram<T> forward_project(const Image<T>& image, const ScanGeometry& geom,
                            const std::vector<int64_t>& view_indices);

// Exact transpose of forward_project over the sinogram's views; by default
// scaled by the angular increment.
template <typename T>
Image<T> back_project(const Sinogram<T>& sino, const ScanGeometry& geom, bool scale_by_dbeta = true);

// Cosine-weighted, Ram-Lak-filtered, distance-weighted reconstruction.
template <typename T>
Image<T> fbp(const Sinogram<T>& sino, const ScanGeometry& geom);

// Raw full-view kernels for use inside autodiff ops: image and sinogram are
// dense row-major buffers, sinogram always n_full_views x n_detectors.
template <typename T>
void fbp_apply_raw(const ScanGeometry& geom, const std::vector<int64_t>& view_indices, const T* sino, T* img);
template <typename T>
void fbp_adjoint_raw(const ScanGeometry& geom, const std::vector<int64_t>& view_indices, const T* img_grad,
                     T* sino_grad);

template <typename T>
Sinogram<T> add_noise(const Sinogram<T>& sino, const NoiseModel& noise, RngState& rng);

std::vector<int64_t> all_views(const ScanGeometry& geom);

} // namespace ivct
