#include "ivct/parallel.hpp"
#include "ivct/physics.hpp"

#include <cmath>
#include <stdexcept>

namespace ivct {

namespace {

// Walks one source->detector ray and emits (pixel, weight) pairs for the
// line-integral sum. Both the projector and its transpose run this exact
// code path, which is what makes the adjointness test pass to rounding.
template <typename T, typename Emit>
void trace_ray(const ScanGeometry& g, double beta, int64_t det, Emit&& emit) {
    const double cs = std::cos(beta), sn = std::sin(beta);
    const double u = (static_cast<double>(det) - 0.5 * static_cast<double>(g.n_detectors - 1)) * g.detector_pitch;
    // source and detector element in world mm
    const double sx = g.dist_source_center * cs, sy = g.dist_source_center * sn;
    const double dx = -g.dist_detector_center * cs - u * sn;
    const double dy = -g.dist_detector_center * sn + u * cs;
    double rx = dx - sx, ry = dy - sy;
    const double rlen = std::sqrt(rx * rx + ry * ry);
    rx /= rlen;
    ry /= rlen;

    // clip against the image square (half extent he), slab method
    const int64_t size = g.image_size;
    const double he = 0.5 * static_cast<double>(size) * g.pixel_spacing;
    double t0 = 0.0, t1 = rlen;
    for (int axis = 0; axis < 2; ++axis) {
        const double o = axis ? sy : sx, d = axis ? ry : rx;
        if (std::fabs(d) < 1e-12) {
            if (o < -he || o > he) return;
        } else {
            double ta = (-he - o) / d, tb = (he - o) / d;
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
        }
    }
    if (t1 <= t0) return;

    const double max_step = 0.5 * g.pixel_spacing;
    const int64_t nsteps = static_cast<int64_t>(std::ceil((t1 - t0) / max_step));
    const double dl = (t1 - t0) / static_cast<double>(nsteps);
    const double w_sample = dl * g.attenuation_scale;
    const double inv_sp = 1.0 / g.pixel_spacing;

    for (int64_t k = 0; k < nsteps; ++k) {
        const double t = t0 + (static_cast<double>(k) + 0.5) * dl;
        const double x = sx + t * rx, y = sy + t * ry;
        // world -> pixel coordinates (row down, col right), pixel centers
        const double fc = (x + he) * inv_sp - 0.5;
        const double fr = (he - y) * inv_sp - 0.5;
        const int64_t c0 = static_cast<int64_t>(std::floor(fc));
        const int64_t r0 = static_cast<int64_t>(std::floor(fr));
        const double wc = fc - static_cast<double>(c0);
        const double wr = fr - static_cast<double>(r0);
        for (int dr = 0; dr < 2; ++dr)
            for (int dc = 0; dc < 2; ++dc) {
                const int64_t r = r0 + dr, c = c0 + dc;
                if (r < 0 || r >= size || c < 0 || c >= size) continue;
                const double w = (dr ? wr : 1.0 - wr) * (dc ? wc : 1.0 - wc) * w_sample;
                emit(r * size + c, static_cast<T>(w));
            }
    }
}

} // namespace

template <typename T>
Sinogram<T> forward_project(const Image<T>& image, const ScanGeometry& geom,
                            const std::vector<int64_t>& view_indices) {
    if (image.data.ndim() != 2 || image.data.dim(0) != geom.image_size || image.data.dim(1) != geom.image_size)
        throw std::invalid_argument("forward_project: image does not match geometry grid");
    for (int64_t v : view_indices)
        if (v < 0 || v >= geom.n_full_views) throw std::invalid_argument("forward_project: view index out of range");

    const int64_t rows = static_cast<int64_t>(view_indices.size());
    const int64_t nd = geom.n_detectors;
    std::vector<T> out(static_cast<size_t>(rows * nd), T(0));
    const T* img = image.data.data();

    parallel_for(0, rows, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const double beta = geom.view_angles[static_cast<size_t>(view_indices[static_cast<size_t>(i)])];
            for (int64_t j = 0; j < nd; ++j) {
                T acc = 0;
                trace_ray<T>(geom, beta, j, [&](int64_t pix, T w) { acc += img[pix] * w; });
                out[static_cast<size_t>(i * nd + j)] = acc;
            }
        }
    });

    Sinogram<T> s;
    s.data = Tensor<T>::from_data({rows, nd}, std::move(out));
    s.view_indices = view_indices;
    return s;
}

template <typename T>
Image<T> back_project(const Sinogram<T>& sino, const ScanGeometry& geom, bool scale_by_dbeta) {
    const int64_t rows = sino.data.dim(0), nd = sino.data.dim(1);
    if (nd != geom.n_detectors || rows != static_cast<int64_t>(sino.view_indices.size()))
        throw std::invalid_argument("back_project: sinogram does not match geometry");
    const int64_t size = geom.image_size;
    const T scale = static_cast<T>(scale_by_dbeta ? geom.delta_beta() : 1.0);

    std::vector<T> img(static_cast<size_t>(size * size), T(0));
    const T* sd = sino.data.data();
    // per-view partial accumulation, summed in fixed view order
    for (int64_t i = 0; i < rows; ++i) {
        const double beta = geom.view_angles[static_cast<size_t>(sino.view_indices[static_cast<size_t>(i)])];
        for (int64_t j = 0; j < nd; ++j) {
            const T v = sd[i * nd + j] * scale;
            if (v == T(0)) continue;
            trace_ray<T>(geom, beta, j, [&](int64_t pix, T w) { img[static_cast<size_t>(pix)] += v * w; });
        }
    }

    Image<T> out;
    out.data = Tensor<T>::from_data({size, size}, std::move(img));
    out.pixel_spacing = geom.pixel_spacing;
    return out;
}

template <typename T>
Sinogram<T> add_noise(const Sinogram<T>& sino, const NoiseModel& noise, RngState& rng) {
    Sinogram<T> out;
    out.view_indices = sino.view_indices;
    if (!noise.enabled) {
        out.data = Tensor<T>::from_data(sino.data.shape(), sino.data.values());
        return out;
    }
    if (noise.photon_intensity <= 0) throw std::invalid_argument("add_noise: photon intensity must be positive");
    if (noise.gaussian_std < 0) throw std::invalid_argument("add_noise: negative gaussian std");

    std::vector<T> v(sino.data.values());
    for (auto& s : v) {
        const double clean = std::max(0.0, static_cast<double>(s));
        const double lambda = noise.photon_intensity * std::exp(-clean);
        const double counts = std::max<double>(1.0, static_cast<double>(rng.poisson(lambda)));
        double noisy = -std::log(counts / noise.photon_intensity);
        noisy += noise.gaussian_std * rng.normal();
        s = static_cast<T>(noisy);
    }
    out.data = Tensor<T>::from_data(sino.data.shape(), std::move(v));
    return out;
}

template Sinogram<float> forward_project<float>(const Image<float>&, const ScanGeometry&, const std::vector<int64_t>&);
template Sinogram<double> forward_project<double>(const Image<double>&, const ScanGeometry&, const std::vector<int64_t>&);
template Image<float> back_project<float>(const Sinogram<float>&, const ScanGeometry&, bool);
template Image<double> back_project<double>(const Sinogram<double>&, const ScanGeometry&, bool);
template Sinogram<float> add_noise<float>(const Sinogram<float>&, const NoiseModel&, RngState&);
template Sinogram<double> add_noise<double>(const Sinogram<double>&, const NoiseModel&, RngState&);

} // namespace ivct
