#include "ivct/parallel.hpp"
#include "ivct/physics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <unsupported/Eigen/FFT>

namespace ivct {

namespace {

int64_t next_pow2(int64_t n) {
    int64_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Frequency response of the band-limited ramp: FFT of the spatial Ram-Lak
// kernel sampled at the iso-line detector spacing. Real by symmetry; the
// imaginary residue is dropped so row filtering stays exactly self-adjoint.
template <typename T>
std::vector<T> ramp_response(int64_t n_det, double tau, int64_t pad) {
    std::vector<std::complex<T>> kernel(static_cast<size_t>(pad), {0, 0});
    const double inv_tau2 = 1.0 / (tau * tau);
    kernel[0] = static_cast<T>(0.25 * inv_tau2);
    for (int64_t i = 1; i < n_det; ++i) {
        double h = 0.0;
        if (i % 2 == 1) { // -1/(i*pi*tau)^2, even taps vanish
            const double pin = 3.14159265358979323846 * static_cast<double>(i);
            h = -inv_tau2 / (pin * pin);
        }
        kernel[static_cast<size_t>(i)] = static_cast<T>(h);
        kernel[static_cast<size_t>(pad - i)] = static_cast<T>(h);
    }
    Eigen::FFT<T> fft;
    std::vector<std::complex<T>> freq(static_cast<size_t>(pad));
    fft.fwd(freq.data(), kernel.data(), static_cast<int>(pad));
    std::vector<T> response(static_cast<size_t>(pad));
    for (int64_t i = 0; i < pad; ++i) response[static_cast<size_t>(i)] = freq[static_cast<size_t>(i)].real();
    return response;
}

// In-place ramp filtering of each sinogram row, zero-padded to a power of
// two; includes the tau factor of the discrete convolution.
template <typename T>
void filter_rows(T* rows, int64_t n_rows, int64_t n_det, double tau) {
    const int64_t pad = next_pow2(2 * n_det);
    const auto response = ramp_response<T>(n_det, tau, pad);
    parallel_for(0, n_rows, [&](int64_t lo, int64_t hi) {
        Eigen::FFT<T> fft;
        std::vector<std::complex<T>> buf(static_cast<size_t>(pad));
        std::vector<std::complex<T>> freq(static_cast<size_t>(pad));
        for (int64_t r = lo; r < hi; ++r) {
            T* row = rows + r * n_det;
            for (int64_t j = 0; j < pad; ++j)
                buf[static_cast<size_t>(j)] = {j < n_det ? row[j] : T(0), T(0)};
            fft.fwd(freq.data(), buf.data(), static_cast<int>(pad));
            for (int64_t j = 0; j < pad; ++j) freq[static_cast<size_t>(j)] *= response[static_cast<size_t>(j)];
            fft.inv(buf.data(), freq.data(), static_cast<int>(pad));
            for (int64_t j = 0; j < n_det; ++j) row[j] = buf[static_cast<size_t>(j)].real() * static_cast<T>(tau);
        }
    });
}

template <typename T>
void cosine_weight_rows(T* rows, int64_t n_rows, const ScanGeometry& g) {
    const int64_t nd = g.n_detectors;
    const double tau = g.iso_pitch();
    const double d = g.dist_source_center;
    std::vector<T> w(static_cast<size_t>(nd));
    for (int64_t j = 0; j < nd; ++j) {
        const double s = (static_cast<double>(j) - 0.5 * static_cast<double>(nd - 1)) * tau;
        w[static_cast<size_t>(j)] = static_cast<T>(d / std::sqrt(d * d + s * s));
    }
    for (int64_t r = 0; r < n_rows; ++r)
        for (int64_t j = 0; j < nd; ++j) rows[r * nd + j] *= w[static_cast<size_t>(j)];
}

// Angular increment represented by each selected view: the median gap between
// consecutive selected angles. Reproduces span/n_view for equidistant subsets
// and the native step for contiguous ranges, and stays robust for hybrids.
double view_weight(const ScanGeometry& g, const std::vector<int64_t>& view_indices) {
    double d;
    if (view_indices.size() < 2) {
        d = g.delta_beta();
    } else {
        std::vector<double> gaps;
        gaps.reserve(view_indices.size() - 1);
        for (size_t i = 1; i < view_indices.size(); ++i)
            gaps.push_back(g.view_angles[static_cast<size_t>(view_indices[i])] -
                           g.view_angles[static_cast<size_t>(view_indices[i - 1])]);
        std::nth_element(gaps.begin(), gaps.begin() + static_cast<int64_t>(gaps.size()) / 2, gaps.end());
        d = gaps[gaps.size() / 2];
    }
    // a full-circle orbit measures every line twice
    if (g.angular_span_deg == 360.0) d *= 0.5;
    return d;
}

} // namespace

template <typename T>
void fbp_apply_raw(const ScanGeometry& g, const std::vector<int64_t>& view_indices, const T* sino, T* img) {
    const int64_t rows = static_cast<int64_t>(view_indices.size());
    const int64_t nd = g.n_detectors;
    const int64_t size = g.image_size;
    const double tau = g.iso_pitch();
    const double dso = g.dist_source_center;

    std::vector<T> q(sino, sino + rows * nd);
    cosine_weight_rows(q.data(), rows, g);
    filter_rows(q.data(), rows, nd, tau);

    std::vector<double> cs(static_cast<size_t>(rows)), sn(static_cast<size_t>(rows));
    for (int64_t i = 0; i < rows; ++i) {
        const double beta = g.view_angles[static_cast<size_t>(view_indices[static_cast<size_t>(i)])];
        cs[static_cast<size_t>(i)] = std::cos(beta);
        sn[static_cast<size_t>(i)] = std::sin(beta);
    }

    const double he = 0.5 * static_cast<double>(size) * g.pixel_spacing;
    const double norm = view_weight(g, view_indices) / g.attenuation_scale;
    parallel_for(0, size, [&](int64_t lo, int64_t hi) {
        for (int64_t r = lo; r < hi; ++r) {
            const double y = he - (static_cast<double>(r) + 0.5) * g.pixel_spacing;
            for (int64_t c = 0; c < size; ++c) {
                const double x = (static_cast<double>(c) + 0.5) * g.pixel_spacing - he;
                double acc = 0.0;
                for (int64_t i = 0; i < rows; ++i) {
                    const double L = x * cs[static_cast<size_t>(i)] + y * sn[static_cast<size_t>(i)];
                    const double tc = -x * sn[static_cast<size_t>(i)] + y * cs[static_cast<size_t>(i)];
                    const double denom = dso - L;
                    const double u2 = (denom / dso) * (denom / dso);
                    const double fs = tc * dso / denom / tau + 0.5 * static_cast<double>(nd - 1);
                    const int64_t j0 = static_cast<int64_t>(std::floor(fs));
                    const double fw = fs - static_cast<double>(j0);
                    double val = 0.0;
                    if (j0 >= 0 && j0 < nd) val += (1.0 - fw) * static_cast<double>(q[static_cast<size_t>(i * nd + j0)]);
                    if (j0 + 1 >= 0 && j0 + 1 < nd) val += fw * static_cast<double>(q[static_cast<size_t>(i * nd + j0 + 1)]);
                    acc += val / u2;
                }
                img[r * size + c] = static_cast<T>(acc * norm);
            }
        }
    });
}

template <typename T>
void fbp_adjoint_raw(const ScanGeometry& g, const std::vector<int64_t>& view_indices, const T* img_grad,
                     T* sino_grad) {
    const int64_t rows = static_cast<int64_t>(view_indices.size());
    const int64_t nd = g.n_detectors;
    const int64_t size = g.image_size;
    const double tau = g.iso_pitch();
    const double dso = g.dist_source_center;
    const double he = 0.5 * static_cast<double>(size) * g.pixel_spacing;
    const double norm = view_weight(g, view_indices) / g.attenuation_scale;

    std::vector<T> q(static_cast<size_t>(rows * nd), T(0));
    // transpose of the pixel-driven interpolation: scatter image gradients
    // into detector bins, one view (row) per task so writes stay disjoint
    parallel_for(0, rows, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const double beta = g.view_angles[static_cast<size_t>(view_indices[static_cast<size_t>(i)])];
            const double csb = std::cos(beta), snb = std::sin(beta);
            for (int64_t r = 0; r < size; ++r) {
                const double y = he - (static_cast<double>(r) + 0.5) * g.pixel_spacing;
                for (int64_t c = 0; c < size; ++c) {
                    const double gv = static_cast<double>(img_grad[r * size + c]);
                    if (gv == 0.0) continue;
                    const double x = (static_cast<double>(c) + 0.5) * g.pixel_spacing - he;
                    const double L = x * csb + y * snb;
                    const double tc = -x * snb + y * csb;
                    const double denom = dso - L;
                    const double u2 = (denom / dso) * (denom / dso);
                    const double fs = tc * dso / denom / tau + 0.5 * static_cast<double>(nd - 1);
                    const int64_t j0 = static_cast<int64_t>(std::floor(fs));
                    const double fw = fs - static_cast<double>(j0);
                    const double contrib = gv * norm / u2;
                    if (j0 >= 0 && j0 < nd) q[static_cast<size_t>(i * nd + j0)] += static_cast<T>((1.0 - fw) * contrib);
                    if (j0 + 1 >= 0 && j0 + 1 < nd) q[static_cast<size_t>(i * nd + j0 + 1)] += static_cast<T>(fw * contrib);
                }
            }
        }
    });

    filter_rows(q.data(), rows, nd, tau);
    cosine_weight_rows(q.data(), rows, g);
    std::copy(q.begin(), q.end(), sino_grad);
}

template <typename T>
Image<T> fbp(const Sinogram<T>& sino, const ScanGeometry& geom) {
    const int64_t rows = sino.data.dim(0);
    if (rows < 1) throw std::invalid_argument("fbp: empty sinogram");
    if (sino.data.dim(1) != geom.n_detectors || rows != static_cast<int64_t>(sino.view_indices.size()))
        throw std::invalid_argument("fbp: sinogram does not match geometry");
    std::vector<T> img(static_cast<size_t>(geom.image_size * geom.image_size));
    fbp_apply_raw(geom, sino.view_indices, sino.data.data(), img.data());
    Image<T> out;
    out.data = Tensor<T>::from_data({geom.image_size, geom.image_size}, std::move(img));
    out.pixel_spacing = geom.pixel_spacing;
    return out;
}

template void fbp_apply_raw<float>(const ScanGeometry&, const std::vector<int64_t>&, const float*, float*);
template void fbp_apply_raw<double>(const ScanGeometry&, const std::vector<int64_t>&, const double*, double*);
template void fbp_adjoint_raw<float>(const ScanGeometry&, const std::vector<int64_t>&, const float*, float*);
template void fbp_adjoint_raw<double>(const ScanGeometry&, const std::vector<int64_t>&, const double*, double*);
template Image<float> fbp<float>(const Sinogram<float>&, const ScanGeometry&);
template Image<double> fbp<double>(const Sinogram<double>&, const ScanGeometry&);

} // namespace ivct
