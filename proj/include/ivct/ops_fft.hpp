#pragma once

// 2-D FFT on complex-pair tensors (trailing dimension 2 = re/im) plus the
// half-spectrum packing used by the frequency interaction branch. Transforms
// are delegated to Eigen's FFT module.

#include <complex>
#include <unsupported/Eigen/FFT>

#include "ivct/ops.hpp"

namespace ivct {

namespace detail {

// in-place 2-D DFT over the trailing [h,w] complex plane; the FFT object is
// cached so plans/twiddles are reused across calls
template <typename T>
void fft2_plane(std::complex<T>* z, int64_t h, int64_t w, bool inverse) {
    static thread_local Eigen::FFT<T> fft;
    static thread_local std::vector<std::complex<T>> buf;
    buf.resize(static_cast<size_t>(std::max(h, w)));
    for (int64_t i = 0; i < h; ++i) {
        if (inverse) fft.inv(buf.data(), z + i * w, static_cast<int>(w));
        else fft.fwd(buf.data(), z + i * w, static_cast<int>(w));
        std::copy(buf.begin(), buf.begin() + w, z + i * w);
    }
    static thread_local std::vector<std::complex<T>> colv;
    colv.resize(static_cast<size_t>(h));
    for (int64_t j = 0; j < w; ++j) {
        for (int64_t i = 0; i < h; ++i) colv[static_cast<size_t>(i)] = z[i * w + j];
        if (inverse) fft.inv(buf.data(), colv.data(), static_cast<int>(h));
        else fft.fwd(buf.data(), colv.data(), static_cast<int>(h));
        for (int64_t i = 0; i < h; ++i) z[i * w + j] = buf[static_cast<size_t>(i)];
    }
}

// batch transform on interleaved re/im values [batch, h, w, 2]
template <typename T>
std::vector<T> fft2_batch(const std::vector<T>& v, int64_t batch, int64_t h, int64_t w, bool inverse) {
    std::vector<T> out(v.size());
    std::vector<std::complex<T>> plane(static_cast<size_t>(h * w));
    for (int64_t b = 0; b < batch; ++b) {
        const T* src = v.data() + b * h * w * 2;
        for (int64_t i = 0; i < h * w; ++i) plane[static_cast<size_t>(i)] = {src[2 * i], src[2 * i + 1]};
        fft2_plane(plane.data(), h, w, inverse);
        T* dst = out.data() + b * h * w * 2;
        for (int64_t i = 0; i < h * w; ++i) {
            dst[2 * i] = plane[static_cast<size_t>(i)].real();
            dst[2 * i + 1] = plane[static_cast<size_t>(i)].imag();
        }
    }
    return out;
}

template <typename T>
void fft_dims(Tensor<T> x, int64_t& batch, int64_t& h, int64_t& w) {
    if (x.ndim() < 3 || x.dim(x.ndim() - 1) != 2)
        throw std::invalid_argument("fft2: expected complex-pair tensor [...,H,W,2]");
    h = x.dim(x.ndim() - 3);
    w = x.dim(x.ndim() - 2);
    if (h < 1 || w < 1) throw std::invalid_argument("fft2: empty plane");
    batch = x.numel() / (h * w * 2);
}

} // namespace detail

// Unnormalized forward DFT over the two spatial axes. The adjoint of the
// underlying linear map is H*W times the normalized inverse, which gives the
// backward rules below.
template <typename T>
Tensor<T> fft2(Tensor<T> x) {
    int64_t batch, h, w;
    detail::fft_dims(x, batch, h, w);
    auto out = detail::fft2_batch(x.values(), batch, h, w, false);
    return make_op_node<T>("fft2", x.shape(), std::move(out), {x}, [x, batch, h, w](TensorNode<T>& nd) mutable {
        if (!x.requires_grad()) return;
        auto g = detail::fft2_batch(nd.grad, batch, h, w, true);
        auto& gx = x.grad();
        const T s = static_cast<T>(h * w);
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += s * g[i];
    });
}

// Normalized inverse DFT (scale 1/(H*W)); exact roundtrip with fft2.
template <typename T>
Tensor<T> ifft2(Tensor<T> x) {
    int64_t batch, h, w;
    detail::fft_dims(x, batch, h, w);
    auto out = detail::fft2_batch(x.values(), batch, h, w, true);
    return make_op_node<T>("ifft2", x.shape(), std::move(out), {x}, [x, batch, h, w](TensorNode<T>& nd) mutable {
        if (!x.requires_grad()) return;
        auto g = detail::fft2_batch(nd.grad, batch, h, w, false);
        auto& gx = x.grad();
        const T s = T(1) / static_cast<T>(h * w);
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += s * g[i];
    });
}

// real [..,H,W] -> complex pair [..,H,W,2] with zero imaginary part
template <typename T>
Tensor<T> make_complex(Tensor<T> x) {
    Shape os = x.shape();
    os.push_back(2);
    std::vector<T> out(static_cast<size_t>(x.numel() * 2), T(0));
    const auto& xv = x.values();
    for (int64_t i = 0; i < x.numel(); ++i) out[static_cast<size_t>(2 * i)] = xv[static_cast<size_t>(i)];
    return make_op_node<T>("make_complex", std::move(os), std::move(out), {x}, [x](TensorNode<T>& nd) mutable {
        if (!x.requires_grad()) return;
        auto& gx = x.grad();
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += nd.grad[2 * i];
    });
}

template <typename T>
Tensor<T> complex_real(Tensor<T> x) {
    if (x.dim(x.ndim() - 1) != 2) throw std::invalid_argument("complex_real: not a complex pair");
    Shape os(x.shape().begin(), x.shape().end() - 1);
    std::vector<T> out(static_cast<size_t>(x.numel() / 2));
    const auto& xv = x.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] = xv[2 * i];
    return make_op_node<T>("complex_real", std::move(os), std::move(out), {x}, [x](TensorNode<T>& nd) mutable {
        if (!x.requires_grad()) return;
        auto& gx = x.grad();
        for (size_t i = 0; i < nd.grad.size(); ++i) gx[2 * i] += nd.grad[i];
    });
}

// keep columns [0, W/2] of a full spectrum [..,H,W,2] -> [..,H,W/2+1,2]
template <typename T>
Tensor<T> halfspec_slice(Tensor<T> x) {
    int64_t batch, h, w;
    detail::fft_dims(x, batch, h, w);
    const int64_t wh = w / 2 + 1;
    Shape os = x.shape();
    os[os.size() - 2] = wh;
    auto idx = std::make_shared<std::vector<int64_t>>();
    idx->reserve(static_cast<size_t>(batch * h * wh * 2));
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t i = 0; i < h; ++i)
            for (int64_t j = 0; j < wh; ++j) {
                idx->push_back(((b * h + i) * w + j) * 2);
                idx->push_back(((b * h + i) * w + j) * 2 + 1);
            }
    return gather_index(x, std::move(os), std::move(idx), "halfspec_slice");
}

// rebuild the full spectrum from a half spectrum by Hermitian symmetry
template <typename T>
Tensor<T> hermitian_expand(Tensor<T> x, int64_t w_full) {
    if (x.ndim() < 3 || x.dim(x.ndim() - 1) != 2) throw std::invalid_argument("hermitian_expand: not a complex pair");
    const int64_t h = x.dim(x.ndim() - 3), wh = x.dim(x.ndim() - 2);
    if (wh != w_full / 2 + 1) throw std::invalid_argument("hermitian_expand: half width inconsistent");
    const int64_t batch = x.numel() / (h * wh * 2);
    Shape os = x.shape();
    os[os.size() - 2] = w_full;

    std::vector<T> out(static_cast<size_t>(batch * h * w_full * 2));
    const auto& xv = x.values();
    auto src_at = [&](int64_t b, int64_t i, int64_t j) { return ((b * h + i) * wh + j) * 2; };
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t i = 0; i < h; ++i)
            for (int64_t j = 0; j < w_full; ++j) {
                const int64_t o = ((b * h + i) * w_full + j) * 2;
                if (j < wh) {
                    const int64_t s = src_at(b, i, j);
                    out[static_cast<size_t>(o)] = xv[static_cast<size_t>(s)];
                    out[static_cast<size_t>(o + 1)] = xv[static_cast<size_t>(s + 1)];
                } else {
                    const int64_t s = src_at(b, (h - i) % h, w_full - j);
                    out[static_cast<size_t>(o)] = xv[static_cast<size_t>(s)];
                    out[static_cast<size_t>(o + 1)] = -xv[static_cast<size_t>(s + 1)];
                }
            }
    return make_op_node<T>("hermitian_expand", std::move(os), std::move(out), {x},
                           [x, batch, h, wh, w_full](TensorNode<T>& nd) mutable {
        if (!x.requires_grad()) return;
        auto& gx = x.grad();
        auto src_at = [&](int64_t b, int64_t i, int64_t j) { return ((b * h + i) * wh + j) * 2; };
        for (int64_t b = 0; b < batch; ++b)
            for (int64_t i = 0; i < h; ++i)
                for (int64_t j = 0; j < w_full; ++j) {
                    const int64_t o = ((b * h + i) * w_full + j) * 2;
                    if (j < wh) {
                        const int64_t s = src_at(b, i, j);
                        gx[static_cast<size_t>(s)] += nd.grad[static_cast<size_t>(o)];
                        gx[static_cast<size_t>(s + 1)] += nd.grad[static_cast<size_t>(o + 1)];
                    } else {
                        const int64_t s = src_at(b, (h - i) % h, w_full - j);
                        gx[static_cast<size_t>(s)] += nd.grad[static_cast<size_t>(o)];
                        gx[static_cast<size_t>(s + 1)] -= nd.grad[static_cast<size_t>(o + 1)];
                    }
                }
    });
}

// complex multiply, w broadcast over the batch axis: x [N,C,H,Wh,2] * w [C,H,Wh,2]
template <typename T>
Tensor<T> complex_mul_bcast(Tensor<T> x, Tensor<T> w) {
    if (x.dim(x.ndim() - 1) != 2 || w.dim(w.ndim() - 1) != 2)
        throw std::invalid_argument("complex_mul: not complex pairs");
    const int64_t inner = w.numel();
    if (x.numel() % inner != 0) throw std::invalid_argument("complex_mul: broadcast mismatch");
    const int64_t n = x.numel() / inner;
    const int64_t pairs = inner / 2;

    std::vector<T> out(x.values().size());
    const auto& xv = x.values();
    const auto& wv = w.values();
    for (int64_t b = 0; b < n; ++b)
        for (int64_t i = 0; i < pairs; ++i) {
            const size_t k = static_cast<size_t>(b * inner + 2 * i);
            const T xr = xv[k], xi = xv[k + 1];
            const T wr = wv[static_cast<size_t>(2 * i)], wi = wv[static_cast<size_t>(2 * i + 1)];
            out[k] = xr * wr - xi * wi;
            out[k + 1] = xr * wi + xi * wr;
        }
    return make_op_node<T>("complex_mul", x.shape(), std::move(out), {x, w},
                           [x, w, n, inner, pairs](TensorNode<T>& nd) mutable {
        const auto& xv = x.values();
        const auto& wv = w.values();
        if (x.requires_grad()) {
            auto& gx = x.grad();
            for (int64_t b = 0; b < n; ++b)
                for (int64_t i = 0; i < pairs; ++i) {
                    const size_t k = static_cast<size_t>(b * inner + 2 * i);
                    const T wr = wv[static_cast<size_t>(2 * i)], wi = wv[static_cast<size_t>(2 * i + 1)];
                    gx[k] += nd.grad[k] * wr + nd.grad[k + 1] * wi;
                    gx[k + 1] += -nd.grad[k] * wi + nd.grad[k + 1] * wr;
                }
        }
        if (w.requires_grad()) {
            auto& gw = w.grad();
            for (int64_t b = 0; b < n; ++b)
                for (int64_t i = 0; i < pairs; ++i) {
                    const size_t k = static_cast<size_t>(b * inner + 2 * i);
                    const T xr = xv[k], xi = xv[k + 1];
                    gw[static_cast<size_t>(2 * i)] += nd.grad[k] * xr + nd.grad[k + 1] * xi;
                    gw[static_cast<size_t>(2 * i + 1)] += -nd.grad[k] * xi + nd.grad[k + 1] * xr;
                }
        }
    });
}

// real 2-D FFT: real [..,H,W] -> half spectrum [..,H,W/2+1,2]
template <typename T>
Tensor<T> rfft2(Tensor<T> x) {
    return halfspec_slice(fft2(make_complex(x)));
}

// inverse of rfft2 back to a real [..,H,W] map
template <typename T>
Tensor<T> irfft2(Tensor<T> xh, int64_t w_full) {
    return complex_real(ifft2(hermitian_expand(xh, w_full)));
}

} // namespace ivct
