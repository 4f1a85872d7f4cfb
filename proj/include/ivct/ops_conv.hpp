#pragma once

// conv2d / conv_transpose2d / pooling / padding on the tape. Convolutions run
// as im2col + GEMM (Eigen, single-threaded for reproducibility).

#include <Eigen/Dense>

#include "ivct/ops.hpp"

namespace ivct {

enum class PadMode { zero, reflect, symmetric };

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

// pad bottom/right or all sides; reflect excludes the edge sample, symmetric
// repeats it (supports pad up to the full extent)
template <typename T>
Tensor<T> pad2d(Tensor<T> x, int64_t top, int64_t bottom, int64_t left, int64_t right, PadMode mode) {
    if (x.ndim() != 4) throw std::invalid_argument("pad2d: expected [N,C,H,W]");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t ho = h + top + bottom, wo = w + left + right;
    if (mode == PadMode::reflect && (top >= h || bottom >= h || left >= w || right >= w))
        throw std::invalid_argument("pad2d: reflect pad exceeds extent");
    if (mode == PadMode::symmetric && (top > h || bottom > h || left > w || right > w))
        throw std::invalid_argument("pad2d: symmetric pad exceeds extent");

    auto mirror = [mode](int64_t i, int64_t size) -> int64_t {
        if (i >= 0 && i < size) return i;
        if (mode == PadMode::zero) return -1;
        if (mode == PadMode::reflect) return i < 0 ? -i : 2 * size - 2 - i;
        return i < 0 ? -i - 1 : 2 * size - 1 - i; // symmetric
    };

    auto idx = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n * c * ho * wo));
    int64_t k = 0;
    for (int64_t nc = 0; nc < n * c; ++nc)
        for (int64_t i = 0; i < ho; ++i) {
            const int64_t si = mirror(i - top, h);
            for (int64_t j = 0; j < wo; ++j) {
                const int64_t sj = mirror(j - left, w);
                (*idx)[static_cast<size_t>(k++)] = (si < 0 || sj < 0) ? -1 : (nc * h + si) * w + sj;
            }
        }

    const auto& xv = x.values();
    std::vector<T> out(idx->size(), T(0));
    for (size_t i = 0; i < out.size(); ++i)
        if ((*idx)[i] >= 0) out[i] = xv[static_cast<size_t>((*idx)[i])];
    return make_op_node<T>("pad2d", Shape{n, c, ho, wo}, std::move(out), {x}, [x, idx](TensorNode<T>& nd) mutable {
        if (!x.requires_grad()) return;
        auto& gx = x.grad();
        for (size_t i = 0; i < idx->size(); ++i)
            if ((*idx)[i] >= 0) gx[static_cast<size_t>((*idx)[i])] += nd.grad[i];
    });
}

namespace detail {

// col: [Cg*kh*kw, oh*ow] from x channel block [Cg, h, w], zero outside
template <typename T>
void im2col(const T* x, int64_t cg, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t ph, int64_t pw, int64_t oh, int64_t ow, T* col) {
    for (int64_t c = 0; c < cg; ++c)
        for (int64_t ki = 0; ki < kh; ++ki)
            for (int64_t kj = 0; kj < kw; ++kj) {
                T* dst = col + ((c * kh + ki) * kw + kj) * oh * ow;
                for (int64_t oi = 0; oi < oh; ++oi) {
                    const int64_t si = oi * stride - ph + ki;
                    if (si < 0 || si >= h) {
                        std::fill(dst, dst + ow, T(0));
                        dst += ow;
                        continue;
                    }
                    const T* src = x + (c * h + si) * w;
                    for (int64_t oj = 0; oj < ow; ++oj) {
                        const int64_t sj = oj * stride - pw + kj;
                        *dst++ = (sj < 0 || sj >= w) ? T(0) : src[sj];
                    }
                }
            }
}

template <typename T>
void col2im_add(const T* col, int64_t cg, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
                int64_t ph, int64_t pw, int64_t oh, int64_t ow, T* x) {
    for (int64_t c = 0; c < cg; ++c)
        for (int64_t ki = 0; ki < kh; ++ki)
            for (int64_t kj = 0; kj < kw; ++kj) {
                const T* src = col + ((c * kh + ki) * kw + kj) * oh * ow;
                for (int64_t oi = 0; oi < oh; ++oi, src += ow) {
                    const int64_t si = oi * stride - ph + ki;
                    if (si < 0 || si >= h) continue;
                    T* dst = x + (c * h + si) * w;
                    for (int64_t oj = 0; oj < ow; ++oj) {
                        const int64_t sj = oj * stride - pw + kj;
                        if (sj >= 0 && sj < w) dst[sj] += src[oj];
                    }
                }
            }
}

} // namespace detail

// Cross-correlation, kernel [Cout, Cin/groups, kh, kw], optional bias [Cout].
// `pad` applies zero padding on all sides; use pad2d first for reflect.
template <typename T>
Tensor<T> conv2d(Tensor<T> x, Tensor<T> kernel, Tensor<T> bias, int64_t stride = 1,
                 int64_t pad = 0, int64_t groups = 1) {
    if (x.ndim() != 4 || kernel.ndim() != 4) throw std::invalid_argument("conv2d: expected 4-D input and kernel");
    const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t cout = kernel.dim(0), cg = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    if (cin != cg * groups || cout % groups != 0)
        throw std::invalid_argument("conv2d: channel/group mismatch " + shape_str(x.shape()) + " vs kernel " +
                                    shape_str(kernel.shape()));
    if (bias.defined() && bias.numel() != cout) throw std::invalid_argument("conv2d: bias size mismatch");
    const int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const int64_t ow = (w + 2 * pad - kw) / stride + 1;
    if (oh < 1 || ow < 1) throw std::invalid_argument("conv2d: kernel larger than padded input");
    const int64_t og = cout / groups;
    const int64_t krows = cg * kh * kw;

    std::vector<T> out(static_cast<size_t>(n * cout * oh * ow));
    std::vector<T> col(static_cast<size_t>(krows * oh * ow));
    const T* xd = x.data();
    const T* kd = kernel.data();
    for (int64_t in = 0; in < n; ++in)
        for (int64_t g = 0; g < groups; ++g) {
            detail::im2col(xd + (in * cin + g * cg) * h * w, cg, h, w, kh, kw, stride, pad, pad, oh, ow, col.data());
            CMapRM<T> km(kd + g * og * krows, og, krows);
            CMapRM<T> cm(col.data(), krows, oh * ow);
            MapRM<T> om(out.data() + (in * cout + g * og) * oh * ow, og, oh * ow);
            om.noalias() = km * cm;
        }
    if (bias.defined()) {
        const T* bd = bias.data();
        for (int64_t in = 0; in < n; ++in)
            for (int64_t c = 0; c < cout; ++c) {
                T* p = out.data() + (in * cout + c) * oh * ow;
                for (int64_t j = 0; j < oh * ow; ++j) p[j] += bd[c];
            }
    }

    std::vector<Tensor<T>> parents = bias.defined() ? std::vector<Tensor<T>>{x, kernel, bias}
                                                    : std::vector<Tensor<T>>{x, kernel};
    return make_op_node<T>("conv2d", Shape{n, cout, oh, ow}, std::move(out), std::move(parents),
                           [x, kernel, bias, n, cin, h, w, cout, cg, kh, kw, stride, pad, groups, oh, ow, og,
                            krows](TensorNode<T>& nd) mutable {
        std::vector<T> col(static_cast<size_t>(krows * oh * ow));
        const T* xd = x.data();
        const T* kd = kernel.data();
        for (int64_t in = 0; in < n; ++in)
            for (int64_t g = 0; g < groups; ++g) {
                CMapRM<T> gy(nd.grad.data() + (in * cout + g * og) * oh * ow, og, oh * ow);
                if (kernel.requires_grad()) {
                    detail::im2col(xd + (in * cin + g * cg) * h * w, cg, h, w, kh, kw, stride, pad, pad, oh, ow,
                                   col.data());
                    CMapRM<T> cm(col.data(), krows, oh * ow);
                    MapRM<T> gk(kernel.grad().data() + g * og * krows, og, krows);
                    gk.noalias() += gy * cm.transpose();
                }
                if (x.requires_grad()) {
                    CMapRM<T> km(kd + g * og * krows, og, krows);
                    MapRM<T> cm(col.data(), krows, oh * ow);
                    cm.noalias() = km.transpose() * gy;
                    detail::col2im_add(col.data(), cg, h, w, kh, kw, stride, pad, pad, oh, ow,
                                       x.grad().data() + (in * cin + g * cg) * h * w);
                }
            }
        if (bias.defined() && bias.requires_grad()) {
            auto& gb = bias.grad();
            for (int64_t in = 0; in < n; ++in)
                for (int64_t c = 0; c < cout; ++c) {
                    const T* p = nd.grad.data() + (in * cout + c) * oh * ow;
                    T acc = 0;
                    for (int64_t j = 0; j < oh * ow; ++j) acc += p[j];
                    gb[static_cast<size_t>(c)] += acc;
                }
        }
    });
}

// conv2d with an explicit padding mode per the tensor contract
template <typename T>
Tensor<T> conv2d_padded(Tensor<T> x, Tensor<T> kernel, Tensor<T> bias, int64_t stride,
                        int64_t pad, PadMode mode, int64_t groups = 1) {
    if (mode == PadMode::zero || pad == 0) return conv2d(x, kernel, bias, stride, pad, groups);
    return conv2d(pad2d(x, pad, pad, pad, pad, mode), kernel, bias, stride, 0, groups);
}

// Transposed convolution, kernel [Cin, Cout, kh, kw]; output (h-1)*stride+kh.
// Forward is the adjoint of a conv2d with the same kernel.
template <typename T>
Tensor<T> conv_transpose2d(Tensor<T> x, Tensor<T> kernel, Tensor<T> bias, int64_t stride) {
    if (x.ndim() != 4 || kernel.ndim() != 4) throw std::invalid_argument("conv_transpose2d: expected 4-D");
    const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (kernel.dim(0) != cin) throw std::invalid_argument("conv_transpose2d: channel mismatch");
    const int64_t cout = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    const int64_t oh = (h - 1) * stride + kh, ow = (w - 1) * stride + kw;
    const int64_t krows = cout * kh * kw;

    std::vector<T> out(static_cast<size_t>(n * cout * oh * ow), T(0));
    std::vector<T> col(static_cast<size_t>(krows * h * w));
    const T* kd = kernel.data();
    CMapRM<T> km(kd, cin, krows);
    for (int64_t in = 0; in < n; ++in) {
        CMapRM<T> xm(x.data() + in * cin * h * w, cin, h * w);
        MapRM<T> cm(col.data(), krows, h * w);
        cm.noalias() = km.transpose() * xm;
        detail::col2im_add(col.data(), cout, oh, ow, kh, kw, stride, 0, 0, h, w, out.data() + in * cout * oh * ow);
    }
    if (bias.defined()) {
        if (bias.numel() != cout) throw std::invalid_argument("conv_transpose2d: bias size mismatch");
        const T* bd = bias.data();
        for (int64_t in = 0; in < n; ++in)
            for (int64_t c = 0; c < cout; ++c) {
                T* p = out.data() + (in * cout + c) * oh * ow;
                for (int64_t j = 0; j < oh * ow; ++j) p[j] += bd[c];
            }
    }

    std::vector<Tensor<T>> parents = bias.defined() ? std::vector<Tensor<T>>{x, kernel, bias}
                                                    : std::vector<Tensor<T>>{x, kernel};
    return make_op_node<T>("conv_transpose2d", Shape{n, cout, oh, ow}, std::move(out), std::move(parents),
                           [x, kernel, bias, n, cin, h, w, cout, kh, kw, stride, oh, ow, krows](TensorNode<T>& nd) mutable {
        std::vector<T> col(static_cast<size_t>(krows * h * w));
        for (int64_t in = 0; in < n; ++in) {
            // adjoint of the forward col2im scatter
            detail::im2col(nd.grad.data() + in * cout * oh * ow, cout, oh, ow, kh, kw, stride, 0, 0, h, w, col.data());
            CMapRM<T> cm(col.data(), krows, h * w);
            if (x.requires_grad()) {
                CMapRM<T> km(kernel.data(), cin, krows);
                MapRM<T> gx(x.grad().data() + in * cin * h * w, cin, h * w);
                gx.noalias() += km * cm;
            }
            if (kernel.requires_grad()) {
                CMapRM<T> xm(x.data() + in * cin * h * w, cin, h * w);
                MapRM<T> gk(kernel.grad().data(), cin, krows);
                gk.noalias() += xm * cm.transpose();
            }
        }
        if (bias.defined() && bias.requires_grad()) {
            auto& gb = bias.grad();
            for (int64_t in = 0; in < n; ++in)
                for (int64_t c = 0; c < cout; ++c) {
                    const T* p = nd.grad.data() + (in * cout + c) * oh * ow;
                    T acc = 0;
                    for (int64_t j = 0; j < oh * ow; ++j) acc += p[j];
                    gb[static_cast<size_t>(c)] += acc;
                }
        }
    });
}

// avg pool 2x2 stride 2; odd extents are zero-padded bottom/right and the
// padded zeros count toward the average
template <typename T>
Tensor<T> avg_pool2x2(Tensor<T> x) {
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t oh = (h + 1) / 2, ow = (w + 1) / 2;
    std::vector<T> out(static_cast<size_t>(n * c * oh * ow), T(0));
    const T* xd = x.data();
    for (int64_t nc = 0; nc < n * c; ++nc)
        for (int64_t i = 0; i < oh; ++i)
            for (int64_t j = 0; j < ow; ++j) {
                T s = 0;
                for (int64_t di = 0; di < 2; ++di)
                    for (int64_t dj = 0; dj < 2; ++dj) {
                        const int64_t si = 2 * i + di, sj = 2 * j + dj;
                        if (si < h && sj < w) s += xd[(nc * h + si) * w + sj];
                    }
                out[static_cast<size_t>((nc * oh + i) * ow + j)] = s * T(0.25);
            }
    return make_op_node<T>("avg_pool2x2", Shape{n, c, oh, ow}, std::move(out), {x},
                           [x, n, c, h, w, oh, ow](TensorNode<T>& nd) mutable {
        if (!x.requires_grad()) return;
        auto& gx = x.grad();
        for (int64_t nc = 0; nc < n * c; ++nc)
            for (int64_t i = 0; i < oh; ++i)
                for (int64_t j = 0; j < ow; ++j) {
                    const T g = nd.grad[static_cast<size_t>((nc * oh + i) * ow + j)] * T(0.25);
                    for (int64_t di = 0; di < 2; ++di)
                        for (int64_t dj = 0; dj < 2; ++dj) {
                            const int64_t si = 2 * i + di, sj = 2 * j + dj;
                            if (si < h && sj < w) gx[static_cast<size_t>((nc * h + si) * w + sj)] += g;
                        }
                }
    });
}

} // namespace ivct
