#pragma once

// Batched matmul, softmax, linear layers and the window/head layout ops used
// by windowed multi-head self-attention.

#include <Eigen/Dense>

#include "ivct/ops_conv.hpp"

namespace ivct {

// a [B,M,K] x b [B,K,N] (or [B,N,K] with trans_b) -> [B,M,N]
template <typename T>
Tensor<T> matmul_batched(Tensor<T> a, Tensor<T> b, bool trans_b = false) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0))
        throw std::invalid_argument("matmul: expected matching 3-D batches");
    const int64_t bs = a.dim(0), m = a.dim(1), k = a.dim(2);
    const int64_t n = trans_b ? b.dim(1) : b.dim(2);
    if ((trans_b ? b.dim(2) : b.dim(1)) != k) throw std::invalid_argument("matmul: inner dim mismatch");

    std::vector<T> out(static_cast<size_t>(bs * m * n));
    for (int64_t i = 0; i < bs; ++i) {
        CMapRM<T> am(a.data() + i * m * k, m, k);
        MapRM<T> om(out.data() + i * m * n, m, n);
        if (trans_b) {
            CMapRM<T> bm(b.data() + i * n * k, n, k);
            om.noalias() = am * bm.transpose();
        } else {
            CMapRM<T> bm(b.data() + i * k * n, k, n);
            om.noalias() = am * bm;
        }
    }
    return make_op_node<T>("matmul", Shape{bs, m, n}, std::move(out), {a, b},
                           [a, b, bs, m, k, n, trans_b](TensorNode<T>& nd) mutable {
        for (int64_t i = 0; i < bs; ++i) {
            CMapRM<T> gy(nd.grad.data() + i * m * n, m, n);
            if (a.requires_grad()) {
                MapRM<T> ga(a.grad().data() + i * m * k, m, k);
                if (trans_b) {
                    CMapRM<T> bm(b.data() + i * n * k, n, k);
                    ga.noalias() += gy * bm;
                } else {
                    CMapRM<T> bm(b.data() + i * k * n, k, n);
                    ga.noalias() += gy * bm.transpose();
                }
            }
            if (b.requires_grad()) {
                CMapRM<T> am(a.data() + i * m * k, m, k);
                if (trans_b) {
                    MapRM<T> gb(b.grad().data() + i * n * k, n, k);
                    gb.noalias() += gy.transpose() * am;
                } else {
                    MapRM<T> gb(b.grad().data() + i * k * n, k, n);
                    gb.noalias() += am.transpose() * gy;
                }
            }
        }
    });
}

// y [B,out] = x [B,in] * W^T + bias, W [out,in]
template <typename T>
Tensor<T> linear(Tensor<T> x, Tensor<T> weight, Tensor<T> bias) {
    if (x.ndim() != 2 || weight.ndim() != 2 || x.dim(1) != weight.dim(1))
        throw std::invalid_argument("linear: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(weight.shape()));
    const int64_t bs = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
    std::vector<T> out(static_cast<size_t>(bs * out_dim));
    CMapRM<T> xm(x.data(), bs, in);
    CMapRM<T> wm(weight.data(), out_dim, in);
    MapRM<T> om(out.data(), bs, out_dim);
    om.noalias() = xm * wm.transpose();
    if (bias.defined()) {
        if (bias.numel() != out_dim) throw std::invalid_argument("linear: bias size mismatch");
        for (int64_t i = 0; i < bs; ++i)
            for (int64_t j = 0; j < out_dim; ++j) out[static_cast<size_t>(i * out_dim + j)] += bias.data()[j];
    }
    std::vector<Tensor<T>> parents = bias.defined() ? std::vector<Tensor<T>>{x, weight, bias}
                                                    : std::vector<Tensor<T>>{x, weight};
    return make_op_node<T>("linear", Shape{bs, out_dim}, std::move(out), std::move(parents),
                           [x, weight, bias, bs, in, out_dim](TensorNode<T>& nd) mutable {
        CMapRM<T> gy(nd.grad.data(), bs, out_dim);
        if (x.requires_grad()) {
            CMapRM<T> wm(weight.data(), out_dim, in);
            MapRM<T> gx(x.grad().data(), bs, in);
            gx.noalias() += gy * wm;
        }
        if (weight.requires_grad()) {
            CMapRM<T> xm(x.data(), bs, in);
            MapRM<T> gw(weight.grad().data(), out_dim, in);
            gw.noalias() += gy.transpose() * xm;
        }
        if (bias.defined() && bias.requires_grad()) {
            auto& gb = bias.grad();
            for (int64_t i = 0; i < bs; ++i)
                for (int64_t j = 0; j < out_dim; ++j) gb[static_cast<size_t>(j)] += nd.grad[static_cast<size_t>(i * out_dim + j)];
        }
    });
}

// numerically stabilized softmax along `axis`
template <typename T>
Tensor<T> softmax(Tensor<T> x, int axis) {
    const int nd = x.ndim();
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) throw std::invalid_argument("softmax: bad axis");
    int64_t outer = 1, len = x.dim(axis), inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < nd; ++i) inner *= x.dim(i);

    std::vector<T> out(x.values());
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < inner; ++in) {
            T* p = out.data() + o * len * inner + in;
            T mx = p[0];
            for (int64_t l = 1; l < len; ++l) mx = std::max(mx, p[l * inner]);
            T sum = 0;
            for (int64_t l = 0; l < len; ++l) {
                const T e = std::exp(p[l * inner] - mx);
                p[l * inner] = e;
                sum += e;
            }
            const T inv = T(1) / sum;
            for (int64_t l = 0; l < len; ++l) p[l * inner] *= inv;
        }
    // nd.values is the softmax output itself
    return make_op_node<T>("softmax", x.shape(), std::move(out), {x}, [x, outer, len, inner](TensorNode<T>& nd) mutable {
        if (!x.requires_grad()) return;
        auto& gx = x.grad();
        const auto& y = nd.values;
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t in = 0; in < inner; ++in) {
                const int64_t base = o * len * inner + in;
                T dot = 0;
                for (int64_t l = 0; l < len; ++l)
                    dot += nd.grad[static_cast<size_t>(base + l * inner)] * y[static_cast<size_t>(base + l * inner)];
                for (int64_t l = 0; l < len; ++l) {
                    const size_t k = static_cast<size_t>(base + l * inner);
                    gx[k] += y[k] * (nd.grad[k] - dot);
                }
            }
    });
}

// ---- windowing ---------------------------------------------------------

inline int64_t ceil_to(int64_t v, int64_t m) { return (v + m - 1) / m * m; }

// [N,C,H,W] -> [N*nwin, C, win, win]; non-divisible extents are padded with a
// symmetric reflection on the bottom/right and cropped again on merge
template <typename T>
Tensor<T> window_partition(Tensor<T> x, int64_t win) {
    if (x.ndim() != 4) throw std::invalid_argument("window_partition: expected [N,C,H,W]");
    const int64_t h = x.dim(2), w = x.dim(3);
    if (win < 1) throw std::invalid_argument("window_partition: win must be >= 1");
    if (win > 2 * std::min(h, w)) throw std::invalid_argument("window_partition: win larger than 2*min(H,W)");
    Tensor<T> xp = x;
    const int64_t hp = ceil_to(h, win), wp = ceil_to(w, win);
    if (hp != h || wp != w) xp = pad2d(x, 0, hp - h, 0, wp - w, PadMode::symmetric);
    const int64_t n = xp.dim(0), c = xp.dim(1);
    const int64_t nh = hp / win, nw = wp / win;
    auto idx = std::make_shared<std::vector<int64_t>>();
    idx->reserve(static_cast<size_t>(n * c * hp * wp));
    for (int64_t in = 0; in < n; ++in)
        for (int64_t bi = 0; bi < nh; ++bi)
            for (int64_t bj = 0; bj < nw; ++bj)
                for (int64_t ch = 0; ch < c; ++ch)
                    for (int64_t i = 0; i < win; ++i)
                        for (int64_t j = 0; j < win; ++j)
                            idx->push_back(((in * c + ch) * hp + bi * win + i) * wp + bj * win + j);
    return gather_index(xp, Shape{n * nh * nw, c, win, win}, std::move(idx), "window_partition");
}

// inverse of window_partition for an original [N,C,H,W] map
template <typename T>
Tensor<T> window_merge(Tensor<T> xw, int64_t win, int64_t n, int64_t c, int64_t h, int64_t w) {
    const int64_t hp = ceil_to(h, win), wp = ceil_to(w, win);
    const int64_t nh = hp / win, nw = wp / win;
    if (xw.ndim() != 4 || xw.dim(0) != n * nh * nw || xw.dim(1) != c || xw.dim(2) != win || xw.dim(3) != win)
        throw std::invalid_argument("window_merge: window tensor does not match target size");
    auto idx = std::make_shared<std::vector<int64_t>>();
    idx->reserve(static_cast<size_t>(n * c * h * w));
    for (int64_t in = 0; in < n; ++in)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t i = 0; i < h; ++i)
                for (int64_t j = 0; j < w; ++j) {
                    const int64_t bi = i / win, bj = j / win;
                    const int64_t blk = (in * nh + bi) * nw + bj;
                    idx->push_back(((blk * c + ch) * win + (i - bi * win)) * win + (j - bj * win));
                }
    return gather_index(xw, Shape{n, c, h, w}, std::move(idx), "window_merge");
}

// [B,C,win,win] -> [B*heads, win*win, C/heads] token layout for attention
template <typename T>
Tensor<T> heads_to_tokens(Tensor<T> x, int64_t heads) {
    const int64_t b = x.dim(0), c = x.dim(1), hh = x.dim(2), ww = x.dim(3);
    if (c % heads != 0) throw std::invalid_argument("heads_to_tokens: heads must divide channels");
    const int64_t d = c / heads, l = hh * ww;
    auto idx = std::make_shared<std::vector<int64_t>>();
    idx->reserve(static_cast<size_t>(b * c * l));
    for (int64_t ib = 0; ib < b; ++ib)
        for (int64_t hd = 0; hd < heads; ++hd)
            for (int64_t t = 0; t < l; ++t)
                for (int64_t k = 0; k < d; ++k) idx->push_back((ib * c + hd * d + k) * l + t);
    return gather_index(x, Shape{b * heads, l, d}, std::move(idx), "heads_to_tokens");
}

template <typename T>
Tensor<T> tokens_to_heads(Tensor<T> x, int64_t heads, int64_t win) {
    const int64_t bh = x.dim(0), l = x.dim(1), d = x.dim(2);
    if (bh % heads != 0 || l != win * win) throw std::invalid_argument("tokens_to_heads: layout mismatch");
    const int64_t b = bh / heads, c = heads * d;
    auto idx = std::make_shared<std::vector<int64_t>>();
    idx->reserve(static_cast<size_t>(b * c * l));
    for (int64_t ib = 0; ib < b; ++ib)
        for (int64_t ch = 0; ch < c; ++ch) {
            const int64_t hd = ch / d, k = ch % d;
            for (int64_t t = 0; t < l; ++t) idx->push_back(((ib * heads + hd) * l + t) * d + k);
        }
    return gather_index(x, Shape{b, c, win, win}, std::move(idx), "tokens_to_heads");
}

} // namespace ivct
