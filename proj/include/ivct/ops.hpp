#pragma once

// Elementwise, broadcast, reduction and layout ops on the autodiff tape.

#include <algorithm>
#include <cstring>

#include "ivct/tensor.hpp"

namespace ivct {

template <typename T>
void require_same_shape(Tensor<T> a, Tensor<T> b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

// ---- binary elementwise ----------------------------------------------------

template <typename T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
    require_same_shape(a, b, "add");
    std::vector<T> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make_op_node<T>("add", a.shape(), std::move(out), {a, b}, [a, b](TensorNode<T>& n) mutable {
        if (a.requires_grad()) {
            auto& ga = a.grad();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
        }
        if (b.requires_grad()) {
            auto& gb = b.grad();
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(Tensor<T> a, Tensor<T> b) {
    require_same_shape(a, b, "sub");
    std::vector<T> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return make_op_node<T>("sub", a.shape(), std::move(out), {a, b}, [a, b](TensorNode<T>& n) mutable {
        if (a.requires_grad()) {
            auto& ga = a.grad();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
        }
        if (b.requires_grad()) {
            auto& gb = b.grad();
            for (size_t i = 0; i < gb.size(); ++i) gb[i] -= n.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
    require_same_shape(a, b, "mul");
    std::vector<T> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return make_op_node<T>("mul", a.shape(), std::move(out), {a, b}, [a, b](TensorNode<T>& n) mutable {
        if (a.requires_grad()) {
            auto& ga = a.grad();
            const auto& bv = b.values();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * bv[i];
        }
        if (b.requires_grad()) {
            auto& gb = b.grad();
            const auto& av = a.values();
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[i] * av[i];
        }
    });
}

template <typename T>
Tensor<T> div_elem(Tensor<T> a, Tensor<T> b) {
    require_same_shape(a, b, "div");
    std::vector<T> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
    return make_op_node<T>("div", a.shape(), std::move(out), {a, b}, [a, b](TensorNode<T>& n) mutable {
        const auto& av = a.values();
        const auto& bv = b.values();
        if (a.requires_grad()) {
            auto& ga = a.grad();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] / bv[i];
        }
        if (b.requires_grad()) {
            auto& gb = b.grad();
            for (size_t i = 0; i < gb.size(); ++i) gb[i] -= n.grad[i] * av[i] / (bv[i] * bv[i]);
        }
    });
}

// ---- unary -----------------------------------------------------------------

template <typename T>
Tensor<T> scale(Tensor<T> a, T c) {
    std::vector<T> out(a.values());
    for (auto& x : out) x *= c;
    return make_op_node<T>("scale", a.shape(), std::move(out), {a}, [a, c](TensorNode<T>& n) mutable {
        if (!a.requires_grad()) return;
        auto& ga = a.grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * c;
    });
}

template <typename T>
Tensor<T> neg(Tensor<T> a) { return scale(a, T(-1)); }

template <typename T>
Tensor<T> add_scalar(Tensor<T> a, T c) {
    std::vector<T> out(a.values());
    for (auto& x : out) x += c;
    return make_op_node<T>("add_scalar", a.shape(), std::move(out), {a}, [a](TensorNode<T>& n) mutable {
        if (!a.requires_grad()) return;
        auto& ga = a.grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
    });
}

template <typename T>
Tensor<T> relu(Tensor<T> a) {
    std::vector<T> out(a.values());
    for (auto& x : out) x = x > T(0) ? x : T(0);
    return make_op_node<T>("relu", a.shape(), std::move(out), {a}, [a](TensorNode<T>& n) mutable {
        if (!a.requires_grad()) return;
        auto& ga = a.grad();
        const auto& av = a.values();
        for (size_t i = 0; i < ga.size(); ++i)
            if (av[i] > T(0)) ga[i] += n.grad[i];
    });
}

// |x|, with subgradient 0 at x = 0
template <typename T>
Tensor<T> abs_t(Tensor<T> a) {
    std::vector<T> out(a.values());
    for (auto& x : out) x = std::abs(x);
    return make_op_node<T>("abs", a.shape(), std::move(out), {a}, [a](TensorNode<T>& n) mutable {
        if (!a.requires_grad()) return;
        auto& ga = a.grad();
        const auto& av = a.values();
        for (size_t i = 0; i < ga.size(); ++i) {
            if (av[i] > T(0)) ga[i] += n.grad[i];
            else if (av[i] < T(0)) ga[i] -= n.grad[i];
        }
    });
}

// sqrt(x + eps); never divides by zero in the backward pass
template <typename T>
Tensor<T> sqrt_eps(Tensor<T> a, T eps) {
    std::vector<T> out(a.values());
    for (auto& x : out) x = std::sqrt(x + eps);
    // n.values is this op's own output y = sqrt(x+eps)
    return make_op_node<T>("sqrt_eps", a.shape(), std::move(out), {a}, [a](TensorNode<T>& n) mutable {
        if (!a.requires_grad()) return;
        auto& ga = a.grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * T(0.5) / n.values[i];
    });
}

// max(x, floor)^e, gradient zero at/below the floor (used for MS-SSIM weights)
template <typename T>
Tensor<T> pow_floor(Tensor<T> a, T e, T floor) {
    std::vector<T> out(a.values());
    for (auto& x : out) x = std::pow(std::max(x, floor), e);
    return make_op_node<T>("pow_floor", a.shape(), std::move(out), {a}, [a, e, floor](TensorNode<T>& n) mutable {
        if (!a.requires_grad()) return;
        auto& ga = a.grad();
        const auto& av = a.values();
        for (size_t i = 0; i < ga.size(); ++i)
            if (av[i] > floor) ga[i] += n.grad[i] * e * std::pow(av[i], e - T(1));
    });
}

// ---- reductions ------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(Tensor<T> a) {
    T s = 0;
    for (const T x : a.values()) s += x;
    return make_op_node<T>("sum", Shape{1}, {s}, {a}, [a](TensorNode<T>& n) mutable {
        if (!a.requires_grad()) return;
        auto& ga = a.grad();
        const T g = n.grad[0];
        for (auto& x : ga) x += g;
    });
}

template <typename T>
Tensor<T> mean_all(Tensor<T> a) {
    T s = 0;
    for (const T x : a.values()) s += x;
    const T inv = T(1) / static_cast<T>(a.numel());
    return make_op_node<T>("mean", Shape{1}, {s * inv}, {a}, [a, inv](TensorNode<T>& n) mutable {
        if (!a.requires_grad()) return;
        auto& ga = a.grad();
        const T g = n.grad[0] * inv;
        for (auto& x : ga) x += g;
    });
}

// mean over all axes except axis 0: [N,...] -> [N]
template <typename T>
Tensor<T> mean_per_sample(Tensor<T> a) {
    const int64_t n = a.dim(0);
    const int64_t inner = a.numel() / n;
    std::vector<T> out(static_cast<size_t>(n), T(0));
    const auto& av = a.values();
    for (int64_t i = 0; i < n; ++i) {
        T s = 0;
        for (int64_t j = 0; j < inner; ++j) s += av[static_cast<size_t>(i * inner + j)];
        out[static_cast<size_t>(i)] = s / static_cast<T>(inner);
    }
    return make_op_node<T>("mean_ps", Shape{n}, std::move(out), {a}, [a, n, inner](TensorNode<T>& nd) mutable {
        if (!a.requires_grad()) return;
        auto& ga = a.grad();
        const T inv = T(1) / static_cast<T>(inner);
        for (int64_t i = 0; i < n; ++i) {
            const T g = nd.grad[static_cast<size_t>(i)] * inv;
            for (int64_t j = 0; j < inner; ++j) ga[static_cast<size_t>(i * inner + j)] += g;
        }
    });
}

// ---- broadcast helpers -----------------------------------------------------

// x[N,...] op v[N], v broadcast over each sample's inner elements
template <typename T>
Tensor<T> sub_per_sample(Tensor<T> x, Tensor<T> v) {
    const int64_t n = x.dim(0), inner = x.numel() / n;
    if (v.numel() != n) throw std::invalid_argument("sub_per_sample: length mismatch");
    std::vector<T> out(x.values());
    const auto& vv = v.values();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < inner; ++j) out[static_cast<size_t>(i * inner + j)] -= vv[static_cast<size_t>(i)];
    return make_op_node<T>("sub_ps", x.shape(), std::move(out), {x, v}, [x, v, n, inner](TensorNode<T>& nd) mutable {
        if (x.requires_grad()) {
            auto& gx = x.grad();
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += nd.grad[i];
        }
        if (v.requires_grad()) {
            auto& gv = v.grad();
            for (int64_t i = 0; i < n; ++i) {
                T s = 0;
                for (int64_t j = 0; j < inner; ++j) s += nd.grad[static_cast<size_t>(i * inner + j)];
                gv[static_cast<size_t>(i)] -= s;
            }
        }
    });
}

template <typename T>
Tensor<T> div_per_sample(Tensor<T> x, Tensor<T> v) {
    const int64_t n = x.dim(0), inner = x.numel() / n;
    if (v.numel() != n) throw std::invalid_argument("div_per_sample: length mismatch");
    std::vector<T> out(x.values());
    const auto& vv = v.values();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < inner; ++j) out[static_cast<size_t>(i * inner + j)] /= vv[static_cast<size_t>(i)];
    return make_op_node<T>("div_ps", x.shape(), std::move(out), {x, v}, [x, v, n, inner](TensorNode<T>& nd) mutable {
        const auto& vv = v.values();
        const auto& xv = x.values();
        if (x.requires_grad()) {
            auto& gx = x.grad();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < inner; ++j) {
                    const size_t k = static_cast<size_t>(i * inner + j);
                    gx[k] += nd.grad[k] / vv[static_cast<size_t>(i)];
                }
        }
        if (v.requires_grad()) {
            auto& gv = v.grad();
            for (int64_t i = 0; i < n; ++i) {
                const T d = vv[static_cast<size_t>(i)];
                T s = 0;
                for (int64_t j = 0; j < inner; ++j) {
                    const size_t k = static_cast<size_t>(i * inner + j);
                    s += nd.grad[k] * xv[k];
                }
                gv[static_cast<size_t>(i)] -= s / (d * d);
            }
        }
    });
}

// x[N,C,...] scaled/shifted per channel; s is [C] (shared across batch) or [N,C]
template <typename T>
Tensor<T> mul_channel(Tensor<T> x, Tensor<T> s) {
    const int64_t n = x.dim(0), c = x.dim(1), inner = x.numel() / (n * c);
    const bool per_sample = s.ndim() == 2;
    if ((per_sample && (s.dim(0) != n || s.dim(1) != c)) || (!per_sample && s.numel() != c))
        throw std::invalid_argument("mul_channel: channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(s.shape()));
    std::vector<T> out(x.values());
    const auto& sv = s.values();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t ch = 0; ch < c; ++ch) {
            const T f = sv[static_cast<size_t>(per_sample ? i * c + ch : ch)];
            T* p = out.data() + (i * c + ch) * inner;
            for (int64_t j = 0; j < inner; ++j) p[j] *= f;
        }
    return make_op_node<T>("mul_channel", x.shape(), std::move(out), {x, s},
                           [x, s, n, c, inner, per_sample](TensorNode<T>& nd) mutable {
        const auto& sv = s.values();
        const auto& xv = x.values();
        if (x.requires_grad()) {
            auto& gx = x.grad();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t ch = 0; ch < c; ++ch) {
                    const T f = sv[static_cast<size_t>(per_sample ? i * c + ch : ch)];
                    const int64_t base = (i * c + ch) * inner;
                    for (int64_t j = 0; j < inner; ++j) gx[static_cast<size_t>(base + j)] += nd.grad[static_cast<size_t>(base + j)] * f;
                }
        }
        if (s.requires_grad()) {
            auto& gs = s.grad();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t ch = 0; ch < c; ++ch) {
                    const int64_t base = (i * c + ch) * inner;
                    T acc = 0;
                    for (int64_t j = 0; j < inner; ++j) acc += nd.grad[static_cast<size_t>(base + j)] * xv[static_cast<size_t>(base + j)];
                    gs[static_cast<size_t>(per_sample ? i * c + ch : ch)] += acc;
                }
        }
    });
}

template <typename T>
Tensor<T> add_channel(Tensor<T> x, Tensor<T> b) {
    const int64_t n = x.dim(0), c = x.dim(1), inner = x.numel() / (n * c);
    const bool per_sample = b.ndim() == 2;
    if ((per_sample && (b.dim(0) != n || b.dim(1) != c)) || (!per_sample && b.numel() != c))
        throw std::invalid_argument("add_channel: channel mismatch");
    std::vector<T> out(x.values());
    const auto& bv = b.values();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t ch = 0; ch < c; ++ch) {
            const T f = bv[static_cast<size_t>(per_sample ? i * c + ch : ch)];
            T* p = out.data() + (i * c + ch) * inner;
            for (int64_t j = 0; j < inner; ++j) p[j] += f;
        }
    return make_op_node<T>("add_channel", x.shape(), std::move(out), {x, b},
                           [x, b, n, c, inner, per_sample](TensorNode<T>& nd) mutable {
        if (x.requires_grad()) {
            auto& gx = x.grad();
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += nd.grad[i];
        }
        if (b.requires_grad()) {
            auto& gb = b.grad();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t ch = 0; ch < c; ++ch) {
                    const int64_t base = (i * c + ch) * inner;
                    T acc = 0;
                    for (int64_t j = 0; j < inner; ++j) acc += nd.grad[static_cast<size_t>(base + j)];
                    gb[static_cast<size_t>(per_sample ? i * c + ch : ch)] += acc;
                }
        }
    });
}

// ---- layout ----------------------------------------------------------------

template <typename T>
Tensor<T> reshape(Tensor<T> a, Shape shape) {
    if (shape_numel(shape) != a.numel()) throw std::invalid_argument("reshape: element count mismatch");
    std::vector<T> out(a.values());
    return make_op_node<T>("reshape", std::move(shape), std::move(out), {a}, [a](TensorNode<T>& n) mutable {
        if (!a.requires_grad()) return;
        auto& ga = a.grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
    });
}

// out[i] = in[index[i]]; index must reference valid positions. Used for all
// pure permutations/slices (windows, heads, complex packing).
template <typename T>
Tensor<T> gather_index(Tensor<T> a, Shape out_shape, std::shared_ptr<std::vector<int64_t>> index,
                       const char* name = "gather") {
    const auto& av = a.values();
    std::vector<T> out(index->size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[static_cast<size_t>((*index)[i])];
    if (shape_numel(out_shape) != static_cast<int64_t>(out.size()))
        throw std::invalid_argument("gather_index: shape/index mismatch");
    return make_op_node<T>(name, std::move(out_shape), std::move(out), {a}, [a, index](TensorNode<T>& n) mutable {
        if (!a.requires_grad()) return;
        auto& ga = a.grad();
        for (size_t i = 0; i < index->size(); ++i) ga[static_cast<size_t>((*index)[i])] += n.grad[i];
    });
}

template <typename T>
Tensor<T> concat_channels(Tensor<T> a, Tensor<T> b) {
    if (a.ndim() != b.ndim() || a.ndim() < 2 || a.dim(0) != b.dim(0))
        throw std::invalid_argument("concat_channels: rank/batch mismatch");
    for (int i = 2; i < a.ndim(); ++i)
        if (a.dim(i) != b.dim(i)) throw std::invalid_argument("concat_channels: trailing dim mismatch");
    const int64_t n = a.dim(0);
    const int64_t ca = a.dim(1), cb = b.dim(1);
    const int64_t inner = a.numel() / (n * ca);
    Shape os = a.shape();
    os[1] = ca + cb;
    std::vector<T> out(static_cast<size_t>(shape_numel(os)));
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int64_t i = 0; i < n; ++i) {
        std::memcpy(out.data() + i * (ca + cb) * inner, av.data() + i * ca * inner, sizeof(T) * static_cast<size_t>(ca * inner));
        std::memcpy(out.data() + (i * (ca + cb) + ca) * inner, bv.data() + i * cb * inner, sizeof(T) * static_cast<size_t>(cb * inner));
    }
    return make_op_node<T>("concat_ch", std::move(os), std::move(out), {a, b},
                           [a, b, n, ca, cb, inner](TensorNode<T>& nd) mutable {
        if (a.requires_grad()) {
            auto& ga = a.grad();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < ca * inner; ++j)
                    ga[static_cast<size_t>(i * ca * inner + j)] += nd.grad[static_cast<size_t>(i * (ca + cb) * inner + j)];
        }
        if (b.requires_grad()) {
            auto& gb = b.grad();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < cb * inner; ++j)
                    gb[static_cast<size_t>(i * cb * inner + j)] += nd.grad[static_cast<size_t>((i * (ca + cb) + ca) * inner + j)];
        }
    });
}

// ---- rescaled layer normalization -------------------------------------

template <typename T>
struct RlnOut {
    Tensor<T> normalized; // same shape as input
    Tensor<T> mean;       // [N], the removed per-sample mean
    Tensor<T> stddev;     // [N], sqrt(var + eps)
};

// Per-sample normalization over all non-batch axes. The removed mean/std are
// returned so the enclosing block can re-apply them to its output through
// learned maps, which keeps brightness/contrast information available.
template <typename T>
RlnOut<T> rescaled_layer_norm(Tensor<T> x, Tensor<T> gamma, Tensor<T> beta,
                              T eps = T(1e-6)) {
    if (x.numel() / x.dim(0) < 2) throw std::invalid_argument("rescaled_layer_norm: fewer than 2 elements per sample");
    auto mu = mean_per_sample(x);
    auto xc = sub_per_sample(x, mu);
    auto var = mean_per_sample(mul(xc, xc));
    auto sd = sqrt_eps(var, eps);
    auto out = div_per_sample(xc, sd);
    if (gamma.defined()) out = mul_channel(out, gamma);
    if (beta.defined()) out = add_channel(out, beta);
    return {out, mu, sd};
}

// first `c` channels of x
template <typename T>
Tensor<T> slice_channels(Tensor<T> x, int64_t c0, int64_t c) {
    const int64_t n = x.dim(0), cx = x.dim(1), inner = x.numel() / (n * cx);
    if (c0 < 0 || c0 + c > cx) throw std::invalid_argument("slice_channels: out of range");
    Shape os = x.shape();
    os[1] = c;
    auto idx = std::make_shared<std::vector<int64_t>>();
    idx->reserve(static_cast<size_t>(n * c * inner));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t j = 0; j < inner; ++j) idx->push_back((i * cx + c0 + ch) * inner + j);
    return gather_index(x, std::move(os), std::move(idx), "slice_ch");
}

} // namespace ivct
