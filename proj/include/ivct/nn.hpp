#pragma once

// Small layer library on top of the tensor ops: convolutions, linear maps,
// rescaled layer norm with its re-application maps, spectral filters, and a
// named parameter registry for checkpoints/optimizers.

#include "ivct/ops.hpp"
#include "ivct/ops_attn.hpp"
#include "ivct/ops_conv.hpp"
#include "ivct/ops_fft.hpp"

namespace ivct::nn {

template <typename T>
struct ParamMap {
    std::vector<std::pair<std::string, Tensor<T>>> items;

    void add(const std::string& name, const Tensor<T>& t) {
        if (t.defined()) items.emplace_back(name, t);
    }
    int64_t count() const {
        int64_t n = 0;
        for (const auto& [k, t] : items) n += t.numel();
        return n;
    }
};

constexpr double kInitStd = 0.02;

template <typename T>
struct Conv2d {
    Tensor<T> weight; // [Cout, Cin/groups, k, k]
    Tensor<T> bias;   // [Cout]
    int64_t stride = 1, pad = 0, groups = 1;

    static Conv2d make(int64_t cin, int64_t cout, int64_t k, int64_t stride, int64_t pad, RngState& rng,
                       int64_t groups = 1) {
        Conv2d c;
        c.weight = Tensor<T>::trunc_normal({cout, cin / groups, k, k}, rng, T(kInitStd));
        c.bias = Tensor<T>::zeros({cout}, true);
        c.stride = stride;
        c.pad = pad;
        c.groups = groups;
        return c;
    }
    Tensor<T> operator()(Tensor<T> x) const { return conv2d(x, weight, bias, stride, pad, groups); }
    void params(const std::string& p, ParamMap<T>& m) const {
        m.add(p + ".weight", weight);
        m.add(p + ".bias", bias);
    }
};

template <typename T>
struct ConvT2d {
    Tensor<T> weight; // [Cin, Cout, k, k], k == stride
    Tensor<T> bias;
    int64_t stride = 2;

    static ConvT2d make(int64_t cin, int64_t cout, int64_t stride, RngState& rng) {
        ConvT2d c;
        c.weight = Tensor<T>::trunc_normal({cin, cout, stride, stride}, rng, T(kInitStd));
        c.bias = Tensor<T>::zeros({cout}, true);
        c.stride = stride;
        return c;
    }
    Tensor<T> operator()(Tensor<T> x) const { return conv_transpose2d(x, weight, bias, stride); }
    void params(const std::string& p, ParamMap<T>& m) const {
        m.add(p + ".weight", weight);
        m.add(p + ".bias", bias);
    }
};

template <typename T>
struct Linear {
    Tensor<T> weight; // [out, in]
    Tensor<T> bias;   // [out]

    static Linear make(int64_t in, int64_t out, RngState& rng, T bias_init = T(0)) {
        Linear l;
        l.weight = Tensor<T>::trunc_normal({out, in}, rng, T(kInitStd));
        l.bias = Tensor<T>::full({out}, bias_init, true);
        return l;
    }
    Tensor<T> operator()(Tensor<T> x) const { return linear(x, weight, bias); }
    void params(const std::string& p, ParamMap<T>& m) const {
        m.add(p + ".weight", weight);
        m.add(p + ".bias", bias);
    }
};

// Rescaled layer norm: normalizes per sample and exposes the removed
// statistics as learned per-channel rescale/rebias vectors for the caller to
// re-apply to the block output.
template <typename T>
struct Rln {
    Tensor<T> gamma, beta; // [C]
    Linear<T> meta_scale;  // 1 -> C from the removed std
    Linear<T> meta_shift;  // 1 -> C from the removed mean

    static Rln make(int64_t c, RngState& rng) {
        Rln r;
        r.gamma = Tensor<T>::full({c}, T(1), true);
        r.beta = Tensor<T>::zeros({c}, true);
        r.meta_scale = Linear<T>::make(1, c, rng, T(1)); // neutral scaling at init
        r.meta_shift = Linear<T>::make(1, c, rng, T(0));
        return r;
    }

    struct Out {
        Tensor<T> y;       // normalized input
        Tensor<T> rescale; // [N, C]
        Tensor<T> rebias;  // [N, C]
    };

    Out operator()(Tensor<T> x) const {
        auto r = rescaled_layer_norm(x, gamma, beta);
        const int64_t n = x.dim(0);
        Out o;
        o.y = r.normalized;
        o.rescale = meta_scale(reshape(r.stddev, {n, 1}));
        o.rebias = meta_shift(reshape(r.mean, {n, 1}));
        return o;
    }

    // block-output re-application of the removed statistics
    Tensor<T> reapply(Tensor<T> y, const Out& o) const {
        return add_channel(mul_channel(y, o.rescale), o.rebias);
    }

    void params(const std::string& p, ParamMap<T>& m) const {
        m.add(p + ".gamma", gamma);
        m.add(p + ".beta", beta);
        meta_scale.params(p + ".meta_scale", m);
        meta_shift.params(p + ".meta_shift", m);
    }
};

// Per-channel learnable complex weights over the half spectrum: a learnable
// global circular convolution per channel. Identity at init.
template <typename T>
struct SpectralFilter {
    Tensor<T> weight; // [C, H, W/2+1, 2]
    int64_t width = 0;

    static SpectralFilter make(int64_t c, int64_t h, int64_t w, RngState&) {
        SpectralFilter f;
        f.width = w;
        std::vector<T> init(static_cast<size_t>(c * h * (w / 2 + 1) * 2), T(0));
        for (size_t i = 0; i < init.size(); i += 2) init[i] = T(1);
        f.weight = Tensor<T>::from_data({c, h, w / 2 + 1, 2}, std::move(init), true);
        return f;
    }
    Tensor<T> operator()(Tensor<T> x) const {
        return irfft2(complex_mul_bcast(rfft2(x), weight), width);
    }
    void params(const std::string& p, ParamMap<T>& m) const { m.add(p + ".weight", weight); }
};

} // namespace ivct::nn
