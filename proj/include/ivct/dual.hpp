#pragma once

// Parallel dual-domain extension: a U-shaped sinogram completion network fed
// with the zero-filled sinogram and the sampling mask, a differentiable FBP
// bridge into the image domain, and a lightweight fusion U-Net combining
// (X, Yhat, Yprime) while the image-domain transformer stays frozen.

#include "ivct/trainer.hpp"

namespace ivct::train {

// conv(3x3)+relu twice per level, stride-2 conv down, transposed conv up,
// skip concatenation; input padded to a multiple of the level stride
template <typename T>
struct UNet {
    std::vector<int64_t> dims;
    int64_t in_channels = 1, out_channels = 1;
    std::vector<nn::Conv2d<T>> enc_a, enc_b, dec_a, dec_b, downs;
    std::vector<nn::ConvT2d<T>> ups;
    nn::Conv2d<T> head;

    static UNet make(int64_t in_ch, int64_t out_ch, std::vector<int64_t> dims, RngState& rng,
                     bool zero_init_head = false) {
        UNet u;
        u.dims = std::move(dims);
        u.in_channels = in_ch;
        u.out_channels = out_ch;
        const size_t L = u.dims.size();
        for (size_t i = 0; i < L; ++i) {
            u.enc_a.push_back(nn::Conv2d<T>::make(i == 0 ? in_ch : u.dims[i], u.dims[i], 3, 1, 1, rng));
            u.enc_b.push_back(nn::Conv2d<T>::make(u.dims[i], u.dims[i], 3, 1, 1, rng));
            if (i + 1 < L) u.downs.push_back(nn::Conv2d<T>::make(u.dims[i], u.dims[i + 1], 3, 2, 1, rng));
        }
        for (size_t i = L - 1; i-- > 0;) {
            u.ups.push_back(nn::ConvT2d<T>::make(u.dims[i + 1], u.dims[i], 2, rng));
            u.dec_a.push_back(nn::Conv2d<T>::make(2 * u.dims[i], u.dims[i], 3, 1, 1, rng));
            u.dec_b.push_back(nn::Conv2d<T>::make(u.dims[i], u.dims[i], 3, 1, 1, rng));
        }
        u.head = nn::Conv2d<T>::make(u.dims[0], out_ch, 1, 1, 0, rng);
        if (zero_init_head) {
            std::fill(u.head.weight.values().begin(), u.head.weight.values().end(), T(0));
            std::fill(u.head.bias.values().begin(), u.head.bias.values().end(), T(0));
        }
        return u;
    }

    Tensor<T> operator()(Tensor<T> x) const {
        const int64_t h = x.dim(2), w = x.dim(3);
        const int64_t stride = int64_t(1) << (dims.size() - 1);
        const int64_t hp = ceil_to(h, stride), wp = ceil_to(w, stride);
        if (hp != h || wp != w) x = pad2d(x, 0, hp - h, 0, wp - w, PadMode::reflect);

        std::vector<Tensor<T>> skips;
        for (size_t i = 0; i < dims.size(); ++i) {
            x = relu(enc_b[i](relu(enc_a[i](x))));
            if (i + 1 < dims.size()) {
                skips.push_back(x);
                x = downs[i](x);
            }
        }
        for (size_t d = 0; d < ups.size(); ++d) {
            x = ups[d](x);
            x = concat_channels(x, skips[skips.size() - 1 - d]);
            x = relu(dec_b[d](relu(dec_a[d](x))));
        }
        x = head(x);
        if (hp != h || wp != w) {
            auto idx = std::make_shared<std::vector<int64_t>>();
            const int64_t n = x.dim(0), c = x.dim(1);
            idx->reserve(static_cast<size_t>(n * c * h * w));
            for (int64_t nc = 0; nc < n * c; ++nc)
                for (int64_t i = 0; i < h; ++i)
                    for (int64_t j = 0; j < w; ++j) idx->push_back((nc * hp + i) * wp + j);
            x = gather_index(x, Shape{n, c, h, w}, std::move(idx), "crop");
        }
        return x;
    }

    void params(const std::string& p, nn::ParamMap<T>& m) const {
        for (size_t i = 0; i < enc_a.size(); ++i) {
            enc_a[i].params(p + ".enc" + std::to_string(i) + "a", m);
            enc_b[i].params(p + ".enc" + std::to_string(i) + "b", m);
        }
        for (size_t i = 0; i < downs.size(); ++i) downs[i].params(p + ".down" + std::to_string(i), m);
        for (size_t i = 0; i < ups.size(); ++i) {
            ups[i].params(p + ".up" + std::to_string(i), m);
            dec_a[i].params(p + ".dec" + std::to_string(i) + "a", m);
            dec_b[i].params(p + ".dec" + std::to_string(i) + "b", m);
        }
        head.params(p + ".head", m);
    }
};

// FBP of a full-view sinogram batch [N,1,V,D] -> [N,1,S,S]; linear, with the
// exact transpose as its backward.
template <typename T>
Tensor<T> fbp_op(Tensor<T> sino, const ScanGeometry& geom) {
    if (sino.ndim() != 4 || sino.dim(1) != 1 || sino.dim(2) != geom.n_full_views || sino.dim(3) != geom.n_detectors)
        throw std::invalid_argument("fbp_op: expected [N,1,n_full_views,n_detectors]");
    const int64_t n = sino.dim(0), s = geom.image_size;
    const auto views = all_views(geom);
    std::vector<T> out(static_cast<size_t>(n * s * s));
    for (int64_t b = 0; b < n; ++b)
        fbp_apply_raw(geom, views, sino.data() + b * geom.n_full_views * geom.n_detectors, out.data() + b * s * s);
    return make_op_node<T>("fbp", Shape{n, 1, s, s}, std::move(out), {sino}, [sino, geom, views, n, s](TensorNode<T>& nd) mutable {
        if (!sino.requires_grad()) return;
        auto& g = sino.grad();
        std::vector<T> gs(static_cast<size_t>(geom.n_full_views * geom.n_detectors));
        for (int64_t b = 0; b < n; ++b) {
            fbp_adjoint_raw(geom, views, nd.grad.data() + b * s * s, gs.data());
            T* dst = g.data() + b * geom.n_full_views * geom.n_detectors;
            for (size_t i = 0; i < gs.size(); ++i) dst[i] += gs[i];
        }
    });
}

struct DualConfig {
    std::vector<int64_t> sino_dims{64, 128, 256, 512, 512}; // V_phi
    std::vector<int64_t> fusion_dims{16, 32, 64, 128, 128}; // W_psi
    bool data_consistency = false;

    static DualConfig desk() {
        DualConfig c;
        c.sino_dims = {8, 16, 32, 64, 64};
        c.fusion_dims = {4, 8, 16, 32, 32};
        return c;
    }
};

template <typename T>
struct DualOutputs {
    Tensor<T> y_image;  // frozen transformer output
    Tensor<T> y_sino;   // fbp of the completed sinogram
    Tensor<T> y_fused;  // fusion output
    Tensor<T> s_hat;    // completed full-view sinogram
};

template <typename T>
struct DualModel {
    ScanGeometry geom;
    DualConfig cfg;
    ProctModel<T> frozen;   // image-domain sub-network, never updated
    UNet<T> sino_net;       // [zero-filled sinogram; mask] -> full sinogram
    UNet<T> fusion;         // [X; Yhat; Yprime] -> residual on Yhat
    T sino_mean = T(0), sino_std = T(1);
    std::string frozen_checksum; // checksum of the checkpoint the frozen net came from

    static DualModel make(const ScanGeometry& geom, const DualConfig& cfg, ProctModel<T> frozen_model,
                          RngState& rng) {
        DualModel d{geom, cfg, std::move(frozen_model),
                    UNet<T>::make(2, 1, cfg.sino_dims, rng),
                    UNet<T>::make(3, 1, cfg.fusion_dims, rng, /*zero_init_head=*/true)};
        nn::ParamMap<T> pm;
        d.frozen.params(pm);
        for (auto& [k, t] : pm.items) t.set_requires_grad(false);
        return d;
    }

    void set_sino_stats(T mean, T stddev) {
        sino_mean = mean;
        sino_std = stddev > T(0) ? stddev : T(1);
    }

    // zero-fill to full size, stack the mask channel, run the completion net
    Tensor<T> sino_complete(const Sinogram<T>& s_in, const SamplingVector& v) const {
        if (s_in.data.dim(0) != v.popcount())
            throw std::invalid_argument("sino_complete: sinogram rows != popcount(v)");
        auto zf = zero_fill(s_in, v);
        const int64_t vv = geom.n_full_views, dd = geom.n_detectors;
        auto x = reshape(Tensor<T>::from_data(zf.data.shape(), zf.data.values()), {1, 1, vv, dd});
        return sino_complete_batch(x, v);
    }

    Tensor<T> sino_complete_batch(Tensor<T> zero_filled, const SamplingVector& v) const {
        const int64_t n = zero_filled.dim(0), vv = geom.n_full_views, dd = geom.n_detectors;
        auto mask1 = mask_matrix<T>(v, dd);
        std::vector<T> mdata;
        mdata.reserve(static_cast<size_t>(n * vv * dd));
        for (int64_t b = 0; b < n; ++b) mdata.insert(mdata.end(), mask1.values().begin(), mask1.values().end());
        auto mask = Tensor<T>::from_data({n, 1, vv, dd}, std::move(mdata));

        auto norm = scale(add_scalar(zero_filled, -sino_mean), T(1) / sino_std);
        auto out = add(sino_net(concat_channels(norm, mask)), norm); // residual on the zero-filled rows
        auto s_hat = add_scalar(scale(out, sino_std), sino_mean);
        if (cfg.data_consistency) {
            // measured rows are copied back verbatim
            auto keep = mul(s_hat, add_scalar(scale(mask, T(-1)), T(1)));
            s_hat = add(keep, mul(zero_filled, mask));
        }
        return s_hat;
    }

    DualOutputs<T> dual_forward(Tensor<T> x, Tensor<T> zero_filled_sino, const SamplingVector& v,
                                Tensor<T> ctx) const {
        DualOutputs<T> o;
        o.y_image = frozen.forward(x, ctx, v);
        o.s_hat = sino_complete_batch(zero_filled_sino, v);
        o.y_sino = fbp_op(o.s_hat, geom);
        auto fused_in = concat_channels(concat_channels(x, o.y_image), o.y_sino);
        o.y_fused = add(o.y_image, fusion(fused_in)); // fusion starts at the frozen output
        return o;
    }

    void trainable_params(std::vector<Tensor<T>>& out) const {
        nn::ParamMap<T> pm;
        sino_net.params("sino", pm);
        fusion.params("fusion", pm);
        for (auto& [k, t] : pm.items) out.push_back(t);
    }

    void params(nn::ParamMap<T>& pm) const {
        sino_net.params("sino", pm);
        fusion.params("fusion", pm);
    }
};

// L1(Yprime, Y) + L1(Yfused, Y) + L1(Shat, S); deliberately no MS-SSIM term
template <typename T>
Tensor<T> dual_loss(Tensor<T> y_sino, Tensor<T> y_fused, Tensor<T> s_hat, Tensor<T> y, Tensor<T> s_full) {
    return add(add(l1_loss(y_sino, y), l1_loss(y_fused, y)), l1_loss(s_hat, s_full));
}

// Dual checkpoints are self-contained: the frozen transformer is embedded
// under a "frozen." prefix and the source checkpoint is referenced by its
// checksum in the config section.
template <typename T>
Checkpoint make_dual_checkpoint(const DualModel<T>& d, std::map<std::string, std::string> extra = {}) {
    Checkpoint ck;
    ck.config = d.frozen.cfg.to_map();
    for (auto& [k, v] : geometry_to_map(d.geom)) ck.config[k] = v;
    ck.config["dual.sino_dims"] = nn::join_ints(d.cfg.sino_dims);
    ck.config["dual.fusion_dims"] = nn::join_ints(d.cfg.fusion_dims);
    ck.config["dual.data_consistency"] = d.cfg.data_consistency ? "1" : "0";
    std::ostringstream sm, ss;
    sm.precision(17);
    sm << d.sino_mean;
    ss.precision(17);
    ss << d.sino_std;
    ck.config["dual.sino_mean"] = sm.str();
    ck.config["dual.sino_std"] = ss.str();
    ck.config["dual.frozen_checksum"] = d.frozen_checksum;
    for (auto& [k, v] : extra) ck.config[k] = v;

    auto push = [&](const std::string& prefix, const nn::ParamMap<T>& pm) {
        for (const auto& [name, t] : pm.items) {
            NamedParam p;
            p.name = prefix + name;
            p.shape = t.shape();
            p.data.assign(t.values().begin(), t.values().end());
            ck.params.push_back(std::move(p));
        }
    };
    nn::ParamMap<T> frozen_pm, own_pm;
    d.frozen.params(frozen_pm);
    d.params(own_pm);
    push("frozen.", frozen_pm);
    push("", own_pm);
    return ck;
}

inline DualModel<float> load_dual_checkpoint(const Checkpoint& ck, const ScanGeometry& geom) {
    if (!ck.config.count("dual.sino_dims")) throw std::runtime_error("not a dual-domain checkpoint");
    auto mcfg = ModelConfig::from_map(ck.config);
    DualConfig dcfg;
    dcfg.sino_dims = nn::split_ints(ck.config.at("dual.sino_dims"));
    dcfg.fusion_dims = nn::split_ints(ck.config.at("dual.fusion_dims"));
    dcfg.data_consistency = ck.config.at("dual.data_consistency") == "1";
    RngState rng(0);
    auto frozen = ProctModel<float>::init_model(mcfg, rng);
    auto dual = DualModel<float>::make(geom, dcfg, std::move(frozen), rng);
    dual.set_sino_stats(std::stof(ck.config.at("dual.sino_mean")), std::stof(ck.config.at("dual.sino_std")));
    if (ck.config.count("dual.frozen_checksum")) dual.frozen_checksum = ck.config.at("dual.frozen_checksum");

    std::map<std::string, const NamedParam*> by_name;
    for (const auto& p : ck.params) by_name[p.name] = &p;
    auto copy_into = [&](const std::string& prefix, nn::ParamMap<float>& pm) {
        for (auto& [name, t] : pm.items) {
            auto it = by_name.find(prefix + name);
            if (it == by_name.end()) throw std::runtime_error("dual checkpoint missing parameter: " + prefix + name);
            if (it->second->shape != t.shape())
                throw std::runtime_error("dual checkpoint shape mismatch for " + prefix + name);
            auto& dst = t.values();
            for (size_t i = 0; i < dst.size(); ++i) dst[i] = it->second->data[i];
        }
    };
    nn::ParamMap<float> frozen_pm, own_pm;
    dual.frozen.params(frozen_pm);
    dual.params(own_pm);
    copy_into("frozen.", frozen_pm);
    copy_into("", own_pm);
    return dual;
}

} // namespace ivct::train
