#pragma once

// Multi-setting training: loss terms (L1 + alpha * (1 - MS-SSIM)), the loss
// scaling schedule, curriculum setting sampler, Adam, example synthesis and
// checkpoint plumbing.

#include <functional>

#include "ivct/io.hpp"
#include "ivct/model.hpp"
#include "ivct/physics.hpp"
#include "ivct/sampling.hpp"

namespace ivct::train {

using nn::ModelConfig;
using nn::ParamMap;
using nn::ProctModel;

// ---- losses -----------------------------------------------------------

template <typename T>
Tensor<T> l1_loss(Tensor<T> a, Tensor<T> b) {
    return mean_all(abs_t(sub(a, b)));
}

inline const std::vector<double>& msssim_weights() {
    static const std::vector<double> w{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    return w;
}

template <typename T>
Tensor<T> gaussian11_kernel() {
    std::vector<T> k(11 * 11);
    std::vector<double> g(11);
    double sum = 0;
    for (int i = 0; i < 11; ++i) {
        const double d = static_cast<double>(i) - 5.0;
        g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += g[static_cast<size_t>(i)];
    }
    for (auto& v : g) v /= sum;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) k[static_cast<size_t>(i * 11 + j)] = static_cast<T>(g[static_cast<size_t>(i)] * g[static_cast<size_t>(j)]);
    return Tensor<T>::from_data({1, 1, 11, 11}, std::move(k));
}

// Differentiable multi-scale SSIM on [N,1,H,W]; the scale count shrinks to
// what the image supports (weights renormalized), capped at 5.
template <typename T>
Tensor<T> ms_ssim(Tensor<T> a, Tensor<T> b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("ms_ssim: shape mismatch");
    if (a.ndim() != 4) throw std::invalid_argument("ms_ssim: expected [N,1,H,W]");
    int64_t h = a.dim(2), w = a.dim(3);
    int scales = 0;
    while (scales < 5 && std::min(h >> scales, w >> scales) >= 11) ++scales;
    if (scales == 0) throw std::invalid_argument("ms_ssim: image too small for the 11x11 window");

    const auto& wts = msssim_weights();
    double wsum = 0;
    for (int i = 0; i < scales; ++i) wsum += wts[static_cast<size_t>(i)];

    static thread_local Tensor<T> kern;
    if (!kern.defined()) kern = gaussian11_kernel<T>();
    const T c1 = T(0.01 * 0.01), c2 = T(0.03 * 0.03);
    auto blur = [&](Tensor<T> x) { return conv2d(x, kern, Tensor<T>(), 1, 0, 1); };

    Tensor<T> result;
    for (int s = 0; s < scales; ++s) {
        auto mu1 = blur(a);
        auto mu2 = blur(b);
        auto m11 = blur(mul(a, a));
        auto m22 = blur(mul(b, b));
        auto m12 = blur(mul(a, b));
        auto mu1mu2 = mul(mu1, mu2);
        auto s1 = sub(m11, mul(mu1, mu1));
        auto s2 = sub(m22, mul(mu2, mu2));
        auto s12 = sub(m12, mu1mu2);
        auto cs_map = div_elem(add_scalar(scale(s12, T(2)), c2), add_scalar(add(s1, s2), c2));
        const double wi = wts[static_cast<size_t>(s)] / wsum;
        Tensor<T> term;
        if (s + 1 < scales) {
            term = pow_floor(mean_all(relu(cs_map)), T(wi), T(1e-8));
            a = avg_pool2x2(a);
            b = avg_pool2x2(b);
        } else {
            auto lum = div_elem(add_scalar(scale(mu1mu2, T(2)), c1),
                                add_scalar(add(mul(mu1, mu1), mul(mu2, mu2)), c1));
            term = pow_floor(mean_all(relu(mul(lum, cs_map))), T(wi), T(1e-8));
        }
        result = result.defined() ? mul(result, term) : term;
    }
    return result;
}

struct LossConfig {
    double alpha = 0.1;
    bool use_scale = true;
};

// L = L_l1 + alpha * (1 - MS-SSIM)
template <typename T>
Tensor<T> loss(Tensor<T> yhat, Tensor<T> y, const LossConfig& cfg) {
    auto l = l1_loss(yhat, y);
    if (cfg.alpha != 0.0)
        l = add(l, scale(add_scalar(neg(ms_ssim(yhat, y)), T(1)), T(cfg.alpha)));
    return l;
}

// ---- loss scaling schedule -------------------------------------------

// easier settings get larger scales; range [0.5, 1]
inline double loss_scale(const SettingSpec& t) {
    double s;
    if (t.scenario == 1) {
        if (t.value < 1) throw std::invalid_argument("loss_scale: bad SVCT setting");
        s = 0.5 + 0.5 * std::log2(t.value / 9.0) / std::log2(288.0 / 9.0);
    } else if (t.scenario == 2) {
        if (t.value <= 0 || t.value > 360) throw std::invalid_argument("loss_scale: bad LACT setting");
        s = 0.5 + 0.5 * (t.value - 60.0) / 120.0;
    } else {
        s = 1.0 - 0.5 * std::clamp(t.difficulty(), 0.0, 1.0);
    }
    return std::clamp(s, 0.5, 1.0);
}

// ---- curriculum --------------------------------------------------------

struct TrainPlan {
    int64_t epochs = 70;
    int64_t phase1_epochs = 40; // finite settings first, full ranges after
    int64_t steps_per_epoch = 100;
    int64_t batch_size = 2;
    double lr = 1e-4;
    int64_t lr_halve_epochs = 20;
    double beta1 = 0.5, beta2 = 0.999;
    double clip_norm = 1.0;
    uint64_t seed = 0;
    std::vector<int64_t> svct_set{18, 36, 72, 144};
    std::vector<double> lact_set{90, 120, 150};
    int64_t svct_range[2] = {9, 288};
    double lact_range[2] = {60, 180};
    bool cache_examples = true;

    double lr_at_epoch(int64_t epoch) const { // 1-based
        double l = lr;
        for (int64_t e = lr_halve_epochs; e < epoch; e += lr_halve_epochs) l *= 0.5;
        return l;
    }
};

inline SettingSpec sample_setting(const TrainPlan& plan, int64_t epoch, RngState& rng) {
    SettingSpec t;
    t.scenario = rng.uniform() < 0.5 ? 1 : 2;
    const bool phase1 = epoch <= plan.phase1_epochs;
    if (phase1 && plan.svct_set.empty()) t.scenario = 2;
    if (phase1 && plan.lact_set.empty()) t.scenario = 1;
    if (t.scenario == 1) {
        if (phase1) {
            t.value = static_cast<double>(plan.svct_set[static_cast<size_t>(rng.below(plan.svct_set.size()))]);
        } else {
            t.value = static_cast<double>(plan.svct_range[0] +
                                          static_cast<int64_t>(rng.below(static_cast<uint64_t>(plan.svct_range[1] - plan.svct_range[0] + 1))));
        }
    } else {
        if (phase1) {
            t.value = plan.lact_set[static_cast<size_t>(rng.below(plan.lact_set.size()))];
        } else {
            const int64_t lo = static_cast<int64_t>(plan.lact_range[0]);
            const int64_t hi = static_cast<int64_t>(plan.lact_range[1]);
            t.value = static_cast<double>(lo + static_cast<int64_t>(rng.below(static_cast<uint64_t>(hi - lo + 1))));
        }
    }
    return t;
}

// ---- example synthesis --------------------------------------------------

template <typename T>
struct TrainExample {
    Tensor<T> x;        // [1,1,H,W] incomplete-view FBP
    Tensor<T> y;        // [1,1,H,W] full-view FBP of the same noisy sinogram
    Tensor<T> ctx;      // [1,2,H,W] in-context pair (incomplete; full)
    SamplingVector v;
};

// S = noisy projection; Y = fbp(S); X = fbp(reduce(S, v)); the context pair
// runs the same protocol on the phantom. Ground truth comes from the noisy
// sinogram as well.
template <typename T>
TrainExample<T> make_example(const Image<T>& full_image, const SettingSpec& t, const ScanGeometry& geom,
                             const NoiseModel& noise, const Image<T>& phantom, RngState& rng) {
    if (full_image.data.dim(0) != geom.image_size || phantom.data.dim(0) != geom.image_size)
        throw std::invalid_argument("make_example: image does not match geometry grid");
    const auto v = setting_vector(t, geom);

    const auto views = all_views(geom);
    auto s_clean = forward_project(full_image, geom, views);
    auto s = add_noise(s_clean, noise, rng);
    auto y = fbp(s, geom);
    auto x = fbp(reduce_sinogram(s, v), geom);

    auto ps_clean = forward_project(phantom, geom, views);
    auto ps = add_noise(ps_clean, noise, rng);
    auto ctx_full = fbp(ps, geom);
    auto ctx_in = fbp(reduce_sinogram(ps, v), geom);

    const int64_t n = geom.image_size;
    TrainExample<T> ex;
    ex.x = reshape(x.data, {1, 1, n, n});
    ex.y = reshape(y.data, {1, 1, n, n});
    ex.ctx = concat_channels(reshape(ctx_in.data, {1, 1, n, n}), reshape(ctx_full.data, {1, 1, n, n}));
    ex.v = v;
    return ex;
}

// ---- optimizer ----------------------------------------------------------

template <typename T>
struct Adam {
    double beta1 = 0.5, beta2 = 0.999, eps = 1e-8;
    double clip_norm = 1.0; // 0 disables clipping
    int64_t step_count = 0;
    std::vector<std::vector<T>> m, v;

    void init(const std::vector<Tensor<T>>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.numel(), T(0));
            v.emplace_back(p.numel(), T(0));
        }
        step_count = 0;
    }

    void step(std::vector<Tensor<T>>& params, double lr) {
        if (m.size() != params.size()) throw std::runtime_error("adam: not initialized for this parameter list");
        ++step_count;
        double norm2 = 0;
        for (auto& p : params)
            for (const T g : p.grad()) norm2 += static_cast<double>(g) * static_cast<double>(g);
        const double norm = std::sqrt(norm2);
        const double scale_g = (clip_norm > 0 && norm > clip_norm) ? clip_norm / norm : 1.0;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (size_t i = 0; i < params.size(); ++i) {
            auto& val = params[i].values();
            auto& grad = params[i].grad();
            auto& mi = m[i];
            auto& vi = v[i];
            for (size_t j = 0; j < val.size(); ++j) {
                const double g = static_cast<double>(grad[j]) * scale_g;
                mi[j] = static_cast<T>(beta1 * mi[j] + (1.0 - beta1) * g);
                vi[j] = static_cast<T>(beta2 * vi[j] + (1.0 - beta2) * g * g);
                const double mhat = mi[j] / bc1;
                const double vhat = vi[j] / bc2;
                val[j] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }
};

// ---- checkpoints ---------------------------------------------------------

template <typename T>
Checkpoint make_checkpoint(const ProctModel<T>& model, const Adam<T>* opt,
                           std::map<std::string, std::string> extra = {}) {
    Checkpoint ck;
    ck.config = model.cfg.to_map();
    for (auto& [k, val] : extra) ck.config[k] = val;
    ParamMap<T> pm;
    model.params(pm);
    for (auto& [name, t] : pm.items) {
        NamedParam p;
        p.name = name;
        p.shape = t.shape();
        p.data.assign(t.values().begin(), t.values().end());
        ck.params.push_back(std::move(p));
    }
    if (opt && !opt->m.empty()) {
        ck.config["adam.step"] = std::to_string(opt->step_count);
        for (size_t i = 0; i < pm.items.size(); ++i) {
            NamedParam pm_m, pm_v;
            pm_m.name = "adam.m." + pm.items[i].first;
            pm_m.shape = pm.items[i].second.shape();
            pm_m.data.assign(opt->m[i].begin(), opt->m[i].end());
            pm_v.name = "adam.v." + pm.items[i].first;
            pm_v.shape = pm.items[i].second.shape();
            pm_v.data.assign(opt->v[i].begin(), opt->v[i].end());
            ck.params.push_back(std::move(pm_m));
            ck.params.push_back(std::move(pm_v));
        }
    }
    return ck;
}

template <typename T>
void load_model_params(ProctModel<T>& model, const Checkpoint& ck, Adam<T>* opt = nullptr) {
    ParamMap<T> pm;
    model.params(pm);
    std::map<std::string, const NamedParam*> by_name;
    for (const auto& p : ck.params) by_name[p.name] = &p;
    for (auto& [name, t] : pm.items) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint missing parameter: " + name);
        if (it->second->shape != t.shape()) throw std::runtime_error("checkpoint shape mismatch for " + name);
        auto& dst = t.values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second->data[i]);
    }
    if (opt) {
        opt->init([&] {
            std::vector<Tensor<T>> ps;
            for (auto& [n, t] : pm.items) ps.push_back(t);
            return ps;
        }());
        if (ck.config.count("adam.step")) {
            opt->step_count = std::stoll(ck.config.at("adam.step"));
            for (size_t i = 0; i < pm.items.size(); ++i) {
                auto itm = by_name.find("adam.m." + pm.items[i].first);
                auto itv = by_name.find("adam.v." + pm.items[i].first);
                if (itm == by_name.end() || itv == by_name.end())
                    throw std::runtime_error("checkpoint missing optimizer moments");
                for (size_t j = 0; j < opt->m[i].size(); ++j) {
                    opt->m[i][j] = static_cast<T>(itm->second->data[j]);
                    opt->v[i][j] = static_cast<T>(itv->second->data[j]);
                }
            }
        }
    }
}

// geometry <-> config text
inline std::map<std::string, std::string> geometry_to_map(const ScanGeometry& g) {
    std::ostringstream pitch, spacing, span, atten;
    pitch.precision(17);
    pitch << g.detector_pitch;
    spacing.precision(17);
    spacing << g.pixel_spacing;
    span.precision(17);
    span << g.angular_span_deg;
    atten.precision(17);
    atten << g.attenuation_scale;
    return {{"geom.n_full_views", std::to_string(g.n_full_views)},
            {"geom.n_detectors", std::to_string(g.n_detectors)},
            {"geom.dist_source_center", std::to_string(g.dist_source_center)},
            {"geom.dist_detector_center", std::to_string(g.dist_detector_center)},
            {"geom.detector_pitch", pitch.str()},
            {"geom.image_size", std::to_string(g.image_size)},
            {"geom.pixel_spacing", spacing.str()},
            {"geom.angular_span_deg", span.str()},
            {"geom.attenuation_scale", atten.str()}};
}

inline ScanGeometry geometry_from_map(const std::map<std::string, std::string>& m) {
    ScanGeometry g;
    g.n_full_views = std::stoll(m.at("geom.n_full_views"));
    g.n_detectors = std::stoll(m.at("geom.n_detectors"));
    g.dist_source_center = std::stod(m.at("geom.dist_source_center"));
    g.dist_detector_center = std::stod(m.at("geom.dist_detector_center"));
    g.detector_pitch = std::stod(m.at("geom.detector_pitch"));
    g.image_size = std::stoll(m.at("geom.image_size"));
    g.pixel_spacing = std::stod(m.at("geom.pixel_spacing"));
    g.angular_span_deg = std::stod(m.at("geom.angular_span_deg"));
    g.attenuation_scale = std::stod(m.at("geom.attenuation_scale"));
    return make_geometry(g);
}

} // namespace ivct::train
