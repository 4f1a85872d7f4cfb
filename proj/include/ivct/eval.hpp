#pragma once

// Batch evaluation: synthesize incomplete-view examples per setting, run the
// reconstruction methods, aggregate PSNR/SSIM into the table-shaped report
// plus a per-image CSV.

#include <cstdio>

#include "ivct/dual.hpp"
#include "ivct/metrics.hpp"
#include "ivct/plot.hpp"

namespace ivct::eval {

struct EvalRow {
    std::string scenario; // "svct" / "lact" / "hybridN"
    double setting = 0;
    std::string method; // "fbp" / "proct" / "proct_dual"
    double psnr_sum = 0, ssim_sum = 0;
    int64_t count = 0;

    double psnr_mean() const { return count ? psnr_sum / static_cast<double>(count) : 0.0; }
    double ssim_mean() const { return count ? ssim_sum / static_cast<double>(count) : 0.0; }
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::map<std::string, std::string> metadata;

    EvalRow& row(const std::string& scenario, double setting, const std::string& method) {
        for (auto& r : rows)
            if (r.scenario == scenario && r.setting == setting && r.method == method) return r;
        rows.push_back(EvalRow{scenario, setting, method});
        return rows.back();
    }

    std::string to_csv() const {
        std::string out;
        for (const auto& [k, v] : metadata) out += "# " + k + " = " + v + "\n";
        out += "scenario,setting,method,psnr_mean,ssim_mean,count\n";
        char buf[256];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%s,%g,%s,%.6f,%.6f,%lld\n", r.scenario.c_str(), r.setting,
                          r.method.c_str(), r.psnr_mean(), r.ssim_mean(), static_cast<long long>(r.count));
            out += buf;
        }
        return out;
    }

    static EvalReport from_csv(const std::string& text) {
        EvalReport rep;
        std::stringstream ss(text);
        std::string line;
        bool header_seen = false;
        while (std::getline(ss, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                const auto eq = line.find('=');
                if (eq != std::string::npos) {
                    auto trim = [](std::string s) {
                        const auto a = s.find_first_not_of(" \t#");
                        const auto b = s.find_last_not_of(" \t\r");
                        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
                    };
                    rep.metadata[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
                }
                continue;
            }
            if (!header_seen) {
                header_seen = true;
                continue;
            }
            std::stringstream ls(line);
            std::string scenario, setting, method, psnr_s, ssim_s, count_s;
            std::getline(ls, scenario, ',');
            std::getline(ls, setting, ',');
            std::getline(ls, method, ',');
            std::getline(ls, psnr_s, ',');
            std::getline(ls, ssim_s, ',');
            std::getline(ls, count_s, ',');
            EvalRow r;
            r.scenario = scenario;
            r.setting = std::stod(setting);
            r.method = method;
            r.count = std::stoll(count_s);
            r.psnr_sum = std::stod(psnr_s) * static_cast<double>(r.count);
            r.ssim_sum = std::stod(ssim_s) * static_cast<double>(r.count);
            rep.rows.push_back(std::move(r));
        }
        return rep;
    }
};

struct EvalOptions {
    uint64_t seed = 0;
    bool fbp_baseline = true;
    std::string panel_dir; // when set, writes input|output|target panels
};

inline std::string scenario_name(const SettingSpec& t) {
    if (t.scenario == 1) return "svct";
    if (t.scenario == 2) return "lact";
    return "hybrid" + std::to_string(t.scenario);
}

// evaluates the transformer (and optionally its dual-domain extension) plus
// the FBP baseline over every (setting, image) pair
inline EvalReport evaluate(const nn::ProctModel<float>* model, const train::DualModel<float>* dual,
                           const std::vector<Image<float>>& images, const std::vector<SettingSpec>& settings,
                           const ScanGeometry& geom, const NoiseModel& noise, const Image<float>& ctx_phantom,
                           const EvalOptions& opt, std::string* per_image_csv = nullptr) {
    if (images.empty()) throw std::invalid_argument("evaluate: empty dataset");
    if (settings.empty()) throw std::invalid_argument("evaluate: empty settings list");
    for (const auto& im : images)
        if (im.data.dim(0) != geom.image_size || im.data.dim(1) != geom.image_size)
            throw std::invalid_argument("evaluate: image does not match geometry grid");

    EvalReport rep;
    rep.metadata["seed"] = std::to_string(opt.seed);
    rep.metadata["images"] = std::to_string(images.size());
    rep.metadata["geometry"] = std::to_string(geom.n_full_views) + "x" + std::to_string(geom.n_detectors) + "@" +
                               std::to_string(geom.image_size);
    std::string per_image = "scenario,setting,method,image,psnr,ssim\n";
    char buf[256];
    const int64_t n = geom.image_size;

    for (size_t si = 0; si < settings.size(); ++si) {
        const auto& t = settings[si];
        const std::string scen = scenario_name(t);
        for (size_t ii = 0; ii < images.size(); ++ii) {
            RngState rng(opt.seed ^ 0xABCDEF1234ULL, si * 1000003ULL + ii * 29ULL);
            auto ex = train::make_example(images[ii], t, geom, noise, ctx_phantom, rng);
            const auto& y = ex.y.values();

            auto add_metric = [&](const std::string& method, const std::vector<float>& pred) {
                const double p = psnr(pred, y);
                const double s = ssim(pred, y, n, n);
                auto& r = rep.row(scen, t.value, method);
                r.psnr_sum += p;
                r.ssim_sum += s;
                r.count += 1;
                std::snprintf(buf, sizeof(buf), "%s,%g,%s,%zu,%.6f,%.6f\n", scen.c_str(), t.value, method.c_str(),
                              ii, p, s);
                per_image += buf;
                return p;
            };

            if (opt.fbp_baseline) add_metric("fbp", ex.x.values());
            std::vector<float> recon;
            if (model) {
                auto yhat = model->forward(ex.x, ex.ctx, ex.v);
                recon = yhat.values();
                add_metric("proct", recon);
            }
            if (dual) {
                // rebuild the measured sinogram for the sinogram branch
                auto s_clean = forward_project(images[ii], geom, all_views(geom));
                RngState rng2(opt.seed ^ 0xABCDEF1234ULL, si * 1000003ULL + ii * 29ULL);
                auto s_noisy = add_noise(s_clean, noise, rng2);
                auto zf = zero_fill(reduce_sinogram(s_noisy, ex.v), ex.v);
                auto zft = reshape(zf.data, {1, 1, geom.n_full_views, geom.n_detectors});
                auto out = dual->dual_forward(ex.x, zft, ex.v, ex.ctx);
                add_metric("proct_dual", out.y_fused.values());
            }
            if (!opt.panel_dir.empty() && ii == 0 && model) {
                const auto cap = [](const char* name, double p) {
                    char c[64];
                    std::snprintf(c, sizeof(c), "%s PSNR=%.2f dB", name, p);
                    return std::string(c);
                };
                render_panel(opt.panel_dir + "/panel_" + scen + "_" + std::to_string(static_cast<int64_t>(t.value)) +
                                 ".png",
                             {ex.x.values().data(), recon.data(), y.data()},
                             {cap("input", psnr(ex.x.values(), y)), cap("output", psnr(recon, y)), "target"}, n, n);
            }
        }
    }
    if (per_image_csv) *per_image_csv = per_image;
    return rep;
}

} // namespace ivct::eval
