// ivct: incomplete-view CT lab. Subcommands: simulate, train, reconstruct,
// eval, sweep. Exit codes: 0 ok, 2 bad flags/config, 3 I/O failure,
// 4 non-finite loss, 5 checkpoint/geometry mismatch.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "ivct/eval.hpp"
#include "ivct/io.hpp"
#include "ivct/plot.hpp"

namespace fs = std::filesystem;
using namespace ivct;

namespace {

struct CmdError {
    int code;
    std::string msg;
};

[[noreturn]] void fail(int code, const std::string& msg) { throw CmdError{code, msg}; }

double get_d(const std::map<std::string, std::string>& m, const std::string& k, double dflt) {
    auto it = m.find(k);
    return it == m.end() ? dflt : std::stod(it->second);
}
int64_t get_i(const std::map<std::string, std::string>& m, const std::string& k, int64_t dflt) {
    auto it = m.find(k);
    return it == m.end() ? dflt : std::stoll(it->second);
}
std::string get_s(const std::map<std::string, std::string>& m, const std::string& k, const std::string& dflt) {
    auto it = m.find(k);
    return it == m.end() ? dflt : it->second;
}

ScanGeometry geometry_from_config(const std::map<std::string, std::string>& m) {
    ScanGeometry g;
    g.n_full_views = get_i(m, "geom.n_full_views", g.n_full_views);
    g.n_detectors = get_i(m, "geom.n_detectors", g.n_detectors);
    g.dist_source_center = get_d(m, "geom.dist_source_center", g.dist_source_center);
    g.dist_detector_center = get_d(m, "geom.dist_detector_center", g.dist_detector_center);
    g.detector_pitch = get_d(m, "geom.detector_pitch", 0.0);
    g.image_size = get_i(m, "geom.image_size", g.image_size);
    g.pixel_spacing = get_d(m, "geom.pixel_spacing", g.pixel_spacing);
    g.angular_span_deg = get_d(m, "geom.angular_span_deg", g.angular_span_deg);
    g.attenuation_scale = get_d(m, "geom.attenuation_scale", g.attenuation_scale);
    return make_geometry(g);
}

ScanGeometry load_geometry(const std::string& path) {
    if (path.empty()) return make_geometry(ScanGeometry{});
    return geometry_from_config(load_config_file(path));
}

NoiseModel noise_from_config(const std::map<std::string, std::string>& m) {
    NoiseModel n;
    n.enabled = get_i(m, "noise.enabled", 1) != 0;
    n.photon_intensity = get_d(m, "noise.photon_intensity", n.photon_intensity);
    n.gaussian_std = get_d(m, "noise.gaussian_std", n.gaussian_std);
    return n;
}

Image<float> load_image_file(const std::string& path) {
    int64_t h = 0, w = 0;
    auto data = read_gray_image(path, h, w);
    Image<float> img;
    img.data = Tensor<float>::from_data({h, w}, std::move(data));
    return img;
}

std::vector<Image<float>> load_dataset(const std::string& dir, int64_t expected_size) {
    std::vector<std::string> files;
    if (!fs::is_directory(dir)) fail(3, "dataset directory not found: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (ext == ".png" || ext == ".pgm" || ext == ".ivct") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(3, "dataset directory has no images: " + dir);
    std::vector<Image<float>> out;
    for (const auto& f : files) {
        auto img = load_image_file(f);
        if (img.data.dim(0) != expected_size || img.data.dim(1) != expected_size)
            fail(5, "image size " + shape_str(img.data.shape()) + " does not match geometry " +
                        std::to_string(expected_size) + ": " + f);
        out.push_back(std::move(img));
    }
    return out;
}

SamplingVector make_scenario_vector(const std::string& scenario, const std::string& setting,
                                    const ScanGeometry& geom) {
    try {
        if (scenario == "svct") return svct_vector(std::stoll(setting), geom.n_full_views);
        if (scenario == "lact") return lact_vector(0.0, std::stod(setting), geom.n_full_views, geom.angular_span_deg);
        if (scenario == "hybrid1" || scenario == "hybrid2" || scenario == "hybrid3") {
            const auto comma = setting.find(',');
            if (comma == std::string::npos) fail(2, "hybrid setting must be '<lact_end_deg>,<n_view>'");
            const double r = std::stod(setting.substr(0, comma));
            const int64_t nv = std::stoll(setting.substr(comma + 1));
            const auto lact = lact_vector(0.0, r, geom.n_full_views, geom.angular_span_deg);
            const auto sv = svct_vector(nv, geom.n_full_views);
            if (scenario == "hybrid1") return hybrid_vector(lact, sv, HybridMode::set_union);
            if (scenario == "hybrid2") return hybrid_vector(lact, sv, HybridMode::set_intersect);
            return hybrid_vector(lact, lact, HybridMode::svct_within_lact, nv);
        }
    } catch (const std::invalid_argument& e) {
        fail(2, std::string("invalid scenario setting: ") + e.what());
    }
    fail(2, "unknown scenario: " + scenario);
}

std::vector<SettingSpec> parse_settings(const std::string& text) {
    // "svct:18,36,72;lact:90,120" or ranges "svct:18:144:4" (lo:hi:count)
    std::vector<SettingSpec> out;
    std::stringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        if (group.empty()) continue;
        const auto colon = group.find(':');
        if (colon == std::string::npos) fail(2, "settings group needs 'scenario:values': " + group);
        const std::string scen = group.substr(0, colon);
        const std::string rest = group.substr(colon + 1);
        int scenario = scen == "svct" ? 1 : scen == "lact" ? 2 : 0;
        if (!scenario) fail(2, "unknown scenario in settings: " + scen);
        // range form lo:hi:count
        if (std::count(rest.begin(), rest.end(), ':') == 2) {
            std::stringstream rs(rest);
            std::string lo_s, hi_s, n_s;
            std::getline(rs, lo_s, ':');
            std::getline(rs, hi_s, ':');
            std::getline(rs, n_s, ':');
            const double lo = std::stod(lo_s), hi = std::stod(hi_s);
            const int64_t n = std::stoll(n_s);
            if (n < 2 || hi <= lo) fail(2, "bad settings range: " + rest);
            for (int64_t i = 0; i < n; ++i)
                out.push_back({scenario, std::round(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1))});
        } else {
            std::stringstream vs(rest);
            std::string v;
            while (std::getline(vs, v, ',')) out.push_back({scenario, std::stod(v)});
        }
    }
    if (out.empty()) fail(2, "empty settings list");
    return out;
}

void write_image_outputs(const std::string& stem, const Image<float>& img, const ScanGeometry& geom,
                         const std::string& rle) {
    write_ivct_image(stem + ".ivct", img, geom, rle);
    write_png16(stem + ".png", img.data.data(), img.data.dim(0), img.data.dim(1));
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const std::string& geometry_file, const std::string& input, const std::string& phantom_kind,
                 const std::string& scenario, const std::string& setting, const std::string& noise_flag,
                 uint64_t seed, const std::string& out_dir) {
    auto geom = load_geometry(geometry_file);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) fail(3, "cannot create output directory: " + out_dir);

    RngState rng(seed);
    Image<float> img;
    if (!input.empty()) {
        img = load_image_file(input);
        if (img.data.dim(0) != geom.image_size || img.data.dim(1) != geom.image_size)
            fail(5, "input image does not match geometry grid");
    } else {
        const PhantomKind kind = phantom_kind == "shepp_logan" ? PhantomKind::shepp_logan
                                                               : PhantomKind::random_ellipses;
        if (phantom_kind != "shepp_logan" && phantom_kind != "random_ellipses")
            fail(2, "unknown phantom kind: " + phantom_kind);
        img = make_phantom<float>(kind, geom.image_size, geom.pixel_spacing, rng);
    }

    const auto v = make_scenario_vector(scenario, setting, geom);
    NoiseModel noise;
    noise.enabled = noise_flag == "on";
    if (noise_flag != "on" && noise_flag != "off") fail(2, "--noise must be on or off");

    auto s_full = forward_project(img, geom, all_views(geom));
    auto s_noisy = add_noise(s_full, noise, rng);
    auto s_in = reduce_sinogram(s_noisy, v);
    auto y = fbp(s_noisy, geom);
    auto x = fbp(s_in, geom);

    const std::string rle = to_rle(v);
    write_ivct_sinogram(out_dir + "/sinogram.ivct", s_in, geom, rle);
    write_image_outputs(out_dir + "/image_incomplete", x, geom, rle);
    write_image_outputs(out_dir + "/image_full", y, geom, rle);
    write_text_file(out_dir + "/sampling.txt", rle + "\n");
    std::printf("simulate: %s %s views=%lld/%lld -> %s\n", scenario.c_str(), setting.c_str(),
                static_cast<long long>(v.popcount()), static_cast<long long>(geom.n_full_views), out_dir.c_str());
    return 0;
}

// ------------------------------------------------------------------- train

train::TrainPlan plan_from_config(const std::map<std::string, std::string>& m) {
    train::TrainPlan p;
    p.epochs = get_i(m, "train.epochs", 4);
    p.phase1_epochs = get_i(m, "train.phase1_epochs", p.epochs);
    p.steps_per_epoch = get_i(m, "train.steps_per_epoch", 50);
    p.batch_size = get_i(m, "train.batch_size", 2);
    p.lr = get_d(m, "train.lr", 1e-4);
    p.lr_halve_epochs = get_i(m, "train.lr_halve_epochs", 20);
    p.beta1 = get_d(m, "train.beta1", 0.5);
    p.beta2 = get_d(m, "train.beta2", 0.999);
    p.clip_norm = get_d(m, "train.clip_norm", 1.0);
    p.seed = static_cast<uint64_t>(get_i(m, "train.seed", 0));
    p.cache_examples = get_i(m, "train.cache_examples", 1) != 0;
    auto ints = [&](const std::string& k, std::vector<int64_t> dflt) {
        auto it = m.find(k);
        return it == m.end() ? dflt : nn::split_ints(it->second);
    };
    p.svct_set = ints("train.svct_set", p.svct_set);
    {
        auto it = m.find("train.lact_set");
        if (it != m.end()) p.lact_set = nn::split_doubles(it->second);
    }
    p.svct_range[0] = get_i(m, "train.svct_min", p.svct_range[0]);
    p.svct_range[1] = get_i(m, "train.svct_max", p.svct_range[1]);
    p.lact_range[0] = get_d(m, "train.lact_min", p.lact_range[0]);
    p.lact_range[1] = get_d(m, "train.lact_max", p.lact_range[1]);
    return p;
}

nn::ModelConfig model_from_config(const std::map<std::string, std::string>& m, const ScanGeometry& geom) {
    nn::ModelConfig cfg;
    const std::string preset = get_s(m, "model.preset", "desk");
    if (preset == "paper") cfg = nn::ModelConfig::paper();
    else cfg = nn::ModelConfig::desk();
    cfg.image_size = geom.image_size;
    cfg.n_full_views = geom.n_full_views;
    auto ints = [&](const std::string& k, std::vector<int64_t> dflt) {
        auto it = m.find(k);
        return it == m.end() ? dflt : nn::split_ints(it->second);
    };
    cfg.embed_dims = ints("model.embed_dims", cfg.embed_dims);
    cfg.n_blocks = ints("model.n_blocks", cfg.n_blocks);
    cfg.n_heads = ints("model.n_heads", cfg.n_heads);
    cfg.mlp_ratio = ints("model.mlp_ratio", cfg.mlp_ratio);
    if (m.count("model.attn_ratio")) cfg.attn_ratio = nn::split_doubles(m.at("model.attn_ratio"));
    cfg.window = get_i(m, "model.window", cfg.window);
    cfg.validate();
    return cfg;
}

int cmd_train(const std::string& config_file, const std::string& resume, const std::string& out_dir) {
    std::map<std::string, std::string> cfg;
    try {
        cfg = load_config_file(config_file);
    } catch (const std::runtime_error& e) {
        fail(3, e.what());
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) fail(3, "cannot create output directory: " + out_dir);

    ScanGeometry geom;
    try {
        geom = geometry_from_config(cfg);
    } catch (const std::invalid_argument& e) {
        fail(2, e.what());
    }
    auto plan = plan_from_config(cfg);
    auto mcfg = model_from_config(cfg, geom);
    auto noise = noise_from_config(cfg);
    train::LossConfig lc;
    lc.alpha = get_d(cfg, "train.alpha", 0.1);
    lc.use_scale = get_i(cfg, "train.use_scale", 1) != 0;

    RngState init_rng(plan.seed + 17);
    train::Trainer<float> trainer(geom, mcfg, plan, noise, lc, init_rng);

    // dataset: directory of grayscale images or synthetic phantoms
    const std::string data_dir = get_s(cfg, "data.dir", "");
    if (!data_dir.empty()) {
        auto images = load_dataset(data_dir, geom.image_size);
        for (auto& im : images) trainer.dataset.push_back(std::move(im));
    } else {
        const int64_t count = get_i(cfg, "data.synthetic_count", 50);
        RngState prng(static_cast<uint64_t>(get_i(cfg, "data.synthetic_seed", 1234)));
        for (int64_t i = 0; i < count; ++i)
            trainer.dataset.push_back(make_phantom<float>(PhantomKind::random_ellipses, geom.image_size,
                                                          geom.pixel_spacing, prng));
    }
    RngState ctx_rng(0);
    trainer.context_phantom = make_phantom<float>(PhantomKind::shepp_logan, geom.image_size, geom.pixel_spacing, ctx_rng);

    int64_t start_epoch = 1;
    if (!resume.empty()) {
        Checkpoint ck;
        try {
            ck = load_checkpoint(resume);
        } catch (const std::runtime_error& e) {
            fail(5, e.what());
        }
        train::load_model_params(trainer.model, ck, &trainer.opt);
        start_epoch = get_i(ck.config, "train.completed_epochs", 0) + 1;
        trainer.restore_progress(get_i(ck.config, "train.step", 0),
                                 static_cast<uint64_t>(get_i(ck.config, "train.rng_counter", 0)));
    }

    std::string log_csv = "step,epoch,scenario,setting,s_t,loss,lr\n";
    char buf[192];
    double last_loss = 0;
    for (int64_t epoch = start_epoch; epoch <= plan.epochs; ++epoch) {
        double epoch_loss = 0;
        for (int64_t s = 0; s < plan.steps_per_epoch; ++s) {
            train::StepLog log;
            try {
                log = trainer.train_step(epoch);
            } catch (const std::runtime_error& e) {
                write_text_file(out_dir + "/train_log.csv", log_csv);
                fail(4, std::string("training aborted: ") + e.what());
            }
            std::snprintf(buf, sizeof(buf), "%lld,%lld,%d,%g,%.4f,%.6f,%.8f\n", static_cast<long long>(log.step),
                          static_cast<long long>(log.epoch), log.setting.scenario, log.setting.value, log.s_t,
                          log.loss, log.lr);
            log_csv += buf;
            epoch_loss += log.loss;
            last_loss = log.loss;
        }
        auto extra = train::geometry_to_map(geom);
        extra["train.completed_epochs"] = std::to_string(epoch);
        extra["train.step"] = std::to_string(trainer.steps_taken());
        extra["train.rng_counter"] = std::to_string(trainer.rng_counter());
        save_checkpoint(out_dir + "/ckpt_epoch" + std::to_string(epoch) + ".ivck",
                        train::make_checkpoint(trainer.model, &trainer.opt, extra));
        save_checkpoint(out_dir + "/ckpt_final.ivck", train::make_checkpoint(trainer.model, &trainer.opt, extra));
        std::printf("epoch %lld/%lld mean_loss %.6f\n", static_cast<long long>(epoch),
                    static_cast<long long>(plan.epochs), epoch_loss / static_cast<double>(plan.steps_per_epoch));
    }
    write_text_file(out_dir + "/train_log.csv", log_csv);
    std::snprintf(buf, sizeof(buf), "final_loss = %.6f\nsteps = %lld\n", last_loss,
                  static_cast<long long>(trainer.steps_taken()));
    write_text_file(out_dir + "/summary.txt", buf);
    return 0;
}

// -------------------------------------------------------------- reconstruct

int cmd_reconstruct(const std::string& ckpt_path, const std::string& input, const std::string& sampling_file,
                    const std::string& context, const std::string& dual_flag, const std::string& target,
                    uint64_t seed, const std::string& out_dir) {
    Checkpoint ck;
    try {
        ck = load_checkpoint(ckpt_path);
    } catch (const std::runtime_error& e) {
        fail(5, e.what());
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) fail(3, "cannot create output directory: " + out_dir);

    nn::ModelConfig mcfg;
    ScanGeometry geom;
    try {
        mcfg = nn::ModelConfig::from_map(ck.config);
        geom = train::geometry_from_map(ck.config);
    } catch (const std::exception& e) {
        fail(5, std::string("checkpoint config: ") + e.what());
    }
    const bool dual = dual_flag == "on";
    RngState mrng(0);
    nn::ProctModel<float> model = nn::ProctModel<float>::init_model(mcfg, mrng);
    train::DualModel<float> dual_model;
    if (dual) {
        try {
            dual_model = train::load_dual_checkpoint(ck, geom);
        } catch (const std::runtime_error& e) {
            fail(5, e.what());
        }
    } else {
        try {
            train::load_model_params(model, ck);
        } catch (const std::runtime_error& e) {
            fail(5, e.what());
        }
    }

    // sampling vector
    SamplingVector v;
    try {
        auto text = read_text_file(sampling_file);
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
        v = from_rle(text);
    } catch (const std::exception& e) {
        fail(3, std::string("sampling vector: ") + e.what());
    }
    if (v.size() != geom.n_full_views) fail(5, "sampling vector length does not match checkpoint geometry");

    // input: image (X as-is) or sinogram (X = fbp)
    Image<float> x_img;
    Sinogram<float> sino;
    bool have_sino = false;
    try {
        IvctHeader hdr = read_ivct_header(input);
        if (hdr.kind == 1) {
            sino = read_ivct_sinogram(input);
            have_sino = true;
            if (sino.data.dim(1) != geom.n_detectors) fail(5, "sinogram does not match checkpoint geometry");
            x_img = fbp(sino, geom);
        } else {
            x_img = read_ivct_image(input);
        }
    } catch (const CmdError&) {
        throw;
    } catch (const std::exception&) {
        try {
            x_img = load_image_file(input);
        } catch (const std::exception& e2) {
            fail(3, std::string("cannot read input: ") + e2.what());
        }
    }
    if (x_img.data.dim(0) != geom.image_size) fail(5, "input image does not match checkpoint geometry");

    // context pair: "phantom" or "incomplete.ivct,full.ivct"
    Tensor<float> ctx;
    const int64_t n = geom.image_size;
    if (context == "phantom" || context.empty()) {
        RngState crng(seed);
        auto ph = make_phantom<float>(PhantomKind::shepp_logan, n, geom.pixel_spacing, crng);
        NoiseModel nm;
        auto ps = add_noise(forward_project(ph, geom, all_views(geom)), nm, crng);
        auto cf = fbp(ps, geom);
        auto ci = fbp(reduce_sinogram(ps, v), geom);
        ctx = concat_channels(reshape(ci.data, {1, 1, n, n}), reshape(cf.data, {1, 1, n, n}));
    } else {
        const auto comma = context.find(',');
        if (comma == std::string::npos) fail(2, "--context must be 'phantom' or '<incomplete>,<full>'");
        auto ci = load_image_file(context.substr(0, comma));
        auto cf = load_image_file(context.substr(comma + 1));
        if (ci.data.dim(0) != n || cf.data.dim(0) != n) fail(5, "context images do not match geometry");
        ctx = concat_channels(reshape(ci.data, {1, 1, n, n}), reshape(cf.data, {1, 1, n, n}));
    }

    auto x = reshape(x_img.data, {1, 1, n, n});
    const std::string rle = to_rle(v);
    Image<float> yhat_img;
    if (dual) {
        if (!have_sino) fail(2, "--dual on requires a sinogram input");
        auto zf = zero_fill(sino, v);
        auto out = dual_model.dual_forward(x, reshape(zf.data, {1, 1, geom.n_full_views, geom.n_detectors}), v, ctx);
        yhat_img.data = reshape(out.y_image, {n, n});
        Image<float> fused{reshape(out.y_fused, {n, n}), geom.pixel_spacing};
        Image<float> ysino{reshape(out.y_sino, {n, n}), geom.pixel_spacing};
        write_image_outputs(out_dir + "/yfused", fused, geom, rle);
        write_image_outputs(out_dir + "/ysino", ysino, geom, rle);
    } else {
        yhat_img.data = reshape(model.forward(x, ctx, v), {n, n});
    }
    yhat_img.pixel_spacing = geom.pixel_spacing;
    write_image_outputs(out_dir + "/yhat", yhat_img, geom, rle);
    write_image_outputs(out_dir + "/input", x_img, geom, rle);

    if (!target.empty()) {
        auto tgt = load_image_file(target);
        if (tgt.data.shape() != yhat_img.data.shape()) fail(5, "target image size mismatch");
        const double p_in = psnr(x_img.data.values(), tgt.data.values());
        const double p_out = psnr(yhat_img.data.values(), tgt.data.values());
        char buf[128];
        std::snprintf(buf, sizeof(buf), "psnr_input = %.4f\npsnr_output = %.4f\n", p_in, p_out);
        write_text_file(out_dir + "/psnr.txt", buf);
        std::printf("%s", buf);
    }
    std::printf("reconstruct: wrote %s/yhat.ivct (views %lld/%lld)\n", out_dir.c_str(),
                static_cast<long long>(v.popcount()), static_cast<long long>(geom.n_full_views));
    return 0;
}

// ------------------------------------------------------------- eval / sweep

int cmd_eval(const std::string& ckpt_path, const std::string& dataset_dir, const std::string& settings_text,
             uint64_t seed, bool sweep, const std::string& out_dir) {
    Checkpoint ck;
    try {
        ck = load_checkpoint(ckpt_path);
    } catch (const std::runtime_error& e) {
        fail(5, e.what());
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) fail(3, "cannot create output directory: " + out_dir);

    nn::ModelConfig mcfg;
    ScanGeometry geom;
    try {
        mcfg = nn::ModelConfig::from_map(ck.config);
        geom = train::geometry_from_map(ck.config);
    } catch (const std::exception& e) {
        fail(5, std::string("checkpoint config: ") + e.what());
    }
    RngState mrng(0);
    auto model = nn::ProctModel<float>::init_model(mcfg, mrng);
    try {
        train::load_model_params(model, ck);
    } catch (const std::runtime_error& e) {
        fail(5, e.what());
    }

    auto settings = parse_settings(settings_text);
    auto images = load_dataset(dataset_dir, geom.image_size);
    RngState crng(0);
    auto ctx_phantom = make_phantom<float>(PhantomKind::shepp_logan, geom.image_size, geom.pixel_spacing, crng);
    NoiseModel noise;

    eval::EvalOptions opt;
    opt.seed = seed;
    opt.panel_dir = out_dir;
    std::string per_image;
    auto rep = eval::evaluate(&model, nullptr, images, settings, geom, noise, ctx_phantom, opt, &per_image);
    rep.metadata["checkpoint_checksum"] = std::to_string(checkpoint_checksum(ckpt_path));
    write_text_file(out_dir + "/report.csv", rep.to_csv());
    write_text_file(out_dir + "/per_image.csv", per_image);

    if (sweep) {
        for (int scenario : {1, 2}) {
            std::vector<double> xs, ys;
            for (const auto& r : rep.rows)
                if (r.method == "proct" && r.scenario == (scenario == 1 ? "svct" : "lact")) {
                    xs.push_back(r.setting);
                    ys.push_back(r.psnr_mean());
                }
            if (!xs.empty())
                render_profile_plot(out_dir + (scenario == 1 ? "/profile_svct.png" : "/profile_lact.png"),
                                    scenario == 1 ? "PSNR vs views" : "PSNR vs angle", xs, ys);
        }
    }
    std::printf("eval: %zu settings x %zu images -> %s/report.csv\n", settings.size(), images.size(),
                out_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"incomplete-view CT lab: simulation, training, reconstruction, evaluation"};
    app.require_subcommand(1);

    std::string geometry_file, input, phantom = "shepp_logan", scenario = "svct", setting = "72";
    std::string noise_flag = "on", out_dir = "out", config_file, resume, ckpt, sampling_file;
    std::string context = "phantom", dual_flag = "off", target, dataset_dir, settings_text;
    uint64_t seed = 0;

    auto* sim = app.add_subcommand("simulate", "simulate incomplete-view acquisition");
    sim->add_option("--geometry", geometry_file, "geometry config file");
    sim->add_option("--input", input, "input image (png/pgm/ivct)");
    sim->add_option("--phantom", phantom, "phantom kind: shepp_logan | random_ellipses");
    sim->add_option("--scenario", scenario, "svct | lact | hybrid1 | hybrid2 | hybrid3");
    sim->add_option("--setting", setting, "views (svct), end angle (lact), 'deg,views' (hybrid)");
    sim->add_option("--noise", noise_flag, "on | off");
    sim->add_option("--seed", seed, "rng seed");
    sim->add_option("--out", out_dir, "output directory");

    auto* tr = app.add_subcommand("train", "train the restoration model");
    tr->add_option("--config", config_file, "training config file")->required();
    tr->add_option("--resume", resume, "checkpoint to resume from");
    tr->add_option("--out", out_dir, "output directory");

    auto* rec = app.add_subcommand("reconstruct", "run the model on one image or sinogram");
    rec->add_option("--ckpt", ckpt, "checkpoint file")->required();
    rec->add_option("--input", input, "input image or sinogram (.ivct)")->required();
    rec->add_option("--sampling", sampling_file, "sampling vector text file")->required();
    rec->add_option("--context", context, "'phantom' or '<incomplete>,<full>' image files");
    rec->add_option("--dual", dual_flag, "on | off");
    rec->add_option("--target", target, "ground-truth image for PSNR");
    rec->add_option("--seed", seed, "rng seed");
    rec->add_option("--out", out_dir, "output directory");

    auto* ev = app.add_subcommand("eval", "batch evaluation over a dataset");
    ev->add_option("--ckpt", ckpt, "checkpoint file")->required();
    ev->add_option("--dataset", dataset_dir, "dataset directory")->required();
    ev->add_option("--settings", settings_text, "e.g. 'svct:18,36,72,144;lact:90,120,150'")->required();
    ev->add_option("--seed", seed, "rng seed");
    ev->add_option("--out", out_dir, "output directory");

    auto* sw = app.add_subcommand("sweep", "evaluation sweep with profile plots");
    sw->add_option("--ckpt", ckpt, "checkpoint file")->required();
    sw->add_option("--dataset", dataset_dir, "dataset directory")->required();
    sw->add_option("--settings", settings_text, "list or range, e.g. 'svct:9:144:6'")->required();
    sw->add_option("--seed", seed, "rng seed");
    sw->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(geometry_file, input, phantom, scenario, setting, noise_flag, seed, out_dir);
        if (tr->parsed()) return cmd_train(config_file, resume, out_dir);
        if (rec->parsed())
            return cmd_reconstruct(ckpt, input, sampling_file, context, dual_flag, target, seed, out_dir);
        if (ev->parsed()) return cmd_eval(ckpt, dataset_dir, settings_text, seed, false, out_dir);
        if (sw->parsed()) return cmd_eval(ckpt, dataset_dir, settings_text, seed, true, out_dir);
    } catch (const CmdError& e) {
        std::fprintf(stderr, "error: %s\n", e.msg.c_str());
        return e.code;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 2;
}
