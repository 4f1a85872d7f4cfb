#pragma once

// The prompted contextual transformer: hourglass encoder/bottleneck/decoder
// with a source and a context pathway, windowed multi-head self-attention on
// the source, spatial/frequency interaction between the pathways, and
// prompt-modulated residuals throughout.

#include <cmath>
#include <map>

#include "ivct/prompter.hpp"

namespace ivct::nn {

struct ModelConfig {
    std::vector<int64_t> embed_dims{24, 48, 96, 48, 24};
    std::vector<int64_t> n_blocks{8, 8, 8, 4, 4};
    std::vector<int64_t> n_heads{2, 4, 6, 1, 1};
    int64_t window = 8;
    std::vector<int64_t> mlp_ratio{2, 4, 4, 2, 2};
    std::vector<double> attn_ratio{0, 0.5, 1, 0, 0};
    int64_t in_channels_src = 1;
    int64_t in_channels_ctx = 2;
    int64_t image_size = 256;
    int64_t n_full_views = 720;

    static ModelConfig paper() { return ModelConfig{}; }

    static ModelConfig desk(int64_t image_size = 64, int64_t n_full_views = 180) {
        ModelConfig c;
        c.embed_dims = {8, 16, 32, 16, 8};
        c.n_blocks = {2, 2, 2, 1, 1};
        c.n_heads = {1, 2, 4, 1, 1};
        c.mlp_ratio = {2, 4, 4, 2, 2};
        c.attn_ratio = {0, 0.5, 1, 0, 0};
        c.image_size = image_size;
        c.n_full_views = n_full_views;
        return c;
    }

    void validate() const {
        if (embed_dims.size() != 5 || n_blocks.size() != 5 || n_heads.size() != 5 || mlp_ratio.size() != 5 ||
            attn_ratio.size() != 5)
            throw std::invalid_argument("model config: expected five stages");
        for (int s = 0; s < 5; ++s) {
            if (embed_dims[s] < 1 || n_blocks[s] < 1 || n_heads[s] < 1 || mlp_ratio[s] < 1)
                throw std::invalid_argument("model config: non-positive stage parameter");
            if (attn_ratio[s] < 0 || attn_ratio[s] > 1)
                throw std::invalid_argument("model config: attention ratio outside [0,1]");
            if (attn_ratio[s] > 0 && embed_dims[s] % n_heads[s] != 0)
                throw std::invalid_argument("model config: heads must divide stage dim");
        }
        if (window < 1) throw std::invalid_argument("model config: bad window");
        if (image_size % 4 != 0) throw std::invalid_argument("model config: image size must be divisible by 4");
        if (n_full_views < 1) throw std::invalid_argument("model config: bad view count");
    }

    // stage resolutions of the hourglass: full, /2, /4, /2, full
    int64_t stage_size(int s) const {
        const int64_t div[5] = {1, 2, 4, 2, 1};
        return image_size / div[s];
    }

    std::map<std::string, std::string> to_map() const;
    static ModelConfig from_map(const std::map<std::string, std::string>& m);
};

inline std::string join_ints(const std::vector<int64_t>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

inline std::vector<int64_t> split_ints(const std::string& s) {
    std::vector<int64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoll(item));
    return out;
}

inline std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

inline std::map<std::string, std::string> ModelConfig::to_map() const {
    return {{"model.embed_dims", join_ints(embed_dims)},
            {"model.n_blocks", join_ints(n_blocks)},
            {"model.n_heads", join_ints(n_heads)},
            {"model.window", std::to_string(window)},
            {"model.mlp_ratio", join_ints(mlp_ratio)},
            {"model.attn_ratio", join_doubles(attn_ratio)},
            {"model.in_channels_src", std::to_string(in_channels_src)},
            {"model.in_channels_ctx", std::to_string(in_channels_ctx)},
            {"model.image_size", std::to_string(image_size)},
            {"model.n_full_views", std::to_string(n_full_views)}};
}

inline ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& m) {
    ModelConfig c;
    c.embed_dims = split_ints(m.at("model.embed_dims"));
    c.n_blocks = split_ints(m.at("model.n_blocks"));
    c.n_heads = split_ints(m.at("model.n_heads"));
    c.window = std::stoll(m.at("model.window"));
    c.mlp_ratio = split_ints(m.at("model.mlp_ratio"));
    c.attn_ratio = split_doubles(m.at("model.attn_ratio"));
    c.in_channels_src = std::stoll(m.at("model.in_channels_src"));
    c.in_channels_ctx = std::stoll(m.at("model.in_channels_ctx"));
    c.image_size = std::stoll(m.at("model.image_size"));
    c.n_full_views = std::stoll(m.at("model.n_full_views"));
    c.validate();
    return c;
}

// Artifact-aware contextual mixer: W-MHSA over the source features fused with
// the spatial/frequency interaction of both pathways.
template <typename T>
struct ContextualMixer {
    bool has_attention = false;
    int64_t heads = 1, window = 8, dim = 0;
    Conv2d<T> to_q, to_k, to_v; // 1x1 on source (q,k only when attending)
    Conv2d<T> to_vc;            // 1x1 context projection
    Conv2d<T> spat_dw;          // 3x3 depthwise over [V;Vc]
    Conv2d<T> spat_pw;          // 1x1 2C -> C
    SpectralFilter<T> freq_filter;
    Conv2d<T> freq_pw;          // 1x1 2C -> C
    Conv2d<T> conv_src, conv_con;
    Conv2d<T> fuse;             // the closing linear layer

    static ContextualMixer make(int64_t c, int64_t res, bool attention, int64_t heads, int64_t window,
                                RngState& rng) {
        ContextualMixer m;
        m.has_attention = attention;
        m.heads = heads;
        m.window = window;
        m.dim = c;
        if (attention) {
            m.to_q = Conv2d<T>::make(c, c, 1, 1, 0, rng);
            m.to_k = Conv2d<T>::make(c, c, 1, 1, 0, rng);
        }
        m.to_v = Conv2d<T>::make(c, c, 1, 1, 0, rng);
        m.to_vc = Conv2d<T>::make(c, c, 1, 1, 0, rng);
        m.spat_dw = Conv2d<T>::make(2 * c, 2 * c, 3, 1, 1, rng, 2 * c);
        m.spat_pw = Conv2d<T>::make(2 * c, c, 1, 1, 0, rng);
        m.freq_filter = SpectralFilter<T>::make(2 * c, res, res, rng);
        m.freq_pw = Conv2d<T>::make(2 * c, c, 1, 1, 0, rng);
        m.conv_src = Conv2d<T>::make(c, c, 1, 1, 0, rng);
        m.conv_con = Conv2d<T>::make(c, c, 1, 1, 0, rng);
        m.fuse = Conv2d<T>::make(c, c, 1, 1, 0, rng);
        return m;
    }

    std::pair<Tensor<T>, Tensor<T>> operator()(Tensor<T> f, Tensor<T> fc) const {
        if (f.shape() != fc.shape())
            throw std::invalid_argument("mixer: pathway shape mismatch " + shape_str(f.shape()) + " vs " +
                                        shape_str(fc.shape()));
        const int64_t n = f.dim(0), c = f.dim(1), h = f.dim(2), w = f.dim(3);

        auto v = to_v(f);
        auto vc = to_vc(fc);
        auto u = concat_channels(v, vc);
        auto spat = spat_pw(spat_dw(u));
        auto freq = freq_pw(freq_filter(u));
        auto inter = add(spat, freq);
        auto g_intr = relu(conv_src(inter));
        auto g_ctx = relu(conv_con(inter));

        Tensor<T> fused;
        if (has_attention) {
            auto q = heads_to_tokens(window_partition(to_q(f), window), heads);
            auto k = heads_to_tokens(window_partition(to_k(f), window), heads);
            auto vt = heads_to_tokens(window_partition(v, window), heads);
            const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(c / heads));
            auto scores = softmax(scale(matmul_batched(q, k, true), inv_sqrt_d), 2);
            auto att_tok = matmul_batched(scores, vt);
            auto att = window_merge(tokens_to_heads(att_tok, heads, window), window, n, c, h, w);
            fused = fuse(add(att, g_intr));
        } else {
            fused = fuse(g_intr);
        }
        return {fused, g_ctx};
    }

    void params(const std::string& p, ParamMap<T>& m) const {
        if (has_attention) {
            to_q.params(p + ".to_q", m);
            to_k.params(p + ".to_k", m);
        }
        to_v.params(p + ".to_v", m);
        to_vc.params(p + ".to_vc", m);
        spat_dw.params(p + ".spat_dw", m);
        spat_pw.params(p + ".spat_pw", m);
        freq_filter.params(p + ".freq", m);
        freq_pw.params(p + ".freq_pw", m);
        conv_src.params(p + ".conv_src", m);
        conv_con.params(p + ".conv_con", m);
        fuse.params(p + ".fuse", m);
    }
};

// One transformer block: prompt-modulated mixer residual followed by a
// prompt-modulated MLP residual, per pathway, with rescaled-norm statistics
// re-applied to each branch output.
template <typename T>
struct Block {
    Rln<T> norm1_src, norm1_ctx, norm2_src, norm2_ctx;
    ContextualMixer<T> mixer;
    Conv2d<T> mlp_src_in, mlp_src_out, mlp_ctx_in, mlp_ctx_out;

    static Block make(int64_t c, int64_t res, int64_t mlp_ratio, bool attention, int64_t heads, int64_t window,
                      RngState& rng) {
        Block b;
        b.norm1_src = Rln<T>::make(c, rng);
        b.norm1_ctx = Rln<T>::make(c, rng);
        b.norm2_src = Rln<T>::make(c, rng);
        b.norm2_ctx = Rln<T>::make(c, rng);
        b.mixer = ContextualMixer<T>::make(c, res, attention, heads, window, rng);
        b.mlp_src_in = Conv2d<T>::make(c, c * mlp_ratio, 1, 1, 0, rng);
        b.mlp_src_out = Conv2d<T>::make(c * mlp_ratio, c, 1, 1, 0, rng);
        b.mlp_ctx_in = Conv2d<T>::make(c, c * mlp_ratio, 1, 1, 0, rng);
        b.mlp_ctx_out = Conv2d<T>::make(c * mlp_ratio, c, 1, 1, 0, rng);
        return b;
    }

    std::pair<Tensor<T>, Tensor<T>> operator()(Tensor<T> h, Tensor<T> hc, Tensor<T> p, Tensor<T> pc) const {
        auto n1 = norm1_src(h);
        auto n1c = norm1_ctx(hc);
        auto [m, mc] = mixer(n1.y, n1c.y);
        h = add(h, mul_channel(norm1_src.reapply(m, n1), p));
        hc = add(hc, mul_channel(norm1_ctx.reapply(mc, n1c), pc));

        auto n2 = norm2_src(h);
        auto y = mlp_src_out(relu(mlp_src_in(n2.y)));
        h = add(h, mul_channel(norm2_src.reapply(y, n2), p));

        auto n2c = norm2_ctx(hc);
        auto yc = mlp_ctx_out(relu(mlp_ctx_in(n2c.y)));
        hc = add(hc, mul_channel(norm2_ctx.reapply(yc, n2c), pc));
        return {h, hc};
    }

    void params(const std::string& p, ParamMap<T>& m) const {
        norm1_src.params(p + ".norm1_src", m);
        norm1_ctx.params(p + ".norm1_ctx", m);
        norm2_src.params(p + ".norm2_src", m);
        norm2_ctx.params(p + ".norm2_ctx", m);
        mixer.params(p + ".mixer", m);
        mlp_src_in.params(p + ".mlp_src_in", m);
        mlp_src_out.params(p + ".mlp_src_out", m);
        mlp_ctx_in.params(p + ".mlp_ctx_in", m);
        mlp_ctx_out.params(p + ".mlp_ctx_out", m);
    }
};

template <typename T>
struct ProctModel {
    ModelConfig cfg;
    Conv2d<T> embed_src, embed_ctx;
    std::vector<std::vector<Block<T>>> stages; // 5 stages
    Conv2d<T> down1_src, down1_ctx, down2_src, down2_ctx;
    ConvT2d<T> up1_src, up1_ctx, up2_src, up2_ctx;
    Conv2d<T> skip1_src, skip1_ctx, skip2_src, skip2_ctx;
    Conv2d<T> unembed;
    ViewPrompter<T> prompter_src, prompter_ctx;

    static ProctModel init_model(const ModelConfig& cfg, RngState& rng) {
        cfg.validate();
        ProctModel m;
        m.cfg = cfg;
        const auto& d = cfg.embed_dims;
        m.embed_src = Conv2d<T>::make(cfg.in_channels_src, d[0], 3, 1, 1, rng);
        m.embed_ctx = Conv2d<T>::make(cfg.in_channels_ctx, d[0], 3, 1, 1, rng);
        for (int s = 0; s < 5; ++s) {
            std::vector<Block<T>> blocks;
            // the last ceil(ratio * n) blocks of the stage carry attention
            const int64_t n_attn = static_cast<int64_t>(std::ceil(cfg.attn_ratio[s] * static_cast<double>(cfg.n_blocks[s])));
            for (int64_t b = 0; b < cfg.n_blocks[s]; ++b) {
                const bool attn = b >= cfg.n_blocks[s] - n_attn;
                blocks.push_back(Block<T>::make(d[s], cfg.stage_size(s), cfg.mlp_ratio[s], attn, cfg.n_heads[s],
                                                cfg.window, rng));
            }
            m.stages.push_back(std::move(blocks));
        }
        m.down1_src = Conv2d<T>::make(d[0], d[1], 3, 2, 1, rng);
        m.down1_ctx = Conv2d<T>::make(d[0], d[1], 3, 2, 1, rng);
        m.down2_src = Conv2d<T>::make(d[1], d[2], 3, 2, 1, rng);
        m.down2_ctx = Conv2d<T>::make(d[1], d[2], 3, 2, 1, rng);
        m.up1_src = ConvT2d<T>::make(d[2], d[3], 2, rng);
        m.up1_ctx = ConvT2d<T>::make(d[2], d[3], 2, rng);
        m.up2_src = ConvT2d<T>::make(d[3], d[4], 2, rng);
        m.up2_ctx = ConvT2d<T>::make(d[3], d[4], 2, rng);
        m.skip1_src = Conv2d<T>::make(d[1], d[3], 1, 1, 0, rng);
        m.skip1_ctx = Conv2d<T>::make(d[1], d[3], 1, 1, 0, rng);
        m.skip2_src = Conv2d<T>::make(d[0], d[4], 1, 1, 0, rng);
        m.skip2_ctx = Conv2d<T>::make(d[0], d[4], 1, 1, 0, rng);
        m.unembed = Conv2d<T>::make(d[4], 1, 3, 1, 1, rng);
        m.prompter_src = ViewPrompter<T>::make(cfg.n_full_views, d, rng);
        m.prompter_ctx = ViewPrompter<T>::make(cfg.n_full_views, d, rng);
        return m;
    }

    std::pair<Tensor<T>, Tensor<T>> run_stage(int s, Tensor<T> h, Tensor<T> hc, const StagePrompts<T>& ps,
                                              const StagePrompts<T>& pc) const {
        for (const auto& b : stages[static_cast<size_t>(s)]) {
            auto [nh, nhc] = b(h, hc, ps.stage[static_cast<size_t>(s)], pc.stage[static_cast<size_t>(s)]);
            h = nh;
            hc = nhc;
        }
        return {h, hc};
    }

    Tensor<T> forward_with_prompts(Tensor<T> x, Tensor<T> ctx, const StagePrompts<T>& ps,
                                   const StagePrompts<T>& pc) const {
        if (x.ndim() != 4 || ctx.ndim() != 4 || x.dim(2) != ctx.dim(2) || x.dim(3) != ctx.dim(3))
            throw std::invalid_argument("forward: source/context spatial size mismatch");
        if (x.dim(2) != cfg.image_size || x.dim(3) != cfg.image_size)
            throw std::invalid_argument("forward: input does not match the configured image size");

        auto h = embed_src(x);
        auto hc = embed_ctx(ctx);
        auto [e1, e1c] = run_stage(0, h, hc, ps, pc);

        auto [e2, e2c] = run_stage(1, down1_src(e1), down1_ctx(e1c), ps, pc);
        auto [bt, btc] = run_stage(2, down2_src(e2), down2_ctx(e2c), ps, pc);

        auto d1 = add(up1_src(bt), skip1_src(e2));
        auto d1c = add(up1_ctx(btc), skip1_ctx(e2c));
        auto [t4, t4c] = run_stage(3, d1, d1c, ps, pc);

        auto d2 = add(up2_src(t4), skip2_src(e1));
        auto d2c = add(up2_ctx(t4c), skip2_ctx(e1c));
        auto [t5, t5c] = run_stage(4, d2, d2c, ps, pc);
        (void)t5c; // the context pathway is guidance only; its tail is unused

        auto residual = mul_channel(unembed(t5), ps.output_gate);
        return add(x, residual);
    }

    Tensor<T> forward(Tensor<T> x, Tensor<T> ctx, const SamplingVector& v) const {
        return forward_with_prompts(x, ctx, prompter_src.encode(v), prompter_ctx.encode(v));
    }

    void params(ParamMap<T>& m) const {
        embed_src.params("embed_src", m);
        embed_ctx.params("embed_ctx", m);
        for (int s = 0; s < 5; ++s)
            for (size_t b = 0; b < stages[static_cast<size_t>(s)].size(); ++b)
                stages[static_cast<size_t>(s)][b].params("stage" + std::to_string(s) + ".block" + std::to_string(b), m);
        down1_src.params("down1_src", m);
        down1_ctx.params("down1_ctx", m);
        down2_src.params("down2_src", m);
        down2_ctx.params("down2_ctx", m);
        up1_src.params("up1_src", m);
        up1_ctx.params("up1_ctx", m);
        up2_src.params("up2_src", m);
        up2_ctx.params("up2_ctx", m);
        skip1_src.params("skip1_src", m);
        skip1_ctx.params("skip1_ctx", m);
        skip2_src.params("skip2_src", m);
        skip2_ctx.params("skip2_ctx", m);
        unembed.params("unembed", m);
        prompter_src.params("prompter_src", m);
        prompter_ctx.params("prompter_ctx", m);
    }

    int64_t count_params() const {
        ParamMap<T> m;
        params(m);
        return m.count();
    }
};

} // namespace ivct::nn
