#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ivct/model.hpp"
#include "test_support.hpp"

using namespace ivct;
using namespace ivct::nn;
using ivct::testing::fd_check;
using ivct::testing::max_abs_diff;
using ivct::testing::random_tensor;

namespace {

ModelConfig tiny_config() {
    ModelConfig c = ModelConfig::desk(16, 24);
    return c;
}

Tensor<double> zeros_like_prompt(int64_t c) { return Tensor<double>::zeros({c}); }

StagePrompts<double> zero_prompts(const ModelConfig& cfg) {
    StagePrompts<double> p;
    for (int64_t c : cfg.embed_dims) p.stage.push_back(zeros_like_prompt(c));
    p.output_gate = Tensor<double>::zeros({1});
    return p;
}

// independent arithmetic for the trainable scalar count of a model
int64_t expected_param_count(const ModelConfig& cfg) {
    auto conv = [](int64_t cin, int64_t cout, int64_t k, int64_t groups = 1) {
        return cout * (cin / groups) * k * k + cout;
    };
    auto lin = [](int64_t in, int64_t out) { return out * in + out; };
    int64_t total = 0;
    const auto& d = cfg.embed_dims;
    total += conv(cfg.in_channels_src, d[0], 3) + conv(cfg.in_channels_ctx, d[0], 3);
    for (int s = 0; s < 5; ++s) {
        const int64_t c = d[s], res = cfg.stage_size(s), r = cfg.mlp_ratio[s];
        const int64_t nb = cfg.n_blocks[s];
        const int64_t n_attn = static_cast<int64_t>(std::ceil(cfg.attn_ratio[s] * static_cast<double>(nb)));
        for (int64_t b = 0; b < nb; ++b) {
            const bool attn = b >= nb - n_attn;
            if (attn) total += 2 * conv(c, c, 1);                        // q, k
            total += 2 * conv(c, c, 1);                                  // v, vc
            total += conv(2 * c, 2 * c, 3, 2 * c) + conv(2 * c, c, 1);   // spatial branch
            total += 2 * c * res * (res / 2 + 1) * 2 + conv(2 * c, c, 1); // frequency branch
            total += 2 * conv(c, c, 1);                                  // conv_src, conv_con
            total += conv(c, c, 1);                                      // fuse
            total += 4 * (2 * c + lin(1, c) + lin(1, c));                // four rescaled norms
            total += 2 * (conv(c, r * c, 1) + conv(r * c, c, 1));        // two MLPs
        }
    }
    total += conv(d[0], d[1], 3) * 2 + conv(d[1], d[2], 3) * 2;                  // downsamplers
    total += (d[2] * d[3] * 4 + d[3]) * 2 + (d[3] * d[4] * 4 + d[4]) * 2;        // upsamplers
    total += conv(d[1], d[3], 1) * 2 + conv(d[0], d[4], 1) * 2;                  // skips
    total += conv(d[4], 1, 3);                                                   // unembed
    const int64_t prompter = lin(cfg.n_full_views, 128) + lin(128, 64) +
                             [&] {
                                 int64_t h = 0;
                                 for (int64_t c : d) h += lin(64, c);
                                 return h;
                             }() +
                             lin(64, 1);
    total += 2 * prompter;
    return total;
}

} // namespace

TEST_CASE("prompter: paper config produces stage prompt dims [24,48,96,48,24]") {
    RngState rng(0);
    auto cfg = ModelConfig::paper();
    auto p = ViewPrompter<double>::make(cfg.n_full_views, cfg.embed_dims, rng);
    auto prompts = p.encode(svct_vector(72, 720));
    REQUIRE(prompts.stage.size() == 5);
    const int64_t want[5] = {24, 48, 96, 48, 24};
    for (int s = 0; s < 5; ++s) CHECK(prompts.stage[static_cast<size_t>(s)].numel() == want[s]);
    CHECK(prompts.output_gate.numel() == 1);
}

TEST_CASE("prompter: deterministic and sensitive to single-bit changes") {
    RngState rng(0);
    auto p = ViewPrompter<double>::make(64, {8, 16, 32, 16, 8}, rng);
    auto v1 = svct_vector(9, 64);
    auto a = p.encode(v1);
    auto b = p.encode(v1);
    for (int s = 0; s < 5; ++s)
        CHECK(max_abs_diff(a.stage[static_cast<size_t>(s)].values(), b.stage[static_cast<size_t>(s)].values()) == 0.0);

    auto v2 = v1;
    v2.bits[1] ^= 1;
    auto c = p.encode(v2);
    double l2 = 0;
    for (int s = 0; s < 5; ++s)
        for (size_t i = 0; i < a.stage[static_cast<size_t>(s)].values().size(); ++i) {
            const double d = a.stage[static_cast<size_t>(s)].values()[i] - c.stage[static_cast<size_t>(s)].values()[i];
            l2 += d * d;
        }
    CHECK(l2 > 0.0);
    CHECK_THROWS(p.encode(svct_vector(9, 63)));
}

TEST_CASE("modulate: zero prompt is the identity, linear in the prompt") {
    RngState rng(1);
    auto h = random_tensor({2, 4, 6, 6}, rng, 1.0, false);
    auto w = random_tensor({4, 4, 3, 3}, rng, 0.4, false);
    auto f = [&](Tensor<double> x) { return conv2d(x, w, Tensor<double>(), 1, 1, 1); };

    auto zero = Tensor<double>::zeros({4});
    auto same = modulate(h, zero, f);
    CHECK(max_abs_diff(same.values(), h.values()) == 0.0);

    RngState rng2(2);
    auto p = random_tensor({4}, rng2, 1.0, false);
    auto y1 = modulate(h, p, f);
    auto y2 = modulate(h, scale(p, 2.0), f);
    CHECK(y1.shape() == h.shape());
    for (size_t i = 0; i < h.values().size(); ++i) {
        const double d1 = y1.values()[i] - h.values()[i];
        const double d2 = y2.values()[i] - h.values()[i];
        CHECK(d2 == doctest::Approx(2.0 * d1).epsilon(1e-12));
    }
}

TEST_CASE("init_model: paper and desk configs build; same seed gives identical bytes") {
    RngState r1(3), r2(3), r3(4);
    auto cfg = tiny_config();
    auto m1 = ProctModel<double>::init_model(cfg, r1);
    auto m2 = ProctModel<double>::init_model(cfg, r2);
    auto m3 = ProctModel<double>::init_model(cfg, r3);
    ParamMap<double> p1, p2, p3;
    m1.params(p1);
    m2.params(p2);
    m3.params(p3);
    REQUIRE(p1.items.size() == p2.items.size());
    bool all_equal = true, any_diff_seed = false;
    for (size_t i = 0; i < p1.items.size(); ++i) {
        all_equal = all_equal && p1.items[i].second.values() == p2.items[i].second.values();
        any_diff_seed = any_diff_seed || p1.items[i].second.values() != p3.items[i].second.values();
    }
    CHECK(all_equal);
    CHECK(any_diff_seed);

    ModelConfig paper = ModelConfig::paper();
    CHECK_NOTHROW(paper.validate());
    ModelConfig bad = tiny_config();
    bad.n_heads = {3, 3, 3, 3, 3}; // 3 does not divide 16 at the attention stage
    bad.attn_ratio = {1, 1, 1, 1, 1};
    CHECK_THROWS(ProctModel<double>::init_model(bad, r1));
}

TEST_CASE("mixer: output shapes match inputs with and without attention") {
    RngState rng(5);
    for (bool attn : {false, true}) {
        auto mix = ContextualMixer<double>::make(8, 8, attn, 2, 4, rng);
        auto f = random_tensor({2, 8, 8, 8}, rng, 1.0, false);
        auto fc = random_tensor({2, 8, 8, 8}, rng, 1.0, false);
        auto [g, gc] = mix(f, fc);
        CHECK(g.shape() == f.shape());
        CHECK(gc.shape() == f.shape());
    }
    auto mix = ContextualMixer<double>::make(8, 8, true, 2, 4, rng);
    auto f = random_tensor({1, 8, 8, 8}, rng, 1.0, false);
    auto bad = random_tensor({1, 8, 4, 4}, rng, 1.0, false);
    CHECK_THROWS(mix(f, bad));
}

TEST_CASE("attention: uniform value rows reduce to the row mean") {
    // with all value tokens equal, softmax weights are irrelevant: the
    // attention output equals that shared token
    RngState rng(6);
    auto q = random_tensor({2, 16, 4}, rng, 1.0, false);
    auto k = random_tensor({2, 16, 4}, rng, 1.0, false);
    std::vector<double> vv(2 * 16 * 4);
    for (int64_t b = 0; b < 2; ++b)
        for (int64_t t = 0; t < 16; ++t)
            for (int64_t d = 0; d < 4; ++d) vv[static_cast<size_t>((b * 16 + t) * 4 + d)] = 0.3 * static_cast<double>(b + 1) + 0.1 * static_cast<double>(d);
    auto v = Tensor<double>::from_data({2, 16, 4}, vv);
    auto att = matmul_batched(softmax(scale(matmul_batched(q, k, true), 0.5), 2), v);
    for (int64_t b = 0; b < 2; ++b)
        for (int64_t t = 0; t < 16; ++t)
            for (int64_t d = 0; d < 4; ++d)
                CHECK(att.values()[static_cast<size_t>((b * 16 + t) * 4 + d)] ==
                      doctest::Approx(0.3 * static_cast<double>(b + 1) + 0.1 * static_cast<double>(d)).epsilon(1e-12));
}

TEST_CASE("attention rows sum to one and shift invariance holds in the mixer path") {
    RngState rng(7);
    auto q = random_tensor({3, 9, 2}, rng, 1.0, false);
    auto k = random_tensor({3, 9, 2}, rng, 1.0, false);
    auto scores = softmax(matmul_batched(q, k, true), 2);
    for (int64_t b = 0; b < 3; ++b)
        for (int64_t t = 0; t < 9; ++t) {
            double s = 0;
            for (int64_t j = 0; j < 9; ++j) s += scores.values()[static_cast<size_t>((b * 9 + t) * 9 + j)];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("mixer: gradient of sum(G) w.r.t. all mixer parameters (rel err < 1e-4)") {
    RngState rng(8);
    auto mix = ContextualMixer<double>::make(4, 8, true, 2, 4, rng);
    auto f = random_tensor({1, 4, 8, 8}, rng, 1.0, true);
    auto fc = random_tensor({1, 4, 8, 8}, rng, 1.0, true);
    ParamMap<double> pm;
    mix.params("m", pm);
    // fresh zero biases put the ReLU inputs within the FD step of the kink;
    // shift them so the probe stays on one side
    RngState brng(88);
    for (auto& [k, t] : pm.items)
        if (k.ends_with(".bias"))
            for (auto& v : t.values()) v = brng.uniform(0.05, 0.3) * (brng.uniform() < 0.5 ? -1.0 : 1.0);
    std::vector<Tensor<double>> all{f, fc};
    for (auto& [k, t] : pm.items) all.push_back(t);
    const double rel = fd_check(all, [&] {
        auto [g, gc] = mix(f, fc);
        return add(sum_all(g), mean_all(gc));
    }, 1e-5, 6);
    CHECK(rel < 1e-4);
}

TEST_CASE("block: zero prompts on both pathways make the block an identity") {
    RngState rng(9);
    auto blk = Block<double>::make(8, 8, 2, true, 2, 4, rng);
    auto h = random_tensor({2, 8, 8, 8}, rng, 1.0, false);
    auto hc = random_tensor({2, 8, 8, 8}, rng, 1.0, false);
    auto zero = Tensor<double>::zeros({8});
    auto [h2, hc2] = blk(h, hc, zero, zero);
    CHECK(max_abs_diff(h2.values(), h.values()) == 0.0);
    CHECK(max_abs_diff(hc2.values(), hc.values()) == 0.0);
}

TEST_CASE("block: shapes preserved through 8 consecutive blocks") {
    RngState rng(10);
    auto h = random_tensor({1, 8, 8, 8}, rng, 0.5, false);
    auto hc = random_tensor({1, 8, 8, 8}, rng, 0.5, false);
    auto p = random_tensor({8}, rng, 0.2, false);
    auto pc = random_tensor({8}, rng, 0.2, false);
    for (int i = 0; i < 8; ++i) {
        auto blk = Block<double>::make(8, 8, 2, i % 2 == 0, 2, 4, rng);
        auto [h2, hc2] = blk(h, hc, p, pc);
        h = h2;
        hc = hc2;
        REQUIRE(h.shape() == Shape{1, 8, 8, 8});
        REQUIRE(hc.shape() == Shape{1, 8, 8, 8});
    }
}

TEST_CASE("block: context pathway influences the source output when prompts are nonzero") {
    RngState rng(11);
    auto blk = Block<double>::make(8, 8, 2, false, 1, 4, rng);
    auto h = random_tensor({1, 8, 8, 8}, rng, 1.0, false);
    auto hc = random_tensor({1, 8, 8, 8}, rng, 1.0, false);
    auto hc_perturbed = Tensor<double>::from_data(hc.shape(), hc.values());
    hc_perturbed.values()[0] += 0.5;
    auto p = Tensor<double>::full({8}, 0.3);
    auto [a, ac] = blk(h, hc, p, p);
    auto [b, bc] = blk(h, hc_perturbed, p, p);
    double l2 = 0;
    for (size_t i = 0; i < a.values().size(); ++i) {
        const double d = a.values()[i] - b.values()[i];
        l2 += d * d;
    }
    CHECK(l2 > 0.0);
}

TEST_CASE("forward: output matches input size, bit-identical across calls") {
    RngState rng(12);
    auto cfg = tiny_config();
    auto model = ProctModel<double>::init_model(cfg, rng);
    auto x = random_tensor({1, 1, 16, 16}, rng, 0.3, false);
    auto ctx = random_tensor({1, 2, 16, 16}, rng, 0.3, false);
    auto v = svct_vector(6, cfg.n_full_views);
    auto y1 = model.forward(x, ctx, v);
    auto y2 = model.forward(x, ctx, v);
    CHECK(y1.shape() == Shape{1, 1, 16, 16});
    CHECK(max_abs_diff(y1.values(), y2.values()) == 0.0);

    auto bad = random_tensor({1, 2, 8, 8}, rng, 0.3, false);
    CHECK_THROWS(model.forward(x, bad, v));
}

TEST_CASE("forward: fresh model stays near the identity (residual head scale)") {
    RngState rng(0);
    auto cfg = tiny_config();
    auto model = ProctModel<double>::init_model(cfg, rng);
    auto x = random_tensor({1, 1, 16, 16}, rng, 0.3, false);
    auto ctx = random_tensor({1, 2, 16, 16}, rng, 0.3, false);
    auto y = model.forward(x, ctx, svct_vector(6, cfg.n_full_views));
    double num = 0, den = 0;
    for (size_t i = 0; i < x.values().size(); ++i) {
        const double d = y.values()[i] - x.values()[i];
        num += d * d;
        den += x.values()[i] * x.values()[i];
    }
    const double ratio = std::sqrt(num / den);
    MESSAGE("seed-0 fresh model |Y-X|/|X| = ", ratio);
    CHECK(std::isfinite(ratio));
    CHECK(ratio < 1.0); // dominated by the near-identity residual head
}

TEST_CASE("forward: zero prompts reduce the whole network to the identity") {
    RngState rng(13);
    auto cfg = tiny_config();
    auto model = ProctModel<double>::init_model(cfg, rng);
    auto zp = zero_prompts(cfg);
    for (int trial = 0; trial < 10; ++trial) {
        auto x = random_tensor({1, 1, 16, 16}, rng, 1.0, false);
        auto ctx = random_tensor({1, 2, 16, 16}, rng, 1.0, false);
        auto y = model.forward_with_prompts(x, ctx, zp, zp);
        REQUIRE(max_abs_diff(y.values(), x.values()) == 0.0);
    }
}

TEST_CASE("forward: context invariance when interaction weights touching the context are zero") {
    RngState rng(14);
    auto cfg = tiny_config();
    auto model = ProctModel<double>::init_model(cfg, rng);
    // zero every map that reads the context pathway into the source
    for (auto& stage : model.stages)
        for (auto& blk : stage) {
            std::fill(blk.mixer.to_vc.weight.values().begin(), blk.mixer.to_vc.weight.values().end(), 0.0);
            std::fill(blk.mixer.to_vc.bias.values().begin(), blk.mixer.to_vc.bias.values().end(), 0.0);
        }
    auto x = random_tensor({1, 1, 16, 16}, rng, 0.5, false);
    auto c1 = random_tensor({1, 2, 16, 16}, rng, 0.5, false);
    auto c2 = random_tensor({1, 2, 16, 16}, rng, 0.5, false);
    auto v = svct_vector(6, cfg.n_full_views);
    auto y1 = model.forward(x, c1, v);
    auto y2 = model.forward(x, c2, v);
    CHECK(max_abs_diff(y1.values(), y2.values()) == 0.0);
}

TEST_CASE("count_params: matches the independent arithmetic oracle") {
    RngState rng(15);
    auto cfg = tiny_config();
    auto model = ProctModel<double>::init_model(cfg, rng);
    CHECK(model.count_params() == expected_param_count(cfg));

    ModelConfig desk = ModelConfig::desk();
    RngState rng2(16);
    auto desk_model = ProctModel<float>::init_model(desk, rng2);
    CHECK(desk_model.count_params() == expected_param_count(desk));
}

TEST_CASE("count_params: seed independent, dense layers scale quadratically") {
    RngState r1(17), r2(18);
    auto cfg = tiny_config();
    auto m1 = ProctModel<double>::init_model(cfg, r1);
    auto m2 = ProctModel<double>::init_model(cfg, r2);
    CHECK(m1.count_params() == m2.count_params());

    ModelConfig big = cfg;
    for (auto& d : big.embed_dims) d *= 2;
    RngState r3(19);
    auto m3 = ProctModel<double>::init_model(big, r3);
    // compare conv weights only (the dense layers)
    auto dense_count = [](ProctModel<double>& m) {
        ParamMap<double> pm;
        m.params(pm);
        int64_t n = 0;
        for (auto& [k, t] : pm.items)
            if (t.ndim() >= 2 && k.find("freq.weight") == std::string::npos &&
                k.find("prompter") == std::string::npos)
                n += t.numel();
        return n;
    };
    const double ratio = static_cast<double>(dense_count(m3)) / static_cast<double>(dense_count(m1));
    CHECK(ratio > 3.0);
    CHECK(ratio < 4.5);
}

TEST_CASE("full desk model: gradient check on 16x16 inputs (rel err < 1e-3)") {
    RngState rng(20);
    auto cfg = tiny_config();
    auto model = ProctModel<double>::init_model(cfg, rng);
    auto x = random_tensor({1, 1, 16, 16}, rng, 0.3, false);
    auto ctx = random_tensor({1, 2, 16, 16}, rng, 0.3, false);
    auto v = svct_vector(6, cfg.n_full_views);
    ParamMap<double> pm;
    model.params(pm);
    std::vector<Tensor<double>> params;
    for (auto& [k, t] : pm.items) params.push_back(t);
    const double rel = fd_check(params, [&] {
        auto y = model.forward(x, ctx, v);
        return mean_all(mul(y, y));
    }, 1e-5, 2, 31);
    CHECK(rel < 1e-3);
}

TEST_CASE("paper config: count_params reported") {
    RngState rng(21);
    ModelConfig paper = ModelConfig::paper();
    paper.image_size = 256;
    auto n = expected_param_count(paper);
    MESSAGE("paper-config trainable scalars (arithmetic): ", n);
    CHECK(n > 0);
}
