#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ivct/ops.hpp"
#include "ivct/ops_attn.hpp"
#include "ivct/ops_conv.hpp"
#include "ivct/ops_fft.hpp"
#include "test_support.hpp"

using namespace ivct;
using namespace ivct::testing;

TEST_CASE("backward: sum of squares") {
    auto x = Tensor<double>::from_data({3}, {1, 2, 3}, true);
    auto loss = sum_all(mul(x, x));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
    CHECK(x.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("backward: sum of A*x gives column sums of A") {
    RngState rng(7);
    auto a = random_tensor({1, 5, 4}, rng, 1.0, false);
    auto x = Tensor<double>::randn({1, 4, 1}, rng, 1.0, true);
    auto loss = sum_all(matmul_batched(a, x));
    backward(loss);
    for (int64_t j = 0; j < 4; ++j) {
        double col = 0;
        for (int64_t i = 0; i < 5; ++i) col += a.values()[static_cast<size_t>(i * 4 + j)];
        CHECK(x.grad()[static_cast<size_t>(j)] == doctest::Approx(col).epsilon(1e-12));
    }
}

TEST_CASE("backward: untouched leaves read zero grad") {
    auto x = Tensor<double>::from_data({2}, {1, 2}, true);
    auto y = Tensor<double>::from_data({2}, {3, 4}, true);
    backward(sum_all(x));
    CHECK(y.grad()[0] == 0.0);
    CHECK(y.grad()[1] == 0.0);
}

TEST_CASE("non-finite forward output raises") {
    auto x = Tensor<double>::from_data({2}, {1.0, 0.0}, false);
    auto y = Tensor<double>::from_data({2}, {0.0, 0.0}, false);
    CHECK_THROWS(div_elem(x, y));
}

TEST_CASE("conv2d: 1x1 identity kernel preserves input") {
    RngState rng(1);
    auto x = random_tensor({2, 3, 5, 5}, rng, 1.0, false);
    auto k = Tensor<double>::zeros({3, 3, 1, 1});
    for (int64_t c = 0; c < 3; ++c) k.values()[static_cast<size_t>(c * 3 + c)] = 1.0;
    auto y = conv2d(x, k, Tensor<double>(), 1, 0, 1);
    CHECK(max_abs_diff(y.values(), x.values()) == 0.0);
}

TEST_CASE("conv2d: zero kernel gives zero output") {
    RngState rng(2);
    auto x = random_tensor({1, 2, 6, 6}, rng, 1.0, false);
    auto k = Tensor<double>::zeros({4, 2, 3, 3});
    auto y = conv2d(x, k, Tensor<double>(), 1, 1, 1);
    for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("conv2d: gradient matches finite differences (rel err < 1e-6)") {
    RngState rng(3);
    auto x = random_tensor({1, 1, 4, 4}, rng, 1.0, true);
    auto k = random_tensor({2, 1, 3, 3}, rng, 0.5, true);
    auto b = random_tensor({2}, rng, 0.1, true);
    const double rel = fd_check({x, k, b}, [&] { return mean_all(mul(conv2d(x, k, b, 1, 1, 1), conv2d(x, k, b, 1, 1, 1))); });
    CHECK(rel < 1e-6);
}

TEST_CASE("conv2d: grouped/depthwise and strided gradients") {
    RngState rng(4);
    auto x = random_tensor({2, 4, 6, 6}, rng, 1.0, true);
    auto kdw = random_tensor({4, 1, 3, 3}, rng, 0.5, true); // depthwise
    auto ks = random_tensor({3, 4, 3, 3}, rng, 0.5, true);  // stride 2
    const double rel1 = fd_check({x, kdw}, [&] { return mean_all(abs_t(conv2d(x, kdw, Tensor<double>(), 1, 1, 4))); });
    const double rel2 = fd_check({x, ks}, [&] { return mean_all(mul(conv2d(x, ks, Tensor<double>(), 2, 1, 1),
                                                                    conv2d(x, ks, Tensor<double>(), 2, 1, 1))); });
    CHECK(rel1 < 1e-4);
    CHECK(rel2 < 1e-4);
}

TEST_CASE("conv2d: shape mismatch raises") {
    auto x = Tensor<double>::zeros({1, 3, 4, 4});
    auto k = Tensor<double>::zeros({2, 4, 3, 3});
    CHECK_THROWS(conv2d(x, k, Tensor<double>(), 1, 1, 1));
}

TEST_CASE("conv_transpose2d: stride-2 upsample doubles extent, gradient ok") {
    RngState rng(5);
    auto x = random_tensor({1, 3, 5, 5}, rng, 1.0, true);
    auto k = random_tensor({3, 2, 2, 2}, rng, 0.5, true);
    auto b = random_tensor({2}, rng, 0.1, true);
    auto y = conv_transpose2d(x, k, b, 2);
    CHECK(y.shape() == Shape{1, 2, 10, 10});
    const double rel = fd_check({x, k, b}, [&] {
        auto out = conv_transpose2d(x, k, b, 2);
        return mean_all(mul(out, out));
    });
    CHECK(rel < 1e-5);
}

TEST_CASE("softmax: zeros give uniform distribution") {
    auto x = Tensor<double>::zeros({4});
    auto y = softmax(x, 0);
    for (double v : y.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("softmax: invariant to constant shifts") {
    RngState rng(6);
    auto x = random_tensor({2, 5}, rng, 2.0, false);
    auto y0 = softmax(x, 1);
    auto y1 = softmax(add_scalar(x, 13.5), 1);
    CHECK(max_abs_diff(y0.values(), y1.values()) < 1e-14);
}

TEST_CASE("softmax: rows sum to one, values in (0,1)") {
    RngState rng(61);
    auto x = random_tensor({3, 7}, rng, 3.0, false);
    auto y = softmax(x, 1);
    for (int64_t r = 0; r < 3; ++r) {
        double s = 0;
        for (int64_t c = 0; c < 7; ++c) {
            const double v = y.values()[static_cast<size_t>(r * 7 + c)];
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            s += v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("softmax: gradient matches finite differences (rel err < 1e-6)") {
    RngState rng(8);
    auto x = random_tensor({3, 6}, rng, 1.0, true);
    auto w = random_tensor({3, 6}, rng, 1.0, false);
    const double rel = fd_check({x}, [&] { return sum_all(mul(softmax(x, 1), w)); });
    CHECK(rel < 1e-6);
}

TEST_CASE("rescaled_layer_norm: constant input -> zero normalized, mean preserved") {
    auto x = Tensor<double>::full({2, 3, 4, 4}, 0.7);
    auto r = rescaled_layer_norm(x, Tensor<double>(), Tensor<double>());
    for (double v : r.normalized.values()) CHECK(std::fabs(v) < 1e-9);
    CHECK(r.mean.values()[0] == doctest::Approx(0.7));
    CHECK(r.mean.values()[1] == doctest::Approx(0.7));
}

TEST_CASE("rescaled_layer_norm: output has mean 0 and variance 1") {
    RngState rng(9);
    auto x = random_tensor({2, 4, 8, 8}, rng, 2.0, false);
    auto r = rescaled_layer_norm(x, Tensor<double>(), Tensor<double>());
    const int64_t inner = x.numel() / 2;
    for (int64_t s = 0; s < 2; ++s) {
        double m = 0, v = 0;
        for (int64_t i = 0; i < inner; ++i) m += r.normalized.values()[static_cast<size_t>(s * inner + i)];
        m /= static_cast<double>(inner);
        for (int64_t i = 0; i < inner; ++i) {
            const double d = r.normalized.values()[static_cast<size_t>(s * inner + i)] - m;
            v += d * d;
        }
        v /= static_cast<double>(inner);
        CHECK(std::fabs(m) < 1e-5);
        CHECK(std::fabs(v - 1.0) < 1e-5);
    }
}

TEST_CASE("rescaled_layer_norm: gradient through all outputs (rel err < 1e-5)") {
    RngState rng(10);
    auto x = random_tensor({2, 3, 4, 4}, rng, 1.0, true);
    auto gamma = random_tensor({3}, rng, 0.5, true);
    auto beta = random_tensor({3}, rng, 0.5, true);
    auto wm = random_tensor({2}, rng, 1.0, false);
    const double rel = fd_check({x, gamma, beta}, [&] {
        auto r = rescaled_layer_norm(x, gamma, beta);
        // touch normalized, mean and std so all three outputs carry gradient
        return add(add(mean_all(mul(r.normalized, r.normalized)), sum_all(mul(r.mean, wm))),
                   sum_all(mul(r.stddev, wm)));
    });
    CHECK(rel < 1e-5);
}

TEST_CASE("rescaled_layer_norm: zero-variance input safe") {
    auto x = Tensor<double>::full({1, 2, 2, 2}, 3.0, true);
    auto r = rescaled_layer_norm(x, Tensor<double>(), Tensor<double>());
    backward(mean_all(r.normalized));
    for (double g : x.grad()) CHECK(std::isfinite(g));
}

TEST_CASE("window ops: 16x16 win 8 -> 4 windows, exact roundtrip") {
    RngState rng(11);
    auto x = random_tensor({1, 2, 16, 16}, rng, 1.0, false);
    auto w = window_partition(x, 8);
    CHECK(w.shape() == Shape{4, 2, 8, 8});
    auto back = window_merge(w, 8, 1, 2, 16, 16);
    CHECK(max_abs_diff(back.values(), x.values()) == 0.0);
}

TEST_CASE("window ops: 12x12 win 8 pads to 16 and crops back exactly") {
    RngState rng(12);
    auto x = random_tensor({2, 3, 12, 12}, rng, 1.0, false);
    auto w = window_partition(x, 8);
    CHECK(w.shape() == Shape{8, 3, 8, 8});
    auto back = window_merge(w, 8, 2, 3, 12, 12);
    CHECK(max_abs_diff(back.values(), x.values()) == 0.0);
}

TEST_CASE("window ops: win 1 roundtrip is identity") {
    RngState rng(13);
    auto x = random_tensor({1, 1, 3, 5}, rng, 1.0, false);
    auto back = window_merge(window_partition(x, 1), 1, 1, 1, 3, 5);
    CHECK(max_abs_diff(back.values(), x.values()) == 0.0);
}

TEST_CASE("window ops: roundtrip identity property across sizes") {
    RngState rng(14);
    for (int64_t h : {4, 5, 7, 12}) {
        for (int64_t w : {4, 6, 9}) {
            for (int64_t win : {1, 2, 3, 5, 8}) {
                if (win > 2 * std::min(h, w)) continue;
                auto x = random_tensor({1, 2, h, w}, rng, 1.0, false);
                auto back = window_merge(window_partition(x, win), win, 1, 2, h, w);
                CHECK(max_abs_diff(back.values(), x.values()) == 0.0);
            }
        }
    }
}

TEST_CASE("window ops: win over 2*min(H,W) rejected") {
    auto x = Tensor<double>::zeros({1, 1, 4, 4});
    CHECK_THROWS(window_partition(x, 9));
    CHECK_NOTHROW(window_partition(x, 8));
}

TEST_CASE("fft2/ifft2: roundtrip within 1e-10") {
    RngState rng(15);
    auto x = random_tensor({2, 6, 8, 2}, rng, 1.0, false);
    auto back = ifft2(fft2(x));
    CHECK(max_abs_diff(back.values(), x.values()) < 1e-10);
}

TEST_CASE("fft2: constant image concentrates energy in the DC bin") {
    auto x = Tensor<double>::full({1, 8, 8}, 0.5);
    auto f = fft2(make_complex(x));
    const auto& v = f.values();
    CHECK(v[0] == doctest::Approx(0.5 * 64).epsilon(1e-12));
    double off_dc = 0;
    for (size_t i = 2; i < v.size(); ++i) off_dc = std::max(off_dc, std::fabs(v[i]));
    CHECK(off_dc < 1e-10);
}

TEST_CASE("fft2: Parseval identity within 1e-8") {
    RngState rng(16);
    auto x = random_tensor({1, 12, 10}, rng, 1.0, false);
    auto f = fft2(make_complex(x));
    double sx = 0, sf = 0;
    for (double v : x.values()) sx += v * v;
    for (double v : f.values()) sf += v * v;
    CHECK(sx == doctest::Approx(sf / (12.0 * 10.0)).epsilon(1e-8));
}

TEST_CASE("fft2/ifft2: differentiable through real and imaginary parts") {
    RngState rng(17);
    auto x = random_tensor({1, 2, 4, 6, 2}, rng, 1.0, true);
    auto w = random_tensor({1, 2, 4, 6, 2}, rng, 1.0, false);
    const double rel_f = fd_check({x}, [&] { return sum_all(mul(fft2(x), w)); });
    const double rel_i = fd_check({x}, [&] { return sum_all(mul(ifft2(x), w)); });
    CHECK(rel_f < 1e-7);
    CHECK(rel_i < 1e-7);
}

TEST_CASE("rfft2/irfft2: real roundtrip and spectral filter gradient") {
    RngState rng(18);
    auto x = random_tensor({2, 3, 6, 8}, rng, 1.0, true);
    auto back = irfft2(rfft2(x), 8);
    CHECK(max_abs_diff(back.values(), x.values()) < 1e-10);

    auto wspec = random_tensor({3, 6, 5, 2}, rng, 0.7, true);
    const double rel = fd_check({x, wspec}, [&] {
        auto y = irfft2(complex_mul_bcast(rfft2(x), wspec), 8);
        return mean_all(mul(y, y));
    });
    CHECK(rel < 1e-5);
}

TEST_CASE("elementwise and broadcast ops: randomized finite-difference sweep") {
    // every differentiable op, 20 seeds, 64-bit, rel err < 1e-4
    for (uint64_t seed = 0; seed < 20; ++seed) {
        RngState rng(seed);
        auto a = random_tensor({2, 3, 4, 4}, rng, 1.0, true, 0.05);
        auto b = random_tensor({2, 3, 4, 4}, rng, 1.0, true, 0.05);
        auto c = random_tensor({3}, rng, 0.8, true, 0.05);
        auto nc = random_tensor({2, 3}, rng, 0.8, true, 0.05);
        auto ps = random_tensor({2}, rng, 0.5, true, 0.3);

        const double rel = fd_check({a, b, c, nc, ps}, [&] {
            auto t = add(mul(a, b), sub(a, div_elem(b, add_scalar(abs_t(a), 1.0))));
            t = mul_channel(t, c);
            t = add_channel(t, nc);
            t = relu(t);
            t = sub_per_sample(t, ps);
            t = div_per_sample(t, add_scalar(mul(ps, ps), 0.5));
            t = concat_channels(t, scale(t, 0.5));
            t = slice_channels(t, 1, 4);
            auto p = pow_floor(add_scalar(abs_t(t), 0.2), 0.7, 1e-6);
            return add(mean_all(p), mean_all(sqrt_eps(mul(t, t), 1e-6)));
        });
        CAPTURE(seed);
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("structured ops: randomized finite-difference sweep") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        RngState rng(seed + 100);
        auto x = random_tensor({1, 2, 6, 6}, rng, 1.0, true);
        auto k = random_tensor({2, 2, 3, 3}, rng, 0.5, true);
        auto kt = random_tensor({2, 3, 2, 2}, rng, 0.5, true);
        auto q = random_tensor({2, 4, 3}, rng, 1.0, true);
        auto v = random_tensor({2, 4, 3}, rng, 1.0, true);

        const double rel = fd_check({x, k, kt, q, v}, [&] {
            auto t = conv2d_padded(x, k, Tensor<double>(), 1, 1, PadMode::reflect, 1);
            t = avg_pool2x2(t);
            t = conv_transpose2d(t, kt, Tensor<double>(), 2);
            t = pad2d(t, 1, 1, 1, 1, PadMode::symmetric);
            auto w = window_partition(t, 4);
            t = window_merge(w, 4, 1, 3, 8, 8);
            auto scores = softmax(scale(matmul_batched(q, q, true), 0.5), 2);
            auto att = matmul_batched(scores, v);
            return add(mean_all(mul(t, t)), mean_all(mul(att, att)));
        }, 1e-5, 32);
        CAPTURE(seed);
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("composite graph: conv -> norm -> softmax -> sum gradient (rel err < 1e-4)") {
    RngState rng(42);
    auto x = random_tensor({1, 1, 6, 6}, rng, 1.0, true);
    auto k = random_tensor({2, 1, 3, 3}, rng, 0.5, true);
    auto gamma = random_tensor({2}, rng, 0.3, true);
    auto beta = random_tensor({2}, rng, 0.3, true);
    auto w = random_tensor({1, 2, 6, 6}, rng, 1.0, false);
    const double rel = fd_check({x, k, gamma, beta}, [&] {
        auto t = conv2d(x, k, Tensor<double>(), 1, 1, 1);
        auto r = rescaled_layer_norm(t, gamma, beta);
        auto s = softmax(reshape(r.normalized, {1, 2 * 36}), 1);
        return sum_all(mul(reshape(s, {1, 2, 6, 6}), w));
    });
    CHECK(rel < 1e-4);
}

TEST_CASE("determinism: identical seeds give identical draws and op outputs") {
    RngState r1(77), r2(77);
    for (int i = 0; i < 100; ++i) CHECK(r1.next_u64() == r2.next_u64());
    RngState ra(5), rb(5);
    auto t1 = Tensor<double>::randn({64}, ra);
    auto t2 = Tensor<double>::randn({64}, rb);
    CHECK(max_abs_diff(t1.values(), t2.values()) == 0.0);
    auto y1 = softmax(t1, 0), y2 = softmax(t2, 0);
    CHECK(max_abs_diff(y1.values(), y2.values()) == 0.0);
}

TEST_CASE("linear: gradient and bias handling") {
    RngState rng(19);
    auto x = random_tensor({3, 5}, rng, 1.0, true);
    auto w = random_tensor({4, 5}, rng, 0.5, true);
    auto b = random_tensor({4}, rng, 0.2, true);
    const double rel = fd_check({x, w, b}, [&] {
        auto y = linear(x, w, b);
        return mean_all(mul(y, y));
    });
    CHECK(rel < 1e-6);
}

TEST_CASE("heads layout: roundtrip through token form") {
    RngState rng(20);
    auto x = random_tensor({3, 6, 4, 4}, rng, 1.0, false);
    auto tok = heads_to_tokens(x, 2);
    CHECK(tok.shape() == Shape{6, 16, 3});
    auto back = tokens_to_heads(tok, 2, 4);
    CHECK(max_abs_diff(back.values(), x.values()) == 0.0);
}
