#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ivct/eval.hpp"
#include "ivct/metrics.hpp"
#include "test_support.hpp"

using namespace ivct;
using ivct::testing::random_tensor;

namespace {

// second formula path: direct non-separable implementation
double psnr_direct(const std::vector<double>& a, const std::vector<double>& b) {
    double sum_sq = 0;
    for (size_t i = 0; i < a.size(); ++i) sum_sq += (a[i] - b[i]) * (a[i] - b[i]);
    const double mse = sum_sq / static_cast<double>(a.size());
    return mse <= 0 ? 99.0 : std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

double ssim_direct(const std::vector<double>& a, const std::vector<double>& b, int64_t h, int64_t w) {
    std::vector<double> g(11);
    double gsum = 0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5.0;
        g[static_cast<size_t>(i)] = std::exp(-d * d / 4.5);
        gsum += g[static_cast<size_t>(i)];
    }
    for (auto& v : g) v /= gsum;
    const double c1 = 1e-4, c2 = 9e-4;
    double acc = 0;
    int64_t cnt = 0;
    for (int64_t r = 0; r + 11 <= h; ++r)
        for (int64_t c = 0; c + 11 <= w; ++c) {
            double mu1 = 0, mu2 = 0, m11 = 0, m22 = 0, m12 = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double wgt = g[static_cast<size_t>(i)] * g[static_cast<size_t>(j)];
                    const double x = a[static_cast<size_t>((r + i) * w + c + j)];
                    const double y = b[static_cast<size_t>((r + i) * w + c + j)];
                    mu1 += wgt * x;
                    mu2 += wgt * y;
                    m11 += wgt * x * x;
                    m22 += wgt * y * y;
                    m12 += wgt * x * y;
                }
            const double s1 = m11 - mu1 * mu1, s2 = m22 - mu2 * mu2, s12 = m12 - mu1 * mu2;
            acc += ((2 * mu1 * mu2 + c1) * (2 * s12 + c2)) / ((mu1 * mu1 + mu2 * mu2 + c1) * (s1 + s2 + c2));
            ++cnt;
        }
    return acc / static_cast<double>(cnt);
}

} // namespace

TEST_CASE("psnr: identical images hit the 99 dB cap") {
    std::vector<double> x{0.1, 0.5, 0.9};
    CHECK(psnr(x, x) == 99.0);
}

TEST_CASE("psnr: MSE 0.01 with unit range gives 20 dB") {
    std::vector<double> a(100, 0.0), b(100, 0.1);
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("psnr: symmetric in its arguments") {
    RngState rng(1);
    auto a = Tensor<double>::randn({64}, rng);
    auto b = Tensor<double>::randn({64}, rng);
    CHECK(psnr(a.values(), b.values()) == psnr(b.values(), a.values()));
}

TEST_CASE("ssim: identity and contrast inversion") {
    RngState rng(2);
    auto t = random_tensor({32, 32}, rng, 0.2, false);
    for (auto& v : t.values()) v = std::clamp(v + 0.5, 0.0, 1.0);
    CHECK(ssim(t.values(), t.values(), 32, 32) == doctest::Approx(1.0).epsilon(1e-6));

    std::vector<double> inv(t.values());
    for (auto& v : inv) v = 1.0 - v;
    CHECK(ssim(t.values(), inv, 32, 32) < ssim(t.values(), t.values(), 32, 32));
    CHECK_THROWS(ssim(t.values(), t.values(), 8, 8));
}

TEST_CASE("ssim: additive noise lowers the score") {
    RngState rng(0);
    auto t = random_tensor({48, 48}, rng, 0.2, false);
    for (auto& v : t.values()) v = std::clamp(v + 0.5, 0.0, 1.0);
    std::vector<double> noisy(t.values());
    RngState nr(0);
    for (auto& v : noisy) v = std::clamp(v + 0.05 * nr.normal(), 0.0, 1.0);
    CHECK(ssim(t.values(), noisy, 48, 48) < 1.0);
    CHECK(ssim(t.values(), noisy, 48, 48) < ssim(t.values(), t.values(), 48, 48));
}

TEST_CASE("psnr/ssim agree with the independent reimplementation within 1e-9") {
    RngState rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        auto a = random_tensor({24, 24}, rng, 0.2, false);
        auto b = random_tensor({24, 24}, rng, 0.2, false);
        for (auto& v : a.values()) v = std::clamp(v + 0.5, 0.0, 1.0);
        for (auto& v : b.values()) v = std::clamp(v + 0.5, 0.0, 1.0);
        CHECK(psnr(a.values(), b.values()) == doctest::Approx(psnr_direct(a.values(), b.values())).epsilon(1e-12));
        CHECK(ssim(a.values(), b.values(), 24, 24) ==
              doctest::Approx(ssim_direct(a.values(), b.values(), 24, 24)).epsilon(1e-9));
    }
}

TEST_CASE("eval report: CSV roundtrip preserves rows and metadata") {
    eval::EvalReport rep;
    rep.metadata["seed"] = "0";
    rep.metadata["geometry"] = "24x24@16";
    auto& r1 = rep.row("svct", 18, "fbp");
    r1.psnr_sum = 2 * 21.5;
    r1.ssim_sum = 2 * 0.35;
    r1.count = 2;
    auto& r2 = rep.row("lact", 120, "proct");
    r2.psnr_sum = 33.25;
    r2.ssim_sum = 0.91;
    r2.count = 1;

    const auto csv = rep.to_csv();
    const auto back = eval::EvalReport::from_csv(csv);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.metadata.at("seed") == "0");
    CHECK(back.rows[0].scenario == "svct");
    CHECK(back.rows[0].psnr_mean() == doctest::Approx(21.5).epsilon(1e-6));
    CHECK(back.rows[1].ssim_mean() == doctest::Approx(0.91).epsilon(1e-6));
    CHECK(back.to_csv() == csv);
}

TEST_CASE("evaluate: deterministic per seed, FBP row monotone in views, means match per-image CSV") {
    ScanGeometry g;
    g.image_size = 32;
    g.n_full_views = 96;
    g.n_detectors = 48;
    g.pixel_spacing = 4.0;
    g = make_geometry(g);
    RngState prng(4);
    std::vector<Image<float>> images;
    for (int i = 0; i < 2; ++i) images.push_back(make_phantom<float>(PhantomKind::random_ellipses, 32, 4.0, prng));
    const auto ctx = make_phantom<float>(PhantomKind::shepp_logan, 32, 4.0, prng);
    NoiseModel nm;
    std::vector<SettingSpec> settings{{1, 12}, {1, 24}, {1, 48}, {1, 96}};
    eval::EvalOptions opt;
    opt.seed = 5;

    std::string per_image_1, per_image_2;
    const auto rep1 = eval::evaluate(nullptr, nullptr, images, settings, g, nm, ctx, opt, &per_image_1);
    const auto rep2 = eval::evaluate(nullptr, nullptr, images, settings, g, nm, ctx, opt, &per_image_2);
    CHECK(rep1.to_csv() == rep2.to_csv());
    CHECK(per_image_1 == per_image_2);

    double prev = -1;
    for (const auto& t : settings) {
        double mean = 0;
        for (const auto& r : rep1.rows)
            if (r.scenario == "svct" && r.setting == t.value && r.method == "fbp") mean = r.psnr_mean();
        CHECK(mean > prev);
        prev = mean;
    }

    // per-image rows reaggregate to the report means
    std::stringstream ss(per_image_1);
    std::string line;
    std::getline(ss, line);
    std::map<std::string, std::pair<double, int>> agg;
    while (std::getline(ss, line)) {
        std::stringstream ls(line);
        std::string scen, setting, method, image, p, s;
        std::getline(ls, scen, ',');
        std::getline(ls, setting, ',');
        std::getline(ls, method, ',');
        std::getline(ls, image, ',');
        std::getline(ls, p, ',');
        std::getline(ls, s, ',');
        auto& e = agg[scen + "|" + setting + "|" + method];
        e.first += std::stod(p);
        e.second += 1;
    }
    for (const auto& r : rep1.rows) {
        std::ostringstream key;
        key << r.scenario << "|" << r.setting << "|" << r.method;
        const auto& e = agg.at(key.str());
        CHECK(r.count == e.second);
        CHECK(r.psnr_mean() == doctest::Approx(e.first / e.second).epsilon(1e-6));
    }

    CHECK_THROWS(eval::evaluate(nullptr, nullptr, {}, settings, g, nm, ctx, opt));
    CHECK_THROWS(eval::evaluate(nullptr, nullptr, images, {}, g, nm, ctx, opt));
}
