#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ivct/physics.hpp"
#include "ivct/sampling.hpp"
#include "test_support.hpp"

using namespace ivct;

namespace {

ScanGeometry tiny_geometry(int64_t size = 16, int64_t views = 32, int64_t dets = 24) {
    ScanGeometry g;
    g.image_size = size;
    g.n_full_views = views;
    g.n_detectors = dets;
    g.pixel_spacing = 1.0;
    return make_geometry(g);
}

double psnr_vs(const std::vector<double>& a, const std::vector<double>& b) {
    double mse = 0;
    for (size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    mse /= static_cast<double>(a.size());
    return 10.0 * std::log10(1.0 / mse);
}

// dense system matrix: one forward projection per unit-pixel basis image
std::vector<std::vector<double>> dense_matrix(const ScanGeometry& g) {
    const int64_t npix = g.image_size * g.image_size;
    const auto views = all_views(g);
    std::vector<std::vector<double>> cols;
    cols.reserve(static_cast<size_t>(npix));
    for (int64_t p = 0; p < npix; ++p) {
        Image<double> e;
        std::vector<double> data(static_cast<size_t>(npix), 0.0);
        data[static_cast<size_t>(p)] = 1.0;
        e.data = Tensor<double>::from_data({g.image_size, g.image_size}, std::move(data));
        e.pixel_spacing = g.pixel_spacing;
        cols.push_back(forward_project(e, g, views).data.values());
    }
    return cols;
}

} // namespace

TEST_CASE("make_geometry: paper defaults") {
    const auto g = make_geometry(ScanGeometry{});
    CHECK(g.n_full_views == 720);
    CHECK(g.n_detectors == 672);
    CHECK(g.dist_source_center == 1075.0);
    CHECK(g.dist_detector_center == 1075.0);
    CHECK(g.view_angles.size() == 720);
    // 720 views over 360 degrees -> 0.5 degree steps
    CHECK(g.view_angles[1] - g.view_angles[0] == doctest::Approx(0.5 * M_PI / 180.0).epsilon(1e-12));
    CHECK(g.fov_radius() >= 0.5 * std::sqrt(2.0) * 256.0);
}

TEST_CASE("make_geometry: too-small detector pitch rejected") {
    ScanGeometry g;
    g.image_size = 256;
    g.pixel_spacing = 1.0;
    g.detector_pitch = 0.05; // fan covers far less than the diagonal
    CHECK_THROWS(make_geometry(g));
    g.detector_pitch = 0;
    g.n_detectors = 0;
    CHECK_THROWS(make_geometry(g));
}

TEST_CASE("forward_project: zero image gives zero sinogram") {
    const auto g = tiny_geometry();
    Image<double> img;
    img.data = Tensor<double>::zeros({g.image_size, g.image_size});
    img.pixel_spacing = g.pixel_spacing;
    const auto s = forward_project(img, g, all_views(g));
    for (double v : s.data.values()) CHECK(v == 0.0);
}

TEST_CASE("forward_project: linear in the image") {
    const auto g = tiny_geometry();
    RngState rng(1);
    auto a = Tensor<double>::randn({g.image_size, g.image_size}, rng);
    auto b = Tensor<double>::randn({g.image_size, g.image_size}, rng);
    Image<double> ia{a, 1.0}, ib{b, 1.0};
    Image<double> iab{Tensor<double>::from_data(a.shape(), a.values()), 1.0};
    for (size_t i = 0; i < iab.data.values().size(); ++i) iab.data.values()[i] += b.values()[i];
    const auto views = all_views(g);
    const auto sa = forward_project(ia, g, views).data.values();
    const auto sb = forward_project(ib, g, views).data.values();
    const auto sab = forward_project(iab, g, views).data.values();
    double worst = 0;
    for (size_t i = 0; i < sab.size(); ++i) worst = std::max(worst, std::fabs(sab[i] - sa[i] - sb[i]));
    CHECK(worst < 1e-6);
}

TEST_CASE("forward_project: central ray through a uniform disk matches chord length") {
    ScanGeometry g;
    g.image_size = 128;
    g.n_full_views = 8;
    g.n_detectors = 129;
    g.pixel_spacing = 1.0;
    g = make_geometry(g);
    const double radius = 40.0, value = 0.5;
    std::vector<double> data(static_cast<size_t>(128 * 128), 0.0);
    for (int64_t r = 0; r < 128; ++r)
        for (int64_t c = 0; c < 128; ++c) {
            const double y = 64.0 - (static_cast<double>(r) + 0.5);
            const double x = (static_cast<double>(c) + 0.5) - 64.0;
            if (x * x + y * y <= radius * radius) data[static_cast<size_t>(r * 128 + c)] = value;
        }
    Image<double> disk{Tensor<double>::from_data({128, 128}, std::move(data)), 1.0};
    const auto s = forward_project(disk, g, {0});
    // central detector: line integral = 2 * radius * value * attenuation_scale
    const double central = s.data.values()[static_cast<size_t>(g.n_detectors / 2)];
    const double expect = 2.0 * radius * value * g.attenuation_scale;
    CHECK(std::fabs(central - expect) / expect < 0.02);
}

TEST_CASE("back_project: zero sinogram gives zero image") {
    const auto g = tiny_geometry();
    Sinogram<double> s;
    s.data = Tensor<double>::zeros({g.n_full_views, g.n_detectors});
    s.view_indices = all_views(g);
    const auto img = back_project(s, g);
    for (double v : img.data.values()) CHECK(v == 0.0);
}

TEST_CASE("projector adjointness: dot-product identity on 16x16, 32 views") {
    const auto g = tiny_geometry(16, 32, 24);
    for (uint64_t seed = 0; seed < 5; ++seed) {
        RngState rng(seed);
        Image<double> x{Tensor<double>::randn({16, 16}, rng), 1.0};
        Sinogram<double> y;
        y.data = Tensor<double>::randn({32, 24}, rng);
        y.view_indices = all_views(g);
        const auto ax = forward_project(x, g, y.view_indices);
        const auto aty = back_project(y, g, /*scale_by_dbeta=*/false);
        double lhs = 0, rhs = 0;
        for (size_t i = 0; i < ax.data.values().size(); ++i) lhs += ax.data.values()[i] * y.data.values()[i];
        for (size_t i = 0; i < aty.data.values().size(); ++i) rhs += aty.data.values()[i] * x.data.values()[i];
        CAPTURE(seed);
        CHECK(std::fabs(lhs - rhs) / std::fabs(lhs) < 1e-4);
    }
}

TEST_CASE("back_project: single bin smears along the dense-matrix column") {
    const auto g = tiny_geometry(8, 6, 10);
    const auto cols = dense_matrix(g);
    Sinogram<double> y;
    y.data = Tensor<double>::zeros({g.n_full_views, g.n_detectors});
    const int64_t bin = 3 * g.n_detectors + 5;
    y.data.values()[static_cast<size_t>(bin)] = 1.0;
    y.view_indices = all_views(g);
    const auto img = back_project(y, g, false);
    // row `bin` of A = value of each column at that bin
    for (int64_t p = 0; p < g.image_size * g.image_size; ++p) {
        CHECK(img.data.values()[static_cast<size_t>(p)] ==
              doctest::Approx(cols[static_cast<size_t>(p)][static_cast<size_t>(bin)]).epsilon(1e-10));
    }
}

TEST_CASE("adjointness holds across grid/view-count combinations") {
    for (auto [size, views, dets] : {std::tuple<int64_t, int64_t, int64_t>{8, 16, 12},
                                     {16, 32, 24},
                                     {12, 9, 30}}) {
        const auto g = tiny_geometry(size, views, dets);
        RngState rng(7);
        Image<double> x{Tensor<double>::randn({size, size}, rng), 1.0};
        Sinogram<double> y;
        y.data = Tensor<double>::randn({views, dets}, rng);
        y.view_indices = all_views(g);
        const auto ax = forward_project(x, g, y.view_indices);
        const auto aty = back_project(y, g, false);
        double lhs = 0, rhs = 0;
        for (size_t i = 0; i < ax.data.values().size(); ++i) lhs += ax.data.values()[i] * y.data.values()[i];
        for (size_t i = 0; i < aty.data.values().size(); ++i) rhs += aty.data.values()[i] * x.data.values()[i];
        CHECK(std::fabs(lhs - rhs) / std::fabs(lhs) < 1e-4);
    }
}

TEST_CASE("fbp: zero sinogram reconstructs to zero") {
    const auto g = tiny_geometry();
    Sinogram<double> s;
    s.data = Tensor<double>::zeros({g.n_full_views, g.n_detectors});
    s.view_indices = all_views(g);
    const auto img = fbp(s, g);
    for (double v : img.data.values()) CHECK(v == 0.0);
}

TEST_CASE("fbp: uniform disk amplitude is recovered") {
    ScanGeometry g;
    g.image_size = 64;
    g.n_full_views = 180;
    g.n_detectors = 96;
    g.pixel_spacing = 2.0;
    g = make_geometry(g);
    const double radius = 20.0, value = 0.6; // radius in pixels
    std::vector<double> data(static_cast<size_t>(64 * 64), 0.0);
    for (int64_t r = 0; r < 64; ++r)
        for (int64_t c = 0; c < 64; ++c) {
            const double y = 32.0 - (static_cast<double>(r) + 0.5);
            const double x = (static_cast<double>(c) + 0.5) - 32.0;
            if (x * x + y * y <= radius * radius) data[static_cast<size_t>(r * 64 + c)] = value;
        }
    Image<double> disk{Tensor<double>::from_data({64, 64}, std::move(data)), g.pixel_spacing};
    const auto s = forward_project(disk, g, all_views(g));
    const auto rec = fbp(s, g);
    // mean over the disk interior (2-pixel margin)
    double mean = 0;
    int64_t count = 0;
    for (int64_t r = 0; r < 64; ++r)
        for (int64_t c = 0; c < 64; ++c) {
            const double y = 32.0 - (static_cast<double>(r) + 0.5);
            const double x = (static_cast<double>(c) + 0.5) - 32.0;
            if (x * x + y * y <= (radius - 2) * (radius - 2)) {
                mean += rec.data.values()[static_cast<size_t>(r * 64 + c)];
                ++count;
            }
        }
    mean /= static_cast<double>(count);
    CHECK(std::fabs(mean - value) / value < 0.05);
}

TEST_CASE("fbp: Shepp-Logan PSNR strictly increases with view count") {
    ScanGeometry g;
    g.image_size = 128;
    g.n_full_views = 720;
    g.n_detectors = 672;
    g.pixel_spacing = 2.0;
    g = make_geometry(g);
    RngState rng(0);
    const auto phantom = make_phantom<double>(PhantomKind::shepp_logan, 128, g.pixel_spacing, rng);
    const auto full = forward_project(phantom, g, all_views(g));

    double prev = -1e9;
    for (int64_t nv : {18, 36, 72, 144, 720}) {
        const auto v = svct_vector(nv, 720);
        const auto sub = reduce_sinogram(full, v);
        const auto rec = fbp(sub, g);
        const double p = psnr_vs(rec.data.values(), phantom.data.values());
        CAPTURE(nv);
        CHECK(p > prev);
        prev = p;
    }
}

TEST_CASE("fbp: noise lowers reconstruction quality") {
    ScanGeometry g;
    g.image_size = 64;
    g.n_full_views = 120;
    g.n_detectors = 96;
    g.pixel_spacing = 2.0;
    g = make_geometry(g);
    RngState rng(0);
    const auto phantom = make_phantom<double>(PhantomKind::shepp_logan, 64, g.pixel_spacing, rng);
    const auto clean = forward_project(phantom, g, all_views(g));
    NoiseModel nm;
    RngState noise_rng(0);
    const auto noisy = add_noise(clean, nm, noise_rng);
    const double p_clean = psnr_vs(fbp(clean, g).data.values(), phantom.data.values());
    const double p_noisy = psnr_vs(fbp(noisy, g).data.values(), phantom.data.values());
    CHECK(p_noisy <= p_clean);
}

TEST_CASE("add_noise: disabled model is the identity") {
    const auto g = tiny_geometry();
    RngState rng(3);
    Sinogram<double> s;
    s.data = Tensor<double>::randn({g.n_full_views, g.n_detectors}, rng, 0.3);
    for (auto& v : s.data.values()) v = std::fabs(v);
    s.view_indices = all_views(g);
    NoiseModel nm;
    nm.enabled = false;
    RngState nr(1);
    const auto out = add_noise(s, nm, nr);
    CHECK(ivct::testing::max_abs_diff(out.data.values(), s.data.values()) == 0.0);
}

TEST_CASE("add_noise: fixed rng state reproduces bit-identical sinograms") {
    const auto g = tiny_geometry();
    RngState rng(4);
    Sinogram<double> s;
    s.data = Tensor<double>::randn({g.n_full_views, g.n_detectors}, rng, 0.3);
    for (auto& v : s.data.values()) v = std::fabs(v);
    s.view_indices = all_views(g);
    NoiseModel nm;
    RngState r1(9), r2(9);
    const auto o1 = add_noise(s, nm, r1);
    const auto o2 = add_noise(s, nm, r2);
    CHECK(ivct::testing::max_abs_diff(o1.data.values(), o2.data.values()) == 0.0);
    CHECK(o1.data.shape() == s.data.shape());
}

TEST_CASE("add_noise: Monte Carlo mean consistent with the clean value") {
    // one bin, 10,000 draws; mean within 3 standard errors
    Sinogram<double> s;
    s.data = Tensor<double>::from_data({1, 1}, {0.8});
    s.view_indices = {0};
    NoiseModel nm; // I0 = 1e6, sigma = 0.01
    RngState rng(123);
    const int n = 10000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        const double v = add_noise(s, nm, rng).data.values()[0];
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    const double se = std::sqrt(var / n);
    CHECK(std::fabs(mean - 0.8) < 3.0 * se);
}

TEST_CASE("make_phantom: Shepp-Logan deterministic, values in [0,1]") {
    RngState r1(0), r2(99);
    const auto p1 = make_phantom<double>(PhantomKind::shepp_logan, 128, 1.0, r1);
    const auto p2 = make_phantom<double>(PhantomKind::shepp_logan, 128, 1.0, r2);
    CHECK(ivct::testing::max_abs_diff(p1.data.values(), p2.data.values()) == 0.0);
    double lo = 1e9, hi = -1e9;
    for (double v : p1.data.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(hi > 0.5);
}

TEST_CASE("make_phantom: random ellipses reproducible per seed, distinct across seeds") {
    RngState a1(5), a2(5), b(6);
    const auto pa1 = make_phantom<double>(PhantomKind::random_ellipses, 64, 1.0, a1);
    const auto pa2 = make_phantom<double>(PhantomKind::random_ellipses, 64, 1.0, a2);
    const auto pb = make_phantom<double>(PhantomKind::random_ellipses, 64, 1.0, b);
    CHECK(ivct::testing::max_abs_diff(pa1.data.values(), pa2.data.values()) == 0.0);
    double l2 = 0;
    for (size_t i = 0; i < pb.data.values().size(); ++i) {
        const double d = pa1.data.values()[i] - pb.data.values()[i];
        l2 += d * d;
    }
    CHECK(l2 > 0.0);
    CHECK_THROWS(make_phantom<double>(PhantomKind::shepp_logan, 8, 1.0, a1));
}

TEST_CASE("fbp: error decreases monotonically as view count doubles 45 -> 720") {
    ScanGeometry g;
    g.image_size = 128;
    g.n_full_views = 720;
    g.n_detectors = 672;
    g.pixel_spacing = 2.0;
    g = make_geometry(g);
    RngState rng(0);
    const auto phantom = make_phantom<double>(PhantomKind::shepp_logan, 128, g.pixel_spacing, rng);
    const auto full = forward_project(phantom, g, all_views(g));
    double prev_err = 1e30;
    for (int64_t nv : {45, 90, 180, 360, 720}) {
        const auto rec = fbp(reduce_sinogram(full, svct_vector(nv, 720)), g);
        double err = 0;
        for (size_t i = 0; i < rec.data.values().size(); ++i) {
            const double d = rec.data.values()[i] - phantom.data.values()[i];
            err += d * d;
        }
        CAPTURE(nv);
        CHECK(err < prev_err);
        prev_err = err;
    }
}

TEST_CASE("view index out of range rejected") {
    const auto g = tiny_geometry();
    Image<double> img{Tensor<double>::zeros({g.image_size, g.image_size}), 1.0};
    CHECK_THROWS(forward_project(img, g, {g.n_full_views}));
}
