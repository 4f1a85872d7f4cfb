#include "ivct/physics.hpp"

#include <algorithm>
#include <cmath>

namespace ivct {

namespace {

struct Ellipse {
    double cx, cy;   // center, in [-1,1] coordinates
    double ax, ay;   // half axes
    double phi_deg;  // rotation
    double value;    // additive intensity
};

// Modified (low-contrast) Shepp-Logan, values land in [0,1].
const Ellipse kSheppLogan[] = {
    {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
    {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
    {0.22, 0.0, 0.11, 0.31, -18.0, -0.2},
    {-0.22, 0.0, 0.16, 0.41, 18.0, -0.2},
    {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
    {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
    {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},
    {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
    {0.0, -0.606, 0.023, 0.023, 0.0, 0.1},
    {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
};

template <typename T>
void rasterize(std::vector<T>& img, int64_t size, const std::vector<Ellipse>& ellipses) {
    const double inv = 2.0 / static_cast<double>(size);
    for (const auto& e : ellipses) {
        const double rad = e.phi_deg * 3.14159265358979323846 / 180.0;
        const double cs = std::cos(rad), sn = std::sin(rad);
        for (int64_t r = 0; r < size; ++r) {
            const double y = 1.0 - (static_cast<double>(r) + 0.5) * inv;
            for (int64_t c = 0; c < size; ++c) {
                const double x = (static_cast<double>(c) + 0.5) * inv - 1.0;
                const double dx = x - e.cx, dy = y - e.cy;
                const double xr = dx * cs + dy * sn;
                const double yr = -dx * sn + dy * cs;
                if ((xr * xr) / (e.ax * e.ax) + (yr * yr) / (e.ay * e.ay) <= 1.0)
                    img[static_cast<size_t>(r * size + c)] += static_cast<T>(e.value);
            }
        }
    }
    for (auto& v : img) v = std::clamp(v, T(0), T(1));
}

} // namespace

template <typename T>
Image<T> make_phantom(PhantomKind kind, int64_t size, double pixel_spacing, RngState& rng) {
    if (size < 16) throw std::invalid_argument("make_phantom: size must be >= 16");
    std::vector<T> img(static_cast<size_t>(size * size), T(0));

    if (kind == PhantomKind::shepp_logan) {
        rasterize(img, size, std::vector<Ellipse>(std::begin(kSheppLogan), std::end(kSheppLogan)));
    } else {
        // a body ellipse plus 2..7 internal features, all inside the FOV
        std::vector<Ellipse> es;
        Ellipse body;
        body.cx = rng.uniform(-0.08, 0.08);
        body.cy = rng.uniform(-0.08, 0.08);
        body.ax = rng.uniform(0.55, 0.85);
        body.ay = rng.uniform(0.55, 0.85);
        body.phi_deg = rng.uniform(0.0, 180.0);
        body.value = rng.uniform(0.25, 0.45);
        es.push_back(body);
        const int n_inner = 2 + static_cast<int>(rng.below(6)); // 3..8 ellipses total
        for (int i = 0; i < n_inner; ++i) {
            Ellipse e;
            const double ang = rng.uniform(0.0, 6.283185307179586);
            const double rad = rng.uniform(0.0, 0.45);
            e.cx = body.cx + std::cos(ang) * rad * body.ax;
            e.cy = body.cy + std::sin(ang) * rad * body.ay;
            e.ax = rng.uniform(0.05, 0.30);
            e.ay = rng.uniform(0.05, 0.30);
            e.phi_deg = rng.uniform(0.0, 180.0);
            e.value = rng.uniform(-0.25, 0.55);
            es.push_back(e);
        }
        rasterize(img, size, es);
    }

    Image<T> out;
    out.data = Tensor<T>::from_data({size, size}, std::move(img));
    out.pixel_spacing = pixel_spacing;
    return out;
}

template Image<float> make_phantom<float>(PhantomKind, int64_t, double, RngState&);
template Image<double> make_phantom<double>(PhantomKind, int64_t, double, RngState&);

} // namespace ivct
