#pragma once

// Shared helpers for the unit suites: random tensors and the central
// finite-difference oracle used to check every differentiable op.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ivct/ops.hpp"

namespace ivct::testing {

inline Tensor<double> random_tensor(Shape shape, RngState& rng, double scale = 1.0, bool rg = true,
                                    double keep_away_from_zero = 0.0) {
    auto t = Tensor<double>::randn(std::move(shape), rng, scale, rg);
    if (keep_away_from_zero > 0)
        for (auto& v : t.values())
            if (std::fabs(v) < keep_away_from_zero) v = v < 0 ? v - keep_away_from_zero : v + keep_away_from_zero;
    return t;
}

// Max relative error between analytic gradients of `params` and central
// differences of the scalar loss returned by `f`. Coordinates are subsampled
// for large parameters.
template <typename LossFn>
double fd_check(std::vector<Tensor<double>> params, LossFn&& f, double h = 1e-5,
                int64_t max_coords_per_param = 64, uint64_t select_seed = 99) {
    for (auto& p : params) p.zero_grad();
    auto loss = f();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    // Absolute floor tied to the gradient scale: coordinates much smaller than
    // the largest gradient are dominated by FD cancellation noise, not by the
    // analytic path under test.
    double gmax = 0.0;
    for (const auto& g : analytic)
        for (double v : g) gmax = std::max(gmax, std::fabs(v));
    const double floor = std::max(1e-6, 1e-4 * gmax);

    double max_rel = 0.0;
    RngState sel(select_seed);
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        const int64_t n = p.numel();
        std::vector<int64_t> coords;
        if (n <= max_coords_per_param) {
            coords.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        } else {
            for (int64_t i = 0; i < max_coords_per_param; ++i)
                coords.push_back(static_cast<int64_t>(sel.below(static_cast<uint64_t>(n))));
        }
        for (int64_t c : coords) {
            const double orig = p.values()[static_cast<size_t>(c)];
            p.values()[static_cast<size_t>(c)] = orig + h;
            const double lp = f().item();
            p.values()[static_cast<size_t>(c)] = orig - h;
            const double lm = f().item();
            p.values()[static_cast<size_t>(c)] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = analytic[pi][static_cast<size_t>(c)];
            const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), floor});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

inline float max_abs_diff_f(const std::vector<float>& a, const std::vector<float>& b) {
    float m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

} // namespace ivct::testing
