#pragma once

#include <cmath>
#include <cstdint>

namespace ivct {

// Counter-based generator: every draw is a pure function of (seed, counter),
// so streams can be replayed or split without storing state beyond two ints.
struct RngState {
    uint64_t seed = 0;
    uint64_t counter = 0;

    explicit RngState(uint64_t s = 0, uint64_t c = 0) : seed(s), counter(c) {}

    uint64_t next_u64() {
        uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (++counter);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal, Box-Muller (two fresh uniforms per call)
    double normal() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // normal truncated to +-2 sigma (redraw), as used for weight init
    double trunc_normal() {
        for (int i = 0; i < 64; ++i) {
            double x = normal();
            if (std::fabs(x) <= 2.0) return x;
        }
        return 0.0;
    }

    // Poisson draw; exact Knuth for small lambda, normal approximation above
    // (error negligible at the photon counts used here).
    int64_t poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda < 30.0) {
            double l = std::exp(-lambda), p = 1.0;
            int64_t k = 0;
            do {
                ++k;
                p *= uniform();
            } while (p > l);
            return k - 1;
        }
        double x = lambda + std::sqrt(lambda) * normal();
        return x < 0.0 ? 0 : static_cast<int64_t>(std::llround(x));
    }

    uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }
};

} // namespace ivct
