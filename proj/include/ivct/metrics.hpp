#pragma once

// PSNR / SSIM evaluation metrics on [0,1] images.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ivct {

constexpr double kPsnrCap = 99.0;

template <typename T>
double psnr(const std::vector<T>& a, const std::vector<T>& b, double data_range = 1.0) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse <= 0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / mse));
}

namespace detail {

inline const std::vector<double>& gaussian11() {
    static const std::vector<double> k = [] {
        std::vector<double> g(11);
        double sum = 0;
        for (int i = 0; i < 11; ++i) {
            const double d = static_cast<double>(i) - 5.0;
            g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += g[static_cast<size_t>(i)];
        }
        for (auto& v : g) v /= sum;
        return g;
    }();
    return k;
}

// separable valid-region Gaussian blur
template <typename T>
std::vector<double> blur11(const std::vector<T>& img, int64_t h, int64_t w) {
    const auto& k = gaussian11();
    const int64_t oh = h - 10, ow = w - 10;
    std::vector<double> tmp(static_cast<size_t>(h * ow));
    for (int64_t r = 0; r < h; ++r)
        for (int64_t c = 0; c < ow; ++c) {
            double s = 0;
            for (int i = 0; i < 11; ++i) s += k[static_cast<size_t>(i)] * static_cast<double>(img[static_cast<size_t>(r * w + c + i)]);
            tmp[static_cast<size_t>(r * ow + c)] = s;
        }
    std::vector<double> out(static_cast<size_t>(oh * ow));
    for (int64_t r = 0; r < oh; ++r)
        for (int64_t c = 0; c < ow; ++c) {
            double s = 0;
            for (int i = 0; i < 11; ++i) s += k[static_cast<size_t>(i)] * tmp[static_cast<size_t>((r + i) * ow + c)];
            out[static_cast<size_t>(r * ow + c)] = s;
        }
    return out;
}

} // namespace detail

// single-scale SSIM, 11x11 Gaussian sigma 1.5, k1=0.01 k2=0.03, range 1
template <typename T>
double ssim(const std::vector<T>& a, const std::vector<T>& b, int64_t h, int64_t w) {
    if (a.size() != b.size() || static_cast<int64_t>(a.size()) != h * w) throw std::invalid_argument("ssim: shape mismatch");
    if (h < 11 || w < 11) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

    std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const double x = static_cast<double>(a[i]), y = static_cast<double>(b[i]);
        aa[i] = x * x;
        bb[i] = y * y;
        ab[i] = x * y;
    }
    const auto mu1 = detail::blur11(a, h, w);
    const auto mu2 = detail::blur11(b, h, w);
    const auto m11 = detail::blur11(aa, h, w);
    const auto m22 = detail::blur11(bb, h, w);
    const auto m12 = detail::blur11(ab, h, w);

    double acc = 0;
    for (size_t i = 0; i < mu1.size(); ++i) {
        const double s1 = m11[i] - mu1[i] * mu1[i];
        const double s2 = m22[i] - mu2[i] * mu2[i];
        const double s12 = m12[i] - mu1[i] * mu2[i];
        const double num = (2.0 * mu1[i] * mu2[i] + c1) * (2.0 * s12 + c2);
        const double den = (mu1[i] * mu1[i] + mu2[i] * mu2[i] + c1) * (s1 + s2 + c2);
        acc += num / den;
    }
    return acc / static_cast<double>(mu1.size());
}

} // namespace ivct
