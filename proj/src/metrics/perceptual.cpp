#include "lesiongen/metrics/perceptual.hpp"

#include <cmath>

#include "lesiongen/core/error.hpp"

namespace lesiongen::metrics {

PerceptualExtractor make_identity_perceptual_extractor() {
    return [](const ImageF& img) {
        PerceptualLayer layer;
        layer.features.assign(img.px.begin(), img.px.end());
        layer.weight = 1.0;
        return std::vector<PerceptualLayer>{layer};
    };
}

double lpips(const ImageF& a, const ImageF& b, const PerceptualExtractor& extractor) {
    if (a.channels != b.channels || a.height != b.height || a.width != b.width)
        throw ArgumentError("lpips: image shape mismatch");
    const auto fa = extractor(a);
    const auto fb = extractor(b);
    if (fa.size() != fb.size()) throw ArgumentError("lpips: extractor layer count mismatch");
    double total = 0.0;
    for (size_t l = 0; l < fa.size(); ++l) {
        if (fa[l].features.size() != fb[l].features.size())
            throw ArgumentError("lpips: feature width mismatch at layer " + std::to_string(l));
        double acc = 0.0;
        for (size_t i = 0; i < fa[l].features.size(); ++i) {
            const double d = fa[l].features[i] - fb[l].features[i];
            acc += d * d;
        }
        total += fa[l].weight * acc / static_cast<double>(fa[l].features.size());
    }
    return total;
}

namespace {

struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
    double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

Plane to_luma(const ImageF& img) {
    Plane p;
    p.h = img.height;
    p.w = img.width;
    const auto lum = luminance(img);
    p.v.assign(lum.begin(), lum.end());
    return p;
}

Plane downsample2(const Plane& p) {
    Plane o;
    o.h = p.h / 2;
    o.w = p.w / 2;
    o.v.resize(static_cast<size_t>(o.h) * o.w);
    for (int y = 0; y < o.h; ++y)
        for (int x = 0; x < o.w; ++x)
            o.v[static_cast<size_t>(y) * o.w + x] =
                0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x) +
                        p.at(2 * y + 1, 2 * x + 1));
    return o;
}

std::vector<double> gaussian_kernel_11() {
    std::vector<double> k(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5;
        k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Valid-mode separable Gaussian filtering.
Plane gauss_filter(const Plane& p, const std::vector<double>& k) {
    const int r = static_cast<int>(k.size()) / 2;
    Plane tmp;
    tmp.h = p.h;
    tmp.w = p.w - 2 * r;
    tmp.v.resize(static_cast<size_t>(tmp.h) * tmp.w);
    for (int y = 0; y < tmp.h; ++y)
        for (int x = 0; x < tmp.w; ++x) {
            double acc = 0.0;
            for (size_t i = 0; i < k.size(); ++i) acc += k[i] * p.at(y, x + static_cast<int>(i));
            tmp.v[static_cast<size_t>(y) * tmp.w + x] = acc;
        }
    Plane out;
    out.h = p.h - 2 * r;
    out.w = tmp.w;
    out.v.resize(static_cast<size_t>(out.h) * out.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            double acc = 0.0;
            for (size_t i = 0; i < k.size(); ++i) acc += k[i] * tmp.at(y + static_cast<int>(i), x);
            out.v[static_cast<size_t>(y) * out.w + x] = acc;
        }
    return out;
}

struct SsimTerms {
    double luminance = 0.0;
    double contrast_structure = 0.0;
};

SsimTerms ssim_terms(const Plane& x, const Plane& y) {
    constexpr double C1 = 0.01 * 0.01;
    constexpr double C2 = 0.03 * 0.03;
    const auto k = gaussian_kernel_11();
    const Plane mx = gauss_filter(x, k), my = gauss_filter(y, k);

    Plane xx = x, yy = y, xy = x;
    for (size_t i = 0; i < xx.v.size(); ++i) {
        xy.v[i] = x.v[i] * y.v[i];
        xx.v[i] = x.v[i] * x.v[i];
        yy.v[i] = y.v[i] * y.v[i];
    }
    const Plane mxx = gauss_filter(xx, k), myy = gauss_filter(yy, k), mxy = gauss_filter(xy, k);

    double l_acc = 0.0, cs_acc = 0.0;
    for (size_t i = 0; i < mx.v.size(); ++i) {
        const double mu_x = mx.v[i], mu_y = my.v[i];
        const double var_x = mxx.v[i] - mu_x * mu_x;
        const double var_y = myy.v[i] - mu_y * mu_y;
        const double cov = mxy.v[i] - mu_x * mu_y;
        l_acc += (2.0 * mu_x * mu_y + C1) / (mu_x * mu_x + mu_y * mu_y + C1);
        cs_acc += (2.0 * cov + C2) / (var_x + var_y + C2);
    }
    const double n = static_cast<double>(mx.v.size());
    return {l_acc / n, cs_acc / n};
}

double signed_pow(double base, double exp) {
    return base >= 0.0 ? std::pow(base, exp) : -std::pow(-base, exp);
}

}  // namespace

double ms_ssim(const ImageF& a, const ImageF& b, int scales, const std::vector<double>& weights) {
    if (a.channels != b.channels || a.height != b.height || a.width != b.width)
        throw ArgumentError("ms_ssim: image shape mismatch");
    if (scales < 1) throw ArgumentError("ms_ssim: scales must be >= 1");
    const int min_side = (1 << (scales - 1)) * 11;
    if (a.height < min_side || a.width < min_side)
        throw ArgumentError("ms_ssim: image side must be >= " + std::to_string(min_side) +
                            " for " + std::to_string(scales) + " scales");

    static const std::vector<double> kStandard{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    std::vector<double> w = weights;
    if (w.empty()) {
        if (scales > static_cast<int>(kStandard.size()))
            throw ArgumentError("ms_ssim: provide weights for more than 5 scales");
        w.assign(kStandard.begin(), kStandard.begin() + scales);
        double sum = 0.0;
        for (double v : w) sum += v;
        for (auto& v : w) v /= sum;
    }
    if (static_cast<int>(w.size()) != scales)
        throw ArgumentError("ms_ssim: weight count must equal scales");

    Plane x = to_luma(a), y = to_luma(b);
    double value = 1.0;
    for (int s = 0; s < scales; ++s) {
        const auto terms = ssim_terms(x, y);
        value *= signed_pow(terms.contrast_structure, w[s]);
        if (s == scales - 1) value *= signed_pow(terms.luminance, w[s]);
        if (s + 1 < scales) {
            x = downsample2(x);
            y = downsample2(y);
        }
    }
    return value;
}

}  // namespace lesiongen::metrics
