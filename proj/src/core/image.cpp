#include "lesiongen/core/image.hpp"

#include <algorithm>
#include <cmath>

#include "lesiongen/core/error.hpp"

namespace lesiongen {

namespace {

constexpr int kLanczosA = 3;

double lanczos3(double x) {
    if (x == 0.0) return 1.0;
    if (x <= -kLanczosA || x >= kLanczosA) return 0.0;
    const double pix = 3.14159265358979323846 * x;
    return kLanczosA * std::sin(pix) * std::sin(pix / kLanczosA) / (pix * pix);
}

struct FilterBank {
    // For each output coordinate: first source index and normalized weights.
    std::vector<int> start;
    std::vector<std::vector<double>> weights;
};

FilterBank build_filter(int in_size, int out_size) {
    FilterBank fb;
    fb.start.resize(out_size);
    fb.weights.resize(out_size);
    const double scale = static_cast<double>(in_size) / out_size;
    const double support = scale > 1.0 ? kLanczosA * scale : kLanczosA;
    for (int o = 0; o < out_size; ++o) {
        const double center = (o + 0.5) * scale - 0.5;
        int lo = static_cast<int>(std::floor(center - support));
        int hi = static_cast<int>(std::ceil(center + support));
        lo = std::max(lo, 0);
        hi = std::min(hi, in_size - 1);
        fb.start[o] = lo;
        auto& w = fb.weights[o];
        w.resize(hi - lo + 1);
        double sum = 0.0;
        const double inv = scale > 1.0 ? 1.0 / scale : 1.0;
        for (int i = lo; i <= hi; ++i) {
            const double v = lanczos3((i - center) * inv);
            w[i - lo] = v;
            sum += v;
        }
        if (sum != 0.0)
            for (auto& v : w) v /= sum;
    }
    return fb;
}

}  // namespace

size_t Mask::area() const {
    size_t n = 0;
    for (uint8_t v : px) n += v;
    return n;
}

ImageF resize_lanczos(const ImageF& src, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw ArgumentError("resize_lanczos: target size must be positive");
    if (src.height == out_h && src.width == out_w) return src;

    const FilterBank fx = build_filter(src.width, out_w);
    const FilterBank fy = build_filter(src.height, out_h);

    // Horizontal pass, then vertical.
    ImageF tmp(src.channels, src.height, out_w);
    for (int c = 0; c < src.channels; ++c)
        for (int y = 0; y < src.height; ++y)
            for (int x = 0; x < out_w; ++x) {
                double acc = 0.0;
                const auto& w = fx.weights[x];
                for (size_t k = 0; k < w.size(); ++k) acc += w[k] * src.at(c, y, fx.start[x] + static_cast<int>(k));
                tmp.at(c, y, x) = static_cast<float>(acc);
            }
    ImageF out(src.channels, out_h, out_w);
    for (int c = 0; c < src.channels; ++c)
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) {
                double acc = 0.0;
                const auto& w = fy.weights[y];
                for (size_t k = 0; k < w.size(); ++k) acc += w[k] * tmp.at(c, fy.start[y] + static_cast<int>(k), x);
                out.at(c, y, x) = std::clamp(static_cast<float>(acc), 0.f, 1.f);
            }
    return out;
}

Mask resize_nearest(const Mask& src, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw ArgumentError("resize_nearest: target size must be positive");
    if (src.height == out_h && src.width == out_w) return src;
    Mask out(out_h, out_w);
    const double sy = static_cast<double>(src.height) / out_h;
    const double sx = static_cast<double>(src.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        int iy = std::min(static_cast<int>((y + 0.5) * sy), src.height - 1);
        for (int x = 0; x < out_w; ++x) {
            int ix = std::min(static_cast<int>((x + 0.5) * sx), src.width - 1);
            out.at(y, x) = src.at(iy, ix);
        }
    }
    return out;
}

std::vector<float> luminance(const ImageF& rgb) {
    std::vector<float> out(rgb.plane());
    const float inv = 1.f / static_cast<float>(rgb.channels);
    for (size_t i = 0; i < out.size(); ++i) {
        float s = 0.f;
        for (int c = 0; c < rgb.channels; ++c) s += rgb.px[c * rgb.plane() + i];
        out[i] = s * inv;
    }
    return out;
}

}  // namespace lesiongen
