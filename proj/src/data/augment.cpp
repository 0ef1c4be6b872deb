#include "lesiongen/data/augment.hpp"

#include <algorithm>
#include <cmath>

#include "lesiongen/core/error.hpp"
#include "lesiongen/core/rng.hpp"

namespace lesiongen::data {

namespace {

void flip_h(ImageF& img, Mask& mask) {
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width / 2; ++x)
                std::swap(img.at(c, y, x), img.at(c, y, img.width - 1 - x));
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width / 2; ++x)
            std::swap(mask.at(y, x), mask.at(y, mask.width - 1 - x));
}

void flip_v(ImageF& img, Mask& mask) {
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height / 2; ++y)
            for (int x = 0; x < img.width; ++x)
                std::swap(img.at(c, y, x), img.at(c, img.height - 1 - y, x));
    for (int y = 0; y < mask.height / 2; ++y)
        for (int x = 0; x < mask.width; ++x) std::swap(mask.at(y, x), mask.at(mask.height - 1 - y, x));
}

// Inverse-map affine transform about the image center: bilinear for the image,
// nearest for the mask. Out-of-frame samples take the border pixel.
void warp(ImageF& img, Mask& mask, double angle_rad, double zoom) {
    const int h = img.height, w = img.width;
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    const double ca = std::cos(angle_rad) / zoom, sa = std::sin(angle_rad) / zoom;
    ImageF src_img = img;
    Mask src_mask = mask;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dy = y - cy, dx = x - cx;
            const double sy = ca * dy - sa * dx + cy;
            const double sx = sa * dy + ca * dx + cx;
            const double syc = std::clamp(sy, 0.0, static_cast<double>(h - 1));
            const double sxc = std::clamp(sx, 0.0, static_cast<double>(w - 1));
            const int y0 = static_cast<int>(syc), x0 = static_cast<int>(sxc);
            const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
            const float fy = static_cast<float>(syc - y0), fx = static_cast<float>(sxc - x0);
            for (int c = 0; c < img.channels; ++c) {
                const float v = (1 - fy) * ((1 - fx) * src_img.at(c, y0, x0) + fx * src_img.at(c, y0, x1)) +
                                fy * ((1 - fx) * src_img.at(c, y1, x0) + fx * src_img.at(c, y1, x1));
                img.at(c, y, x) = v;
            }
            mask.at(y, x) = src_mask.at(static_cast<int>(std::lround(syc)),
                                        static_cast<int>(std::lround(sxc)));
        }
}

}  // namespace

void AugmentationConfig::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(flip_prob) || !prob(vflip_prob) || !prob(rotate_prob) || !prob(scale_prob) ||
        !prob(brightness_prob) || !prob(contrast_prob))
        throw ArgumentError("augmentation probabilities must be in [0,1]");
    if (scale_min <= 0 || scale_max < scale_min)
        throw ArgumentError("augmentation scale range invalid");
    if (contrast_min <= 0 || contrast_max < contrast_min)
        throw ArgumentError("augmentation contrast range invalid");
}

FourChannelSample resize_sample(const FourChannelSample& s, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw ArgumentError("resize_sample: size must be positive");
    FourChannelSample out = s;
    out.rgb = resize_lanczos(s.rgb, out_h, out_w);
    out.mask = resize_nearest(s.mask, out_h, out_w);
    // Nearest-neighbor preserves binarity; the threshold guards format drift.
    for (auto& v : out.mask.px) v = v >= 1 ? 1 : 0;
    out.check_invariants();
    return out;
}

FourChannelSample augment_pair(const FourChannelSample& s, const AugmentationConfig& cfg,
                               uint64_t seed) {
    cfg.validate();
    s.check_invariants();
    FourChannelSample out = s;
    Rng rng(mix_seed(seed, 0xa06));

    if (rng.uniform() < cfg.flip_prob) flip_h(out.rgb, out.mask);
    if (rng.uniform() < cfg.vflip_prob) flip_v(out.rgb, out.mask);

    double angle = 0.0, zoom = 1.0;
    if (rng.uniform() < cfg.rotate_prob)
        angle = (rng.uniform() * 2.0 - 1.0) * cfg.max_rotate_degrees * 3.14159265358979323846 / 180.0;
    if (rng.uniform() < cfg.scale_prob)
        zoom = cfg.scale_min + rng.uniform() * (cfg.scale_max - cfg.scale_min);
    if (angle != 0.0 || zoom != 1.0) warp(out.rgb, out.mask, angle, zoom);

    if (rng.uniform() < cfg.brightness_prob) {
        const float d = static_cast<float>((rng.uniform() * 2.0 - 1.0) * cfg.brightness_delta);
        for (auto& v : out.rgb.px) v = std::clamp(v + d, 0.f, 1.f);
    }
    if (rng.uniform() < cfg.contrast_prob) {
        const float c =
            static_cast<float>(cfg.contrast_min + rng.uniform() * (cfg.contrast_max - cfg.contrast_min));
        double mean = 0.0;
        for (float v : out.rgb.px) mean += v;
        mean /= static_cast<double>(out.rgb.px.size());
        for (auto& v : out.rgb.px)
            v = std::clamp(static_cast<float>(mean + c * (v - mean)), 0.f, 1.f);
    }
    out.check_invariants();
    return out;
}

}  // namespace lesiongen::data
