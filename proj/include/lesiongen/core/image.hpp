#pragma once

#include <cstdint>
#include <vector>

namespace lesiongen {

// Planar float image, values in [0,1] by convention. Layout [ch][h][w].
struct ImageF {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> px;

    ImageF() = default;
    ImageF(int c, int h, int w, float fill = 0.f)
        : channels(c), height(h), width(w), px(static_cast<size_t>(c) * h * w, fill) {}

    float& at(int c, int y, int x) {
        return px[(static_cast<size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return px[(static_cast<size_t>(c) * height + y) * width + x];
    }
    size_t plane() const { return static_cast<size_t>(height) * width; }
};

// Binary mask, values exactly 0 or 1.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> px;

    Mask() = default;
    Mask(int h, int w, uint8_t fill = 0) : height(h), width(w), px(static_cast<size_t>(h) * w, fill) {}

    uint8_t& at(int y, int x) { return px[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return px[static_cast<size_t>(y) * width + x]; }
    size_t area() const;  // foreground pixel count
};

// Windowed-sinc (Lanczos, a=3) resampling; the filter footprint is widened by
// the scale factor when minifying. Output clamped to [0,1].
ImageF resize_lanczos(const ImageF& src, int out_h, int out_w);

// Nearest-neighbor resampling; preserves binarity.
Mask resize_nearest(const Mask& src, int out_h, int out_w);

// Per-pixel mean of the RGB planes.
std::vector<float> luminance(const ImageF& rgb);

}  // namespace lesiongen
