#pragma once

#include "lesiongen/data/manifest.hpp"

namespace lesiongen::data {

// Spatial ops apply identically to image and mask (mask via nearest lookup so
// it stays binary); pixel ops touch the image only. All draws come from the
// provided seed, so a (seed, sample) pair is reproducible.
struct AugmentationConfig {
    double flip_prob = 0.5;           // horizontal
    double vflip_prob = 0.0;
    double rotate_prob = 0.0;
    double max_rotate_degrees = 15.0;
    double scale_prob = 0.0;
    double scale_min = 0.9;           // zoom factor range
    double scale_max = 1.1;
    double brightness_prob = 0.0;
    double brightness_delta = 0.1;    // additive, drawn from [-delta, delta]
    double contrast_prob = 0.0;
    double contrast_min = 0.9;        // multiplicative around the mean
    double contrast_max = 1.1;

    void validate() const;
    static AugmentationConfig identity() { return {0, 0, 0, 15, 0, 1, 1, 0, 0, 0, 1, 1}; }
};

// RGB resized with the Lanczos filter, mask with nearest-neighbor; the mask is
// re-thresholded at 0.5 afterwards so any resampling drift cannot leave
// non-binary values.
FourChannelSample resize_sample(const FourChannelSample& s, int out_h, int out_w);

FourChannelSample augment_pair(const FourChannelSample& s, const AugmentationConfig& cfg,
                               uint64_t seed);

}  // namespace lesiongen::data
