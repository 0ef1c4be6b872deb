#pragma once

#include <functional>
#include <vector>

#include "lesiongen/core/image.hpp"

namespace lesiongen::metrics {

// One layer of perceptual features plus its weight. Any normalization (unit
// channel norms at full scale) is the extractor's responsibility; the metric
// itself is a weighted mean-squared distance.
struct PerceptualLayer {
    std::vector<double> features;
    double weight = 1.0;
};

using PerceptualExtractor = std::function<std::vector<PerceptualLayer>(const ImageF&)>;

// Single layer of raw pixels with unit weight; lpips with this extractor is
// the mean squared pixel difference.
PerceptualExtractor make_identity_perceptual_extractor();

double lpips(const ImageF& a, const ImageF& b, const PerceptualExtractor& extractor);

// Multi-scale structural similarity on the luminance plane: contrast/structure
// at every scale, luminance folded in at the coarsest, standard 5-scale
// weights by default (truncated and renormalized for fewer scales).
double ms_ssim(const ImageF& a, const ImageF& b, int scales = 5,
               const std::vector<double>& weights = {});

}  // namespace lesiongen::metrics
