#pragma once

#include <functional>
#include <vector>

#include "lesiongen/core/image.hpp"

namespace lesiongen::metrics {

// Pluggable feature function: image -> fixed-width vector. The full-scale
// inception-style network plugs in here; desk scale uses the deterministic
// extractors below.
using FeatureExtractor = std::function<std::vector<double>(const ImageF&)>;

// Downsample to side x side and flatten all planes.
FeatureExtractor make_pixel_extractor(int side);

// Fixed seeded Gaussian projection of downsampled pixels to `dim` features;
// deterministic, no external weights.
FeatureExtractor make_random_projection_extractor(int dim, int side, uint64_t seed);

struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> cov;  // row-major d x d, unbiased
    size_t count = 0;

    size_t dim() const { return mean.size(); }
};

FeatureStats compute_feature_stats(const std::vector<ImageF>& images,
                                   const FeatureExtractor& extractor);
FeatureStats compute_feature_stats(const std::vector<std::vector<double>>& features);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}); the square root is taken
// on the symmetrized product with tiny negative eigenvalues clamped.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

}  // namespace lesiongen::metrics
