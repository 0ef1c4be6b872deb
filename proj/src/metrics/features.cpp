#include "lesiongen/metrics/features.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "lesiongen/core/error.hpp"
#include "lesiongen/core/rng.hpp"

namespace lesiongen::metrics {

FeatureExtractor make_pixel_extractor(int side) {
    if (side < 1) throw ArgumentError("pixel extractor: side must be >= 1");
    return [side](const ImageF& img) {
        const ImageF small = resize_lanczos(img, side, side);
        return std::vector<double>(small.px.begin(), small.px.end());
    };
}

FeatureExtractor make_random_projection_extractor(int dim, int side, uint64_t seed) {
    if (dim < 1 || side < 1) throw ArgumentError("random projection extractor: bad dimensions");
    // Projection matrix fixed at construction; shared by value across calls.
    const int in_dim = side * side * 3;
    auto proj = std::make_shared<std::vector<double>>(static_cast<size_t>(dim) * in_dim);
    Rng rng(mix_seed(seed, 0xfea7));
    for (auto& v : *proj) v = rng.normal() / std::sqrt(static_cast<double>(in_dim));
    return [dim, side, in_dim, proj](const ImageF& img) {
        ImageF rgb = img;
        if (rgb.channels == 1) {
            ImageF three(3, img.height, img.width);
            for (int c = 0; c < 3; ++c)
                std::copy(img.px.begin(), img.px.end(), three.px.begin() + c * img.plane());
            rgb = std::move(three);
        }
        const ImageF small = resize_lanczos(rgb, side, side);
        std::vector<double> out(dim, 0.0);
        for (int o = 0; o < dim; ++o) {
            double acc = 0.0;
            const double* row = proj->data() + static_cast<size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) acc += row[i] * small.px[i];
            out[o] = std::tanh(acc);  // bounded nonlinearity keeps stats well-behaved
        }
        return out;
    };
}

FeatureStats compute_feature_stats(const std::vector<ImageF>& images,
                                   const FeatureExtractor& extractor) {
    std::vector<std::vector<double>> feats;
    feats.reserve(images.size());
    for (const auto& img : images) feats.push_back(extractor(img));
    return compute_feature_stats(feats);
}

FeatureStats compute_feature_stats(const std::vector<std::vector<double>>& features) {
    if (features.size() < 2)
        throw ArgumentError("compute_feature_stats: need at least 2 samples, got " +
                            std::to_string(features.size()));
    const size_t d = features.front().size();
    for (const auto& f : features)
        if (f.size() != d) throw ArgumentError("compute_feature_stats: inconsistent feature width");

    FeatureStats s;
    s.count = features.size();
    s.mean.assign(d, 0.0);
    for (const auto& f : features)
        for (size_t i = 0; i < d; ++i) s.mean[i] += f[i];
    for (auto& v : s.mean) v /= static_cast<double>(features.size());

    s.cov.assign(d * d, 0.0);
    for (const auto& f : features)
        for (size_t i = 0; i < d; ++i) {
            const double di = f[i] - s.mean[i];
            for (size_t j = i; j < d; ++j) s.cov[i * d + j] += di * (f[j] - s.mean[j]);
        }
    const double inv = 1.0 / static_cast<double>(features.size() - 1);
    for (size_t i = 0; i < d; ++i)
        for (size_t j = i; j < d; ++j) {
            s.cov[i * d + j] *= inv;
            s.cov[j * d + i] = s.cov[i * d + j];
        }
    return s;
}

namespace {

// PSD square root by eigendecomposition with negative eigenvalues clamped at
// the documented -1e-8 drift tolerance.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) {
        if (ev[i] < -1e-8)
            throw ArgumentError("frechet_distance: covariance is not positive semidefinite");
        ev[i] = std::sqrt(std::max(0.0, ev[i]));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
    if (a.dim() != b.dim()) throw ArgumentError("frechet_distance: dimension mismatch");
    const auto d = static_cast<Eigen::Index>(a.dim());
    Eigen::Map<const Eigen::MatrixXd> sa(a.cov.data(), d, d);
    Eigen::Map<const Eigen::MatrixXd> sb(b.cov.data(), d, d);

    double mean_term = 0.0;
    for (size_t i = 0; i < a.dim(); ++i) {
        const double diff = a.mean[i] - b.mean[i];
        mean_term += diff * diff;
    }

    // Tr((Sa Sb)^(1/2)) via the symmetric form Sa^(1/2) Sb Sa^(1/2).
    const Eigen::MatrixXd sa_half = psd_sqrt(sa);
    const Eigen::MatrixXd inner = psd_sqrt(sa_half * sb * sa_half);
    const double trace_term = sa.trace() + sb.trace() - 2.0 * inner.trace();
    return mean_term + trace_term;
}

}  // namespace lesiongen::metrics
