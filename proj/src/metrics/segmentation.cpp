#include "lesiongen/metrics/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lesiongen/core/error.hpp"

namespace lesiongen::metrics {

void MaskPair::validate() const {
    if (predicted.height != truth.height || predicted.width != truth.width)
        throw ArgumentError("mask pair: shape mismatch");
    if (spacing_y <= 0.0 || spacing_x <= 0.0)
        throw ArgumentError("mask pair: spacing must be positive");
    for (uint8_t v : predicted.px)
        if (v > 1) throw ArgumentError("mask pair: predicted mask not binary");
    for (uint8_t v : truth.px)
        if (v > 1) throw ArgumentError("mask pair: truth mask not binary");
}

Overlap dice_iou(const MaskPair& p) {
    p.validate();
    int64_t inter = 0, a = 0, b = 0;
    for (size_t i = 0; i < p.predicted.px.size(); ++i) {
        inter += p.predicted.px[i] & p.truth.px[i];
        a += p.predicted.px[i];
        b += p.truth.px[i];
    }
    if (a + b == 0) return {1.0, 1.0};  // both empty
    Overlap o;
    o.dice = 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
    const int64_t uni = a + b - inter;
    o.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    return o;
}

std::vector<std::pair<int, int>> boundary_pixels(const Mask& mask) {
    std::vector<std::pair<int, int>> out;
    const int h = mask.height, w = mask.width;
    auto bg = [&](int y, int x) {
        return y < 0 || y >= h || x < 0 || x >= w || mask.at(y, x) == 0;
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.at(y, x)) continue;
            if (bg(y - 1, x) || bg(y + 1, x) || bg(y, x - 1) || bg(y, x + 1)) out.push_back({y, x});
        }
    return out;
}

namespace {

// Meijster et al. exact squared Euclidean distance transform to the given
// point set, in integer arithmetic throughout.
std::vector<int64_t> squared_edt(const std::vector<std::pair<int, int>>& points, int h, int w) {
    const int64_t inf = h + w;
    std::vector<int64_t> g(static_cast<size_t>(h) * w, inf);
    {
        std::vector<char> on(static_cast<size_t>(h) * w, 0);
        for (const auto& [y, x] : points) on[static_cast<size_t>(y) * w + x] = 1;
        for (int x = 0; x < w; ++x) {
            int64_t d = inf;
            for (int y = 0; y < h; ++y) {
                d = on[static_cast<size_t>(y) * w + x] ? 0 : (d >= inf ? inf : d + 1);
                g[static_cast<size_t>(y) * w + x] = d;
            }
            d = g[static_cast<size_t>(h - 1) * w + x];
            for (int y = h - 2; y >= 0; --y) {
                const size_t idx = static_cast<size_t>(y) * w + x;
                d = d >= inf ? inf : d + 1;
                if (d < g[idx]) g[idx] = d;
                d = std::min(d, g[idx]);
            }
        }
    }

    std::vector<int64_t> dt(static_cast<size_t>(h) * w, 0);
    std::vector<int> s(w), t(w);
    for (int y = 0; y < h; ++y) {
        const int64_t* gy = g.data() + static_cast<size_t>(y) * w;
        auto f = [&](int x, int i) {
            const int64_t dx = x - i;
            return dx * dx + gy[i] * gy[i];
        };
        auto sep = [&](int i, int u) {
            return (static_cast<int64_t>(u) * u - static_cast<int64_t>(i) * i + gy[u] * gy[u] -
                    gy[i] * gy[i]) /
                   (2 * static_cast<int64_t>(u - i));
        };
        int q = 0;
        s[0] = 0;
        t[0] = 0;
        for (int u = 1; u < w; ++u) {
            while (q >= 0 && f(t[q], s[q]) > f(t[q], u)) --q;
            if (q < 0) {
                q = 0;
                s[0] = u;
                t[0] = 0;
            } else {
                const int64_t wpos = 1 + sep(s[q], u);
                if (wpos < w) {
                    ++q;
                    s[q] = u;
                    t[q] = static_cast<int>(wpos);
                }
            }
        }
        for (int x = w - 1; x >= 0; --x) {
            dt[static_cast<size_t>(y) * w + x] = f(x, s[q]);
            if (x == t[q]) --q;
        }
    }
    return dt;
}

struct SurfaceDistances {
    double sum_pred_to_truth = 0.0;
    double sum_truth_to_pred = 0.0;
    double max_pred_to_truth = 0.0;
    double max_truth_to_pred = 0.0;
    size_t n_pred = 0;
    size_t n_truth = 0;
};

std::optional<SurfaceDistances> surface_distances(const MaskPair& p) {
    p.validate();
    const auto bp = boundary_pixels(p.predicted);
    const auto bt = boundary_pixels(p.truth);
    if (bp.empty() || bt.empty()) return std::nullopt;

    SurfaceDistances d;
    d.n_pred = bp.size();
    d.n_truth = bt.size();

    if (p.spacing_y == 1.0 && p.spacing_x == 1.0) {
        const auto dt_truth = squared_edt(bt, p.truth.height, p.truth.width);
        const auto dt_pred = squared_edt(bp, p.predicted.height, p.predicted.width);
        const int w = p.truth.width;
        for (const auto& [y, x] : bp) {
            const double v = std::sqrt(static_cast<double>(dt_truth[static_cast<size_t>(y) * w + x]));
            d.sum_pred_to_truth += v;
            d.max_pred_to_truth = std::max(d.max_pred_to_truth, v);
        }
        for (const auto& [y, x] : bt) {
            const double v = std::sqrt(static_cast<double>(dt_pred[static_cast<size_t>(y) * w + x]));
            d.sum_truth_to_pred += v;
            d.max_truth_to_pred = std::max(d.max_truth_to_pred, v);
        }
        return d;
    }

    // Anisotropic spacing: exact point-set distances over the boundaries.
    auto min_dist = [&](int y, int x, const std::vector<std::pair<int, int>>& set) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [qy, qx] : set) {
            const double dy = (y - qy) * p.spacing_y;
            const double dx = (x - qx) * p.spacing_x;
            best = std::min(best, dy * dy + dx * dx);
        }
        return std::sqrt(best);
    };
    for (const auto& [y, x] : bp) {
        const double v = min_dist(y, x, bt);
        d.sum_pred_to_truth += v;
        d.max_pred_to_truth = std::max(d.max_pred_to_truth, v);
    }
    for (const auto& [y, x] : bt) {
        const double v = min_dist(y, x, bp);
        d.sum_truth_to_pred += v;
        d.max_truth_to_pred = std::max(d.max_truth_to_pred, v);
    }
    return d;
}

}  // namespace

std::optional<double> maybe_asd(const MaskPair& p) {
    const auto d = surface_distances(p);
    if (!d) return std::nullopt;
    return 0.5 * (d->sum_pred_to_truth / static_cast<double>(d->n_pred) +
                  d->sum_truth_to_pred / static_cast<double>(d->n_truth));
}

std::optional<double> maybe_hausdorff(const MaskPair& p) {
    const auto d = surface_distances(p);
    if (!d) return std::nullopt;
    return std::max(d->max_pred_to_truth, d->max_truth_to_pred);
}

double asd(const MaskPair& p) {
    const auto v = maybe_asd(p);
    if (!v) throw UndefinedMetricError("asd: a mask has an empty boundary");
    return *v;
}

double hausdorff(const MaskPair& p) {
    const auto v = maybe_hausdorff(p);
    if (!v) throw UndefinedMetricError("hausdorff: a mask has an empty boundary");
    return *v;
}

}  // namespace lesiongen::metrics
