#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "lesiongen/core/image.hpp"

namespace lesiongen::metrics {

// Prediction/ground-truth mask pair; spacing scales distances per axis.
struct MaskPair {
    Mask predicted;
    Mask truth;
    double spacing_y = 1.0;
    double spacing_x = 1.0;

    void validate() const;
};

struct Overlap {
    double dice = 0.0;
    double iou = 0.0;
};

// Region overlap per the usual set counts; both-empty pairs score (1, 1).
Overlap dice_iou(const MaskPair& p);

// Foreground pixels with at least one background 4-neighbor; the image border
// counts as background.
std::vector<std::pair<int, int>> boundary_pixels(const Mask& mask);

// Average symmetric boundary distance via an exact integer squared Euclidean
// distance transform (unit spacing) or exact point-set distances otherwise.
// Throws UndefinedMetricError when either boundary is empty.
double asd(const MaskPair& p);
double hausdorff(const MaskPair& p);

// Non-throwing variants for aggregation loops.
std::optional<double> maybe_asd(const MaskPair& p);
std::optional<double> maybe_hausdorff(const MaskPair& p);

}  // namespace lesiongen::metrics
