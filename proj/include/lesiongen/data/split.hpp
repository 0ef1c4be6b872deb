#pragma once

#include <optional>

#include "lesiongen/data/manifest.hpp"

namespace lesiongen::data {

struct Fold {
    DatasetManifest train;
    DatasetManifest validation;
};

// Stratified K-fold: per-class counts across folds differ by at most one and
// the folds partition the manifest. Deterministic in the seed.
std::vector<Fold> stratified_kfold(const DatasetManifest& m, int k, uint64_t seed);

// Mixes round(total * real_fraction) real records with the synthetic
// complement. Per-class draws are proportional to each source's own class
// distribution unless class_weights overrides the split (relative weights,
// applied to both sources; used to boost minority classes).
struct HybridSpec {
    double real_fraction = 0.5;
    size_t total = 0;
    std::optional<std::map<std::string, double>> class_weights;
};

DatasetManifest assemble_hybrid(const DatasetManifest& real, const DatasetManifest& synth,
                                const HybridSpec& spec, uint64_t seed);

}  // namespace lesiongen::data
