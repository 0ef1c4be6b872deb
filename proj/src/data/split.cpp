#include "lesiongen/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lesiongen/core/error.hpp"
#include "lesiongen/core/rng.hpp"

namespace lesiongen::data {

namespace fs = std::filesystem;

std::vector<Fold> stratified_kfold(const DatasetManifest& m, int k, uint64_t seed) {
    if (k < 2) throw ArgumentError("stratified_kfold: k must be >= 2");

    std::map<std::string, std::vector<size_t>> by_class;
    for (size_t i = 0; i < m.records.size(); ++i) by_class[m.records[i].category].push_back(i);
    for (const auto& [cls, idx] : by_class)
        if (idx.size() < static_cast<size_t>(k))
            throw ValidationError("stratified_kfold: class '" + cls + "' has " +
                                  std::to_string(idx.size()) + " samples, fewer than k=" +
                                  std::to_string(k));

    // Shuffle within each class, then deal round-robin: per-class fold counts
    // differ by at most one and the folds partition the records.
    std::vector<std::vector<size_t>> folds(k);
    Rng rng(mix_seed(seed, 0x5f01d));
    for (auto& [cls, idx] : by_class) {
        rng.shuffle(idx);
        for (size_t i = 0; i < idx.size(); ++i) folds[i % k].push_back(idx[i]);
    }

    std::vector<Fold> out;
    for (int f = 0; f < k; ++f) {
        Fold fold;
        fold.train.root = fold.validation.root = m.root;
        fold.train.label_set = fold.validation.label_set = m.label_set;
        std::vector<char> in_val(m.records.size(), 0);
        for (size_t i : folds[f]) in_val[i] = 1;
        for (size_t i = 0; i < m.records.size(); ++i)
            (in_val[i] ? fold.validation : fold.train).records.push_back(m.records[i]);
        out.push_back(std::move(fold));
    }
    return out;
}

namespace {

// Largest-remainder apportionment of n across the weighted classes.
std::map<std::string, size_t> apportion(const std::map<std::string, double>& weights, size_t n) {
    double total_w = 0.0;
    for (const auto& [cls, w] : weights) total_w += w;
    if (total_w <= 0.0) throw ArgumentError("assemble_hybrid: class weights sum to zero");

    std::map<std::string, size_t> counts;
    std::vector<std::pair<double, std::string>> remainders;
    size_t assigned = 0;
    for (const auto& [cls, w] : weights) {
        const double exact = n * w / total_w;
        const size_t floor_c = static_cast<size_t>(exact);
        counts[cls] = floor_c;
        assigned += floor_c;
        remainders.push_back({exact - floor_c, cls});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (size_t i = 0; assigned < n && i < remainders.size(); ++i, ++assigned)
        ++counts[remainders[i].second];
    return counts;
}

void draw_from_source(const DatasetManifest& src, const char* src_name, size_t want,
                      const std::optional<std::map<std::string, double>>& override_weights,
                      Rng& rng, std::vector<ManifestRecord>& out) {
    if (want == 0) return;
    std::map<std::string, std::vector<size_t>> by_class;
    for (size_t i = 0; i < src.records.size(); ++i) by_class[src.records[i].category].push_back(i);

    if (src.records.size() < want)
        throw CompositionError("assemble_hybrid: " + std::string(src_name) + " source has " +
                               std::to_string(src.records.size()) + " records, needs " +
                               std::to_string(want));

    std::map<std::string, double> weights;
    if (override_weights) {
        weights = *override_weights;
    } else {
        for (const auto& [cls, idx] : by_class) weights[cls] = static_cast<double>(idx.size());
    }
    const auto quota = apportion(weights, want);

    std::string shortfall;
    for (const auto& [cls, q] : quota) {
        const size_t have = by_class.count(cls) ? by_class[cls].size() : 0;
        if (have < q)
            shortfall += std::string(shortfall.empty() ? "" : ", ") + src_name + "/" + cls + ": need " +
                         std::to_string(q) + ", have " + std::to_string(have);
    }
    if (!shortfall.empty())
        throw CompositionError("assemble_hybrid: insufficient records (" + shortfall + ")");

    for (const auto& [cls, q] : quota) {
        auto& idx = by_class[cls];
        rng.shuffle(idx);
        for (size_t i = 0; i < q; ++i) {
            ManifestRecord r = src.records[idx[i]];
            // Rebase onto absolute paths so records from different roots mix.
            r.image = fs::absolute(src.root / r.image).lexically_normal().string();
            r.mask = fs::absolute(src.root / r.mask).lexically_normal().string();
            out.push_back(std::move(r));
        }
    }
}

}  // namespace

DatasetManifest assemble_hybrid(const DatasetManifest& real, const DatasetManifest& synth,
                                const HybridSpec& spec, uint64_t seed) {
    if (spec.real_fraction < 0.0 || spec.real_fraction > 1.0)
        throw ArgumentError("assemble_hybrid: real_fraction must be in [0,1]");
    const size_t n_real = static_cast<size_t>(std::llround(spec.real_fraction * spec.total));
    const size_t n_synth = spec.total - n_real;

    DatasetManifest out;
    out.root = "";
    out.label_set = real.label_set;
    for (const auto& l : synth.label_set)
        if (!out.has_label(l)) out.label_set.push_back(l);

    Rng rng(mix_seed(seed, 0x4b1d));
    draw_from_source(real, "real", n_real, spec.class_weights, rng, out.records);
    draw_from_source(synth, "synthetic", n_synth, spec.class_weights, rng, out.records);
    return out;
}

}  // namespace lesiongen::data
