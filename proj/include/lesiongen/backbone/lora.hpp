#pragma once

#include "lesiongen/backbone/bundle.hpp"

namespace lesiongen::backbone {

// Per-layer low-rank pairs (A: d x r, B: r x k). The tensors are shared with
// the layers they were injected into; the set is the checkpointable handle.
struct LoraAdapterSet {
    struct Entry {
        std::string layer;
        nn::Tensor a;
        nn::Tensor b;
        int d = 0;
        int k = 0;
    };
    int rank = 0;
    float alpha = 0.f;
    std::vector<Entry> entries;

    size_t parameter_count() const;
};

// Injects fresh adapters into every attention projection of the bundle's
// denoiser: A ~ N(0, 0.01^2) seeded, B = 0, so the forward pass is unchanged
// until training moves B.
LoraAdapterSet inject_lora(Backbone& bundle, int rank, float alpha, uint64_t seed);

// W + (alpha/rank) * A * B on plain row-major buffers. The merged projection
// must agree with the adapted forward pass; tests hold the two routes together.
std::vector<float> merge_lora(const std::vector<float>& w, int d, int k,
                              const std::vector<float>& a, const std::vector<float>& b, int rank,
                              float alpha);

// Everything training may touch: adapter pairs plus inflated channel slices.
// Disjoint from frozen base parameters by construction (ParamKind tags).
struct TrainableSet {
    std::vector<nn::Param> params;
    size_t trainable_count = 0;
    size_t total_count = 0;

    double fraction() const {
        return total_count == 0 ? 0.0 : static_cast<double>(trainable_count) / total_count;
    }
};

TrainableSet trainable_parameters(Backbone& bundle);

// Desk-scale/full-parameter variant: selects every parameter (used to prepare
// the tiny pretrained checkpoint, never by the adapter fine-tuning path).
TrainableSet all_parameters(Backbone& bundle);

}  // namespace lesiongen::backbone
