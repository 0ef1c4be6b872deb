#include "lesiongen/backbone/lora.hpp"

#include <algorithm>

#include "lesiongen/core/error.hpp"
#include "lesiongen/core/rng.hpp"

namespace lesiongen::backbone {

size_t LoraAdapterSet::parameter_count() const {
    size_t n = 0;
    for (const auto& e : entries) n += e.a.numel() + e.b.numel();
    return n;
}

LoraAdapterSet inject_lora(Backbone& bundle, int rank, float alpha, uint64_t seed) {
    if (rank < 1) throw ArgumentError("inject_lora: rank must be >= 1");
    auto targets = bundle.lora_targets();
    LoraAdapterSet set;
    set.rank = rank;
    set.alpha = alpha;
    Rng rng(mix_seed(seed, 0x10aa));
    for (auto& [name, layer] : targets) {
        const int d = layer->in_dim();
        const int k = layer->out_dim();
        if (rank > std::min(d, k))
            throw ArgumentError("inject_lora: rank " + std::to_string(rank) +
                                " exceeds min dimension of layer " + name);
        std::vector<float> a(static_cast<size_t>(d) * rank);
        rng.fill_normal(a, 0.01);
        layer->lora_a = nn::leaf({d, rank}, std::move(a));
        layer->lora_b = nn::leaf({rank, k}, std::vector<float>(static_cast<size_t>(rank) * k, 0.f));
        layer->rank = rank;
        layer->alpha = alpha;
        set.entries.push_back({name, layer->lora_a, layer->lora_b, d, k});
    }
    return set;
}

std::vector<float> merge_lora(const std::vector<float>& w, int d, int k,
                              const std::vector<float>& a, const std::vector<float>& b, int rank,
                              float alpha) {
    if (w.size() != static_cast<size_t>(d) * k || a.size() != static_cast<size_t>(d) * rank ||
        b.size() != static_cast<size_t>(rank) * k)
        throw ArgumentError("merge_lora: shape mismatch");
    const float scale = alpha / static_cast<float>(rank);
    std::vector<float> out = w;
    for (int i = 0; i < d; ++i)
        for (int r = 0; r < rank; ++r) {
            const float av = a[static_cast<size_t>(i) * rank + r] * scale;
            if (av == 0.f) continue;
            for (int j = 0; j < k; ++j)
                out[static_cast<size_t>(i) * k + j] += av * b[static_cast<size_t>(r) * k + j];
        }
    return out;
}

namespace {

TrainableSet select_params(Backbone& bundle, bool include_base) {
    TrainableSet set;
    for (auto& p : bundle.parameters()) {
        set.total_count += p.tensor.numel();
        const bool trainable = include_base || p.kind != nn::ParamKind::base;
        p.tensor.node()->requires_grad = trainable;
        if (trainable) {
            set.trainable_count += p.tensor.numel();
            set.params.push_back(p);
        }
    }
    return set;
}

}  // namespace

TrainableSet trainable_parameters(Backbone& bundle) { return select_params(bundle, false); }

TrainableSet all_parameters(Backbone& bundle) { return select_params(bundle, true); }

}  // namespace lesiongen::backbone
