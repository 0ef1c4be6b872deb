#include "lesiongen/harness/registry.hpp"

#include <cmath>

#include "lesiongen/core/error.hpp"
#include "lesiongen/core/rng.hpp"

namespace lesiongen::harness {

Task task_from_string(const std::string& s) {
    if (s == "classification") return Task::classification;
    if (s == "segmentation") return Task::segmentation;
    throw ArgumentError("unknown task: " + s);
}

std::string to_string(Task t) {
    return t == Task::classification ? "classification" : "segmentation";
}

namespace {

nn::Tensor conv_init(Rng& rng, int co, int ci, int k) {
    std::vector<float> w(static_cast<size_t>(co) * ci * k * k);
    rng.fill_normal(w, std::sqrt(2.0 / (static_cast<double>(ci) * k * k)));
    return nn::leaf({co, ci, k, k}, std::move(w));
}

nn::Tensor zeros(std::vector<int> shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return nn::leaf(std::move(shape), std::vector<float>(n, 0.f));
}

// conv-pool stack with a linear head.
class TinyCnn : public Model {
public:
    TinyCnn(int num_classes, int input_size, uint64_t seed) {
        if (input_size % 4 != 0) throw ConfigError("tiny_cnn: input size must be divisible by 4");
        Rng rng(mix_seed(seed, 0xc125));
        w1_ = conv_init(rng, 8, 3, 3);
        b1_ = zeros({8});
        w2_ = conv_init(rng, 16, 8, 3);
        b2_ = zeros({16});
        w3_ = conv_init(rng, 32, 16, 3);
        b3_ = zeros({32});
        std::vector<float> head(static_cast<size_t>(32) * num_classes);
        rng.fill_normal(head, 0.05);
        head_w_ = nn::leaf({32, num_classes}, std::move(head));
        head_b_ = zeros({num_classes});
    }

    nn::Tensor forward(const nn::Tensor& image) override {
        auto h = nn::silu(nn::conv2d(image, w1_, b1_, 1, 1));
        h = nn::avg_pool(h, 2);
        h = nn::silu(nn::conv2d(h, w2_, b2_, 1, 1));
        h = nn::avg_pool(h, 2);
        h = nn::silu(nn::conv2d(h, w3_, b3_, 1, 1));
        auto pooled = nn::global_avg_pool(h);  // [32]
        auto row = nn::reshape(pooled, {1, 32});
        return nn::reshape(nn::add_row_bias(nn::matmul(row, head_w_), head_b_), {head_b_.shape()[0]});
    }

    std::vector<nn::Param> parameters() override {
        return {{"c1.w", w1_}, {"c1.b", b1_}, {"c2.w", w2_},     {"c2.b", b2_},
                {"c3.w", w3_}, {"c3.b", b3_}, {"head.w", head_w_}, {"head.b", head_b_}};
    }

private:
    nn::Tensor w1_, b1_, w2_, b2_, w3_, b3_, head_w_, head_b_;
};

// Two-level encoder-decoder with an additive skip.
class TinySegNet : public Model {
public:
    TinySegNet(int /*num_classes*/, int input_size, uint64_t seed) {
        if (input_size % 2 != 0) throw ConfigError("tiny_segnet: input size must be even");
        Rng rng(mix_seed(seed, 0x5e6));
        e1_w_ = conv_init(rng, 12, 3, 3);
        e1_b_ = zeros({12});
        e2_w_ = conv_init(rng, 24, 12, 3);
        e2_b_ = zeros({24});
        d1_w_ = conv_init(rng, 12, 24, 3);
        d1_b_ = zeros({12});
        out_w_ = conv_init(rng, 1, 12, 3);
        out_b_ = zeros({1});
    }

    nn::Tensor forward(const nn::Tensor& image) override {
        auto s1 = nn::silu(nn::conv2d(image, e1_w_, e1_b_, 1, 1));  // [12,S,S]
        auto d = nn::avg_pool(s1, 2);
        auto e2 = nn::silu(nn::conv2d(d, e2_w_, e2_b_, 1, 1));      // [24,S/2,S/2]
        auto u = nn::upsample_nearest(e2, 2);
        auto d1 = nn::silu(nn::conv2d(u, d1_w_, d1_b_, 1, 1));      // [12,S,S]
        auto merged = nn::add(d1, s1);
        return nn::conv2d(merged, out_w_, out_b_, 1, 1);            // [1,S,S] logits
    }

    std::vector<nn::Param> parameters() override {
        return {{"e1.w", e1_w_}, {"e1.b", e1_b_}, {"e2.w", e2_w_},   {"e2.b", e2_b_},
                {"d1.w", d1_w_}, {"d1.b", d1_b_}, {"out.w", out_w_}, {"out.b", out_b_}};
    }

private:
    nn::Tensor e1_w_, e1_b_, e2_w_, e2_b_, d1_w_, d1_b_, out_w_, out_b_;
};

}  // namespace

void ArchitectureRegistry::add(Task task, const std::string& name, ModelFactory factory) {
    factories_[{task, name}] = std::move(factory);
}

bool ArchitectureRegistry::contains(Task task, const std::string& name) const {
    return factories_.count({task, name}) > 0;
}

ModelPtr ArchitectureRegistry::create(Task task, const std::string& name, int num_classes,
                                      int input_size, uint64_t seed) const {
    auto it = factories_.find({task, name});
    if (it == factories_.end())
        throw ConfigError("architecture '" + name + "' not registered for " + to_string(task));
    return it->second(num_classes, input_size, seed);
}

const ArchitectureRegistry& ArchitectureRegistry::builtins() {
    static const ArchitectureRegistry reg = [] {
        ArchitectureRegistry r;
        r.add(Task::classification, "tiny_cnn", [](int k, int s, uint64_t seed) {
            return std::make_shared<TinyCnn>(k, s, seed);
        });
        r.add(Task::segmentation, "tiny_segnet", [](int k, int s, uint64_t seed) {
            return std::make_shared<TinySegNet>(k, s, seed);
        });
        return r;
    }();
    return reg;
}

}  // namespace lesiongen::harness
