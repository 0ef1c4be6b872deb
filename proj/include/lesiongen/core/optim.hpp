#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lesiongen/core/tensor.hpp"

namespace lesiongen::nn {

// Named parameter reference. `kind` tags where the tensor came from so the
// trainable set can be selected without string conventions.
enum class ParamKind { base, slice, adapter };

struct Param {
    std::string name;
    Tensor tensor;
    ParamKind kind = ParamKind::base;
};

// AdamW: decoupled weight decay, bias-corrected moments.
class AdamW {
public:
    struct Config {
        double lr = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.0;
    };

    AdamW() = default;
    explicit AdamW(Config cfg) : cfg_(cfg) {}

    Config& config() { return cfg_; }
    const Config& config() const { return cfg_; }

    // Applies one update using the gradients currently stored on the params.
    void step(const std::vector<Param>& params);

    // Global-norm gradient clipping over the given params. Returns the norm
    // before clipping.
    static double clip_grad_norm(const std::vector<Param>& params, double max_norm);

    // Serializable state for checkpoint/resume.
    struct Slot {
        int64_t t = 0;
        std::vector<float> m;
        std::vector<float> v;
    };
    std::unordered_map<std::string, Slot>& state() { return state_; }
    const std::unordered_map<std::string, Slot>& state() const { return state_; }

private:
    Config cfg_;
    std::unordered_map<std::string, Slot> state_;
};

void zero_grads(const std::vector<Param>& params);

}  // namespace lesiongen::nn
