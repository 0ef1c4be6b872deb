#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lesiongen/core/optim.hpp"
#include "lesiongen/core/tensor.hpp"

namespace lesiongen::backbone {

// Text conditioning: a token-row matrix [S, E] feeding cross-attention.
struct Conditioning {
    nn::Tensor tokens;
    bool null_flag = false;
};

// Denoiser output; eps_true is attached by the training step.
struct NoisePrediction {
    nn::Tensor eps_hat;
    nn::Tensor eps_true;  // undefined outside training
};

// Plain convolution weights, the unit the channel-surgery operations work on.
// kernel layout is [out_ch, in_ch, kh, kw] row-major.
struct ConvWeights {
    int out_ch = 0;
    int in_ch = 0;
    int kh = 0;
    int kw = 0;
    std::vector<float> kernel;
    std::vector<float> bias;

    size_t kernel_size() const { return static_cast<size_t>(out_ch) * in_ch * kh * kw; }
    float& at(int o, int i, int r, int c) {
        return kernel[((static_cast<size_t>(o) * in_ch + i) * kh + r) * kw + c];
    }
    float at(int o, int i, int r, int c) const {
        return kernel[((static_cast<size_t>(o) * in_ch + i) * kh + r) * kw + c];
    }
};

// A linear projection with frozen base weights and an optional low-rank
// adapter; attention projections expose these for injection.
struct LoraLinear {
    nn::Tensor weight;  // [D, K]
    nn::Tensor bias;    // [K]
    nn::Tensor lora_a;  // [D, r], undefined until injected
    nn::Tensor lora_b;  // [r, K]
    int rank = 0;
    float alpha = 0.f;

    bool has_adapter() const { return rank > 0; }
    float adapter_scale() const { return rank > 0 ? alpha / static_cast<float>(rank) : 0.f; }
    int in_dim() const { return weight.shape()[0]; }
    int out_dim() const { return weight.shape()[1]; }

    nn::Tensor forward(const nn::Tensor& x) const;
};

// Encoder/decoder/denoiser/text-embedder quartet behind which either the tiny
// desk-scale model or an externally supplied pretrained backbone lives.
class Backbone {
public:
    virtual ~Backbone() = default;

    // pixels: [pixel_channels, H, W] in [-1, 1] -> latent [latent_channels, H/f, W/f],
    // already multiplied by scale_factor.
    virtual nn::Tensor encode(const nn::Tensor& pixels) = 0;
    // latent -> pixels; RGB planes nominally in [-1, 1], extra planes are raw logits.
    virtual nn::Tensor decode(const nn::Tensor& latent) = 0;
    virtual nn::Tensor denoise(const nn::Tensor& z, int t, const Conditioning& cond) = 0;

    virtual Conditioning embed_text(const std::string& caption) const = 0;
    virtual Conditioning null_conditioning() const = 0;

    virtual int pixel_channels() const = 0;
    virtual int latent_channels() const = 0;
    virtual int downsample_factor() const = 0;
    virtual int embedding_width() const = 0;
    virtual float scale_factor() const = 0;

    // Every named parameter, base and otherwise.
    virtual std::vector<nn::Param> parameters() = 0;
    // Attention projections eligible for adapter injection, in a stable order.
    virtual std::vector<std::pair<std::string, LoraLinear*>> lora_targets() = 0;

    virtual std::string kind() const = 0;
};

using BackbonePtr = std::shared_ptr<Backbone>;

}  // namespace lesiongen::backbone
