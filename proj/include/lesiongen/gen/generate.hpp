#pragma once

#include <map>

#include "lesiongen/backbone/bundle.hpp"
#include "lesiongen/core/image.hpp"
#include "lesiongen/data/manifest.hpp"
#include "lesiongen/diffusion/sampler.hpp"

namespace lesiongen::gen {

struct GenerationConfig {
    int steps = 45;
    double guidance_scale = 1.22;
    int resolution = 512;
    double eta = 0.0;
    uint64_t seed = 0;  // per-output seeds are seed + running index
    std::filesystem::path out_dir = "generated";
    int workers = 2;

    void validate(const backbone::Backbone& bundle) const;
    diffusion::SamplerConfig sampler() const { return {steps, guidance_scale, eta}; }
};

// Channels 1-3 and channel 4 of a four-plane image, no value changes.
std::pair<ImageF, ImageF> split_channels(const ImageF& four_channel);

// sigmoid(logit) >= 0.5 -> 1, i.e. logit >= 0 -> 1; the boundary logit 0 maps
// to lesion by convention.
Mask binarize_mask(const ImageF& logits);

// [-1,1] decoder range -> [0,1], clamped before quantization.
ImageF denormalize_rgb(const ImageF& raw);

struct GeneratedPair {
    ImageF rgb;  // [0,1]
    Mask mask;
};

// One-prompt dual generation: sample a latent, decode, split, binarize.
// Deterministic in (prompt, seed, cfg, weights).
GeneratedPair generate_pair(const std::string& prompt, uint64_t seed, const GenerationConfig& cfg,
                            backbone::Backbone& bundle, const diffusion::NoiseSchedule& sched);

// Generates `count` pairs per category using the fixed prompt template, writes
// {category}_{seed}_{index}.png and *_mask.png plus manifest.json, and returns
// the manifest (source=synthetic, captions = generation prompts).
data::DatasetManifest batch_generate(const std::map<std::string, size_t>& classes,
                                     const GenerationConfig& cfg, backbone::Backbone& bundle,
                                     const diffusion::NoiseSchedule& sched);

}  // namespace lesiongen::gen
