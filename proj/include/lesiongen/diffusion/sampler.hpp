#pragma once

#include <vector>

#include "lesiongen/backbone/bundle.hpp"
#include "lesiongen/diffusion/process.hpp"
#include "lesiongen/diffusion/schedule.hpp"

namespace lesiongen::diffusion {

struct SamplerConfig {
    int steps = 45;
    double guidance_scale = 1.22;
    double eta = 0.0;
};

// Descending DDIM timestep subsequence: `steps` uniformly spaced values over
// [1, T] including the terminal step, deduplicated after rounding.
std::vector<int> ddim_timesteps(int T, int steps);

// Draws z_T ~ N(0, I) from the seed, runs the DDIM subsequence with
// classifier-free guidance at each step, and returns z_0. Deterministic for
// eta == 0. The unconditional branch is skipped when guidance_scale == 1.
LatentState sample_latent(backbone::Backbone& bundle, const backbone::Conditioning& cond,
                          const NoiseSchedule& sched, const SamplerConfig& cfg,
                          const std::vector<int>& latent_shape, uint64_t seed);

}  // namespace lesiongen::diffusion
