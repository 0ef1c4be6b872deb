#include "lesiongen/diffusion/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "lesiongen/core/error.hpp"

namespace lesiongen::diffusion {

std::vector<int> ddim_timesteps(int T, int steps) {
    if (T < 1 || steps < 1) throw ArgumentError("ddim_timesteps: T and steps must be >= 1");
    std::vector<int> ts;
    if (steps == 1) {
        ts.push_back(T);
        return ts;
    }
    for (int i = 0; i < steps; ++i) {
        const double v = 1.0 + static_cast<double>(i) * (T - 1) / (steps - 1);
        ts.push_back(static_cast<int>(std::lround(v)));
    }
    std::sort(ts.begin(), ts.end(), std::greater<int>());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

LatentState sample_latent(backbone::Backbone& bundle, const backbone::Conditioning& cond,
                          const NoiseSchedule& sched, const SamplerConfig& cfg,
                          const std::vector<int>& latent_shape, uint64_t seed) {
    if (cfg.steps < 1) throw ArgumentError("sample_latent: steps must be >= 1");
    nn::NoGradGuard no_grad;

    size_t numel = 1;
    for (int d : latent_shape) numel *= static_cast<size_t>(d);

    Rng rng(mix_seed(seed, 0x5a17'beef));
    std::vector<double> z(numel);
    for (auto& v : z) v = rng.normal();

    const auto timesteps = ddim_timesteps(sched.T, cfg.steps);
    const bool use_guidance = cfg.guidance_scale != 1.0;
    const auto uncond = bundle.null_conditioning();

    auto run_denoiser = [&](const std::vector<double>& zt, int t) {
        std::vector<float> zf(zt.begin(), zt.end());
        nn::Tensor zt_t = nn::from_vec(latent_shape, std::move(zf));
        auto to_double = [](const nn::Tensor& t_) {
            return std::vector<double>(t_.data().begin(), t_.data().end());
        };
        const auto eps_cond = to_double(bundle.denoise(zt_t, t, cond));
        if (!use_guidance) return eps_cond;
        const auto eps_uncond = to_double(bundle.denoise(zt_t, t, uncond));
        return cfg_combine(eps_uncond, eps_cond, cfg.guidance_scale);
    };

    for (size_t i = 0; i < timesteps.size(); ++i) {
        const int t = timesteps[i];
        const int t_prev = i + 1 < timesteps.size() ? timesteps[i + 1] : 0;
        const auto eps = run_denoiser(z, t);
        z = ddim_step(z, eps, t, t_prev, sched, cfg.eta, &rng);
    }

    LatentState out;
    out.z = std::move(z);
    out.shape = latent_shape;
    out.t = 0;
    return out;
}

}  // namespace lesiongen::diffusion
