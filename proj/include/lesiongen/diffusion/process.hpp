#pragma once

#include <vector>

#include "lesiongen/core/rng.hpp"
#include "lesiongen/core/tensor.hpp"
#include "lesiongen/diffusion/schedule.hpp"

namespace lesiongen::diffusion {

// Latent array plus its timestep index; z is flattened [C,h,w].
struct LatentState {
    std::vector<double> z;
    std::vector<int> shape;
    int t = 0;
};

// Mean/scale of the learned reverse kernel p(x_{t-1} | x_t). Implemented for
// test purposes; the CLI sampler is DDIM.
struct ReverseKernel {
    std::vector<double> mu;
    double sigma = 0.0;
};

// Closed-form forward corruption: x_t = sqrt(ab_t) x0 + sqrt(1-ab_t) eps.
std::vector<double> q_sample(const std::vector<double>& x0, int t, const std::vector<double>& eps,
                             const NoiseSchedule& sched);

// t composed single steps x_s = sqrt(1-beta_s) x_{s-1} + sqrt(beta_s) eps_s.
// Distributionally equal to q_sample; exported as a Monte-Carlo test oracle.
std::vector<double> iterated_forward_equivalence(const std::vector<double>& x0, int t,
                                                 const NoiseSchedule& sched, Rng& rng);

// Inversion of the closed form: x0_hat = (z_t - sqrt(1-ab_t) eps_hat) / sqrt(ab_t).
std::vector<double> predict_x0(const std::vector<double>& z_t, const std::vector<double>& eps_hat,
                               int t, const NoiseSchedule& sched);

// DDIM update from t to t_prev (t_prev < t, alpha_bar_at(0) == 1).
// With eta > 0, rng supplies the fresh noise; eta == 0 is deterministic.
std::vector<double> ddim_step(const std::vector<double>& z_t, const std::vector<double>& eps_hat,
                              int t, int t_prev, const NoiseSchedule& sched, double eta,
                              Rng* rng = nullptr);

// Classifier-free guidance: uncond + scale * (cond - uncond).
std::vector<double> cfg_combine(const std::vector<double>& eps_uncond,
                                const std::vector<double>& eps_cond, double scale);

// Standard DDPM posterior mean/scale derived from a noise prediction.
ReverseKernel reverse_kernel_from_eps(const std::vector<double>& z_t,
                                      const std::vector<double>& eps_hat, int t,
                                      const NoiseSchedule& sched);

// Graph-building variants used inside the training step.
nn::Tensor q_sample(const nn::Tensor& x0, int t, const nn::Tensor& eps, const NoiseSchedule& sched);
nn::Tensor predict_x0(const nn::Tensor& z_t, const nn::Tensor& eps_hat, int t,
                      const NoiseSchedule& sched);

}  // namespace lesiongen::diffusion
