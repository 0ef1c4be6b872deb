#include "lesiongen/diffusion/process.hpp"

#include <cmath>

#include "lesiongen/core/error.hpp"

namespace lesiongen::diffusion {

namespace {

void check_t(int t, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) throw ArgumentError("timestep out of range [1, T]");
}

}  // namespace

std::vector<double> q_sample(const std::vector<double>& x0, int t, const std::vector<double>& eps,
                             const NoiseSchedule& sched) {
    check_t(t, sched);
    if (x0.size() != eps.size()) throw ArgumentError("q_sample: shape mismatch");
    const double ab = sched.alpha_bar_at(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    std::vector<double> out(x0.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

std::vector<double> iterated_forward_equivalence(const std::vector<double>& x0, int t,
                                                 const NoiseSchedule& sched, Rng& rng) {
    check_t(t, sched);
    std::vector<double> x = x0;
    for (int s = 1; s <= t; ++s) {
        const double a = std::sqrt(1.0 - sched.beta_at(s));
        const double b = std::sqrt(sched.beta_at(s));
        for (auto& v : x) v = a * v + b * rng.normal();
    }
    return x;
}

std::vector<double> predict_x0(const std::vector<double>& z_t, const std::vector<double>& eps_hat,
                               int t, const NoiseSchedule& sched) {
    check_t(t, sched);
    if (z_t.size() != eps_hat.size()) throw ArgumentError("predict_x0: shape mismatch");
    const double ab = sched.alpha_bar_at(t);
    if (ab <= 0.0) throw ArgumentError("predict_x0: alpha_bar is zero at this timestep");
    const double inv_a = 1.0 / std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    std::vector<double> out(z_t.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = (z_t[i] - b * eps_hat[i]) * inv_a;
    return out;
}

std::vector<double> ddim_step(const std::vector<double>& z_t, const std::vector<double>& eps_hat,
                              int t, int t_prev, const NoiseSchedule& sched, double eta, Rng* rng) {
    check_t(t, sched);
    if (t_prev >= t || t_prev < 0) throw ArgumentError("ddim_step: need 0 <= t_prev < t");
    if (eta < 0.0) throw ArgumentError("ddim_step: eta must be >= 0");
    if (eta > 0.0 && rng == nullptr) throw ArgumentError("ddim_step: eta > 0 requires an rng");

    const double ab_t = sched.alpha_bar_at(t);
    const double ab_p = sched.alpha_bar_at(t_prev);
    const auto x0_hat = predict_x0(z_t, eps_hat, t, sched);

    double sigma = 0.0;
    if (eta > 0.0) {
        sigma = eta * std::sqrt((1.0 - ab_p) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_p);
    }
    const double a = std::sqrt(ab_p);
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_p - sigma * sigma));

    std::vector<double> out(z_t.size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = a * x0_hat[i] + dir * eps_hat[i];
        if (sigma > 0.0) out[i] += sigma * rng->normal();
    }
    return out;
}

std::vector<double> cfg_combine(const std::vector<double>& eps_uncond,
                                const std::vector<double>& eps_cond, double scale) {
    if (eps_uncond.size() != eps_cond.size()) throw ArgumentError("cfg_combine: shape mismatch");
    std::vector<double> out(eps_uncond.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = eps_uncond[i] + scale * (eps_cond[i] - eps_uncond[i]);
    return out;
}

ReverseKernel reverse_kernel_from_eps(const std::vector<double>& z_t,
                                      const std::vector<double>& eps_hat, int t,
                                      const NoiseSchedule& sched) {
    check_t(t, sched);
    if (z_t.size() != eps_hat.size()) throw ArgumentError("reverse_kernel_from_eps: shape mismatch");
    const double beta = sched.beta_at(t);
    const double ab_t = sched.alpha_bar_at(t);
    const double ab_p = sched.alpha_bar_at(t - 1);
    ReverseKernel k;
    k.mu.resize(z_t.size());
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha_at(t));
    const double coef = beta / std::sqrt(1.0 - ab_t);
    for (size_t i = 0; i < z_t.size(); ++i) k.mu[i] = inv_sqrt_alpha * (z_t[i] - coef * eps_hat[i]);
    k.sigma = std::sqrt(beta * (1.0 - ab_p) / (1.0 - ab_t));
    return k;
}

nn::Tensor q_sample(const nn::Tensor& x0, int t, const nn::Tensor& eps, const NoiseSchedule& sched) {
    check_t(t, sched);
    const double ab = sched.alpha_bar_at(t);
    return nn::axpby(static_cast<float>(std::sqrt(ab)), x0,
                     static_cast<float>(std::sqrt(1.0 - ab)), eps);
}

nn::Tensor predict_x0(const nn::Tensor& z_t, const nn::Tensor& eps_hat, int t,
                      const NoiseSchedule& sched) {
    check_t(t, sched);
    const double ab = sched.alpha_bar_at(t);
    if (ab <= 0.0) throw ArgumentError("predict_x0: alpha_bar is zero at this timestep");
    const double inv_a = 1.0 / std::sqrt(ab);
    return nn::axpby(static_cast<float>(inv_a), z_t,
                     static_cast<float>(-std::sqrt(1.0 - ab) * inv_a), eps_hat);
}

}  // namespace lesiongen::diffusion
