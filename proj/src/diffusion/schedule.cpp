#include "lesiongen/diffusion/schedule.hpp"

#include <cmath>

#include "lesiongen/core/error.hpp"

namespace lesiongen::diffusion {

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "scaled_linear") return ScheduleKind::scaled_linear;
    throw ArgumentError("unknown schedule kind: " + s);
}

std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::linear ? "linear" : "scaled_linear";
}

double NoiseSchedule::beta_at(int t) const {
    if (t < 1 || t > T) throw ArgumentError("beta_at: timestep out of range");
    return beta[t - 1];
}

double NoiseSchedule::alpha_at(int t) const {
    if (t < 1 || t > T) throw ArgumentError("alpha_at: timestep out of range");
    return alpha[t - 1];
}

double NoiseSchedule::alpha_bar_at(int t) const {
    if (t < 0 || t > T) throw ArgumentError("alpha_bar_at: timestep out of range");
    return t == 0 ? 1.0 : alpha_bar[t - 1];
}

ScheduleConfig default_pretrained_schedule() { return {}; }

ScheduleConfig default_tiny_schedule() {
    // Linear schedule shortened to T=200 with betas scaled by 1000/T so the
    // cumulative product still decays to ~1e-4 at the terminal step.
    ScheduleConfig cfg;
    cfg.kind = ScheduleKind::linear;
    cfg.T = 200;
    cfg.beta_start = 0.0001 * (1000.0 / cfg.T);
    cfg.beta_end = 0.02 * (1000.0 / cfg.T);
    return cfg;
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end, ScheduleKind kind) {
    if (T < 1) throw ArgumentError("make_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ArgumentError("make_schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    if (T == 1) {
        s.beta[0] = kind == ScheduleKind::linear
                        ? beta_start
                        : std::sqrt(beta_start) * std::sqrt(beta_start);
    } else {
        for (int i = 0; i < T; ++i) {
            const double f = static_cast<double>(i) / (T - 1);
            if (kind == ScheduleKind::linear) {
                s.beta[i] = beta_start + f * (beta_end - beta_start);
            } else {
                const double r = std::sqrt(beta_start) + f * (std::sqrt(beta_end) - std::sqrt(beta_start));
                s.beta[i] = r * r;
            }
        }
    }
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
    return s;
}

NoiseSchedule make_schedule(const ScheduleConfig& cfg) {
    return make_schedule(cfg.T, cfg.beta_start, cfg.beta_end, cfg.kind);
}

}  // namespace lesiongen::diffusion
