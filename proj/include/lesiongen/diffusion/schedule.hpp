#pragma once

#include <string>
#include <vector>

namespace lesiongen::diffusion {

enum class ScheduleKind { linear, scaled_linear };

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind k);

// Variance schedule. Sequences are indexed by timestep t in [1, T]; by
// convention alpha_bar(0) == 1.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;       // beta[t-1] = beta_t
    std::vector<double> alpha;      // 1 - beta_t
    std::vector<double> alpha_bar;  // prod_{s<=t} alpha_s

    double beta_at(int t) const;       // t in [1, T]
    double alpha_at(int t) const;      // t in [1, T]
    double alpha_bar_at(int t) const;  // t in [0, T], alpha_bar_at(0) == 1
};

struct ScheduleConfig {
    ScheduleKind kind = ScheduleKind::scaled_linear;
    int T = 1000;
    double beta_start = 0.00085;
    double beta_end = 0.012;
};

// Defaults: the pretrained-backbone schedule above, and a short linear
// schedule for the tiny backbone with betas scaled so the terminal
// signal-to-noise ratio stays near zero.
ScheduleConfig default_pretrained_schedule();
ScheduleConfig default_tiny_schedule();

NoiseSchedule make_schedule(int T, double beta_start, double beta_end, ScheduleKind kind);
NoiseSchedule make_schedule(const ScheduleConfig& cfg);

}  // namespace lesiongen::diffusion
