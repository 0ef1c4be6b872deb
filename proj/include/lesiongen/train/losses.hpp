#pragma once

#include <vector>

#include "lesiongen/backbone/bundle.hpp"

namespace lesiongen::train {

// Multi-objective weights; the paper's default sets all three to 1.
struct LossWeights {
    double lambda_diffusion = 1.0;
    double lambda_mask = 1.0;
    double lambda_dice = 1.0;

    void validate() const;
    bool needs_mask_losses() const { return lambda_mask > 0.0 || lambda_dice > 0.0; }
};

// Mask supervision instance: logits against a binary target, with the Dice
// smoothing term. Reference implementations below are double precision and
// export analytic gradients; the float graph ops are checked against them.
struct MaskPrediction {
    std::vector<double> logits;
    std::vector<double> target;  // values exactly 0 or 1
    double smoothing = 1.0;

    size_t pixel_count() const { return logits.size(); }
    std::vector<double> probs() const;
    void validate() const;
};

// Mean squared error between true and predicted noise. eps_true must be set.
double diffusion_loss(const backbone::NoisePrediction& pred);
double diffusion_loss(const std::vector<double>& eps_true, const std::vector<double>& eps_hat);
std::vector<double> diffusion_loss_grad(const std::vector<double>& eps_true,
                                        const std::vector<double>& eps_hat);  // d/d eps_hat

// Binary cross entropy in the numerically stable logit form.
double bce_mask_loss(const MaskPrediction& mp);
std::vector<double> bce_mask_loss_grad(const MaskPrediction& mp);  // d/d logits

// 1 - (2*sum(y*p) + eps) / (sum(y) + sum(p) + eps).
double dice_loss(const MaskPrediction& mp);
std::vector<double> dice_loss_grad(const MaskPrediction& mp);  // d/d logits

double total_loss(double diffusion, double mask, double dice, const LossWeights& w);

}  // namespace lesiongen::train
