#include "lesiongen/train/losses.hpp"

#include <cmath>

#include "lesiongen/core/error.hpp"

namespace lesiongen::train {

namespace {

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

void LossWeights::validate() const {
    if (lambda_diffusion < 0 || lambda_mask < 0 || lambda_dice < 0)
        throw ArgumentError("loss weights must be nonnegative");
    if (lambda_diffusion == 0 && lambda_mask == 0 && lambda_dice == 0)
        throw ArgumentError("loss weights must not all be zero");
}

std::vector<double> MaskPrediction::probs() const {
    std::vector<double> p(logits.size());
    for (size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(logits[i]);
    return p;
}

void MaskPrediction::validate() const {
    if (logits.size() != target.size()) throw ArgumentError("mask prediction: shape mismatch");
    if (smoothing <= 0.0) throw ArgumentError("mask prediction: smoothing must be > 0");
    for (double y : target)
        if (y != 0.0 && y != 1.0) throw ArgumentError("mask prediction: target is not binary");
}

double diffusion_loss(const backbone::NoisePrediction& pred) {
    if (!pred.eps_true.defined()) throw ArgumentError("diffusion_loss: eps_true missing");
    if (!pred.eps_hat.defined() || pred.eps_hat.numel() != pred.eps_true.numel())
        throw ArgumentError("diffusion_loss: shape mismatch");
    const auto& h = pred.eps_hat.data();
    const auto& t = pred.eps_true.data();
    double acc = 0.0;
    for (size_t i = 0; i < h.size(); ++i) {
        const double d = static_cast<double>(t[i]) - h[i];
        acc += d * d;
    }
    return acc / static_cast<double>(h.size());
}

double diffusion_loss(const std::vector<double>& eps_true, const std::vector<double>& eps_hat) {
    if (eps_true.size() != eps_hat.size()) throw ArgumentError("diffusion_loss: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < eps_true.size(); ++i) {
        const double d = eps_true[i] - eps_hat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(eps_true.size());
}

std::vector<double> diffusion_loss_grad(const std::vector<double>& eps_true,
                                        const std::vector<double>& eps_hat) {
    if (eps_true.size() != eps_hat.size()) throw ArgumentError("diffusion_loss_grad: shape mismatch");
    std::vector<double> g(eps_true.size());
    const double inv_n = 1.0 / static_cast<double>(eps_true.size());
    for (size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (eps_hat[i] - eps_true[i]) * inv_n;
    return g;
}

double bce_mask_loss(const MaskPrediction& mp) {
    mp.validate();
    double acc = 0.0;
    for (size_t i = 0; i < mp.logits.size(); ++i) {
        const double x = mp.logits[i], y = mp.target[i];
        acc += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
    return acc / static_cast<double>(mp.logits.size());
}

std::vector<double> bce_mask_loss_grad(const MaskPrediction& mp) {
    mp.validate();
    std::vector<double> g(mp.logits.size());
    const double inv_n = 1.0 / static_cast<double>(mp.logits.size());
    for (size_t i = 0; i < g.size(); ++i) g[i] = (sigmoid(mp.logits[i]) - mp.target[i]) * inv_n;
    return g;
}

double dice_loss(const MaskPrediction& mp) {
    mp.validate();
    double s_yp = 0.0, s_y = 0.0, s_p = 0.0;
    for (size_t i = 0; i < mp.logits.size(); ++i) {
        const double p = sigmoid(mp.logits[i]);
        s_yp += mp.target[i] * p;
        s_y += mp.target[i];
        s_p += p;
    }
    return 1.0 - (2.0 * s_yp + mp.smoothing) / (s_y + s_p + mp.smoothing);
}

std::vector<double> dice_loss_grad(const MaskPrediction& mp) {
    mp.validate();
    double s_yp = 0.0, s_y = 0.0, s_p = 0.0;
    std::vector<double> probs(mp.logits.size());
    for (size_t i = 0; i < mp.logits.size(); ++i) {
        probs[i] = sigmoid(mp.logits[i]);
        s_yp += mp.target[i] * probs[i];
        s_y += mp.target[i];
        s_p += probs[i];
    }
    const double denom = s_y + s_p + mp.smoothing;
    const double num = 2.0 * s_yp + mp.smoothing;
    std::vector<double> g(mp.logits.size());
    for (size_t i = 0; i < g.size(); ++i) {
        const double dL_dp = -(2.0 * mp.target[i] * denom - num) / (denom * denom);
        g[i] = dL_dp * probs[i] * (1.0 - probs[i]);
    }
    return g;
}

double total_loss(double diffusion, double mask, double dice, const LossWeights& w) {
    w.validate();
    return w.lambda_diffusion * diffusion + w.lambda_mask * mask + w.lambda_dice * dice;
}

}  // namespace lesiongen::train
